"""Resistor-network inversion for two-dimensional electrical impedance tomography."""

__version__ = "0.1.0"
