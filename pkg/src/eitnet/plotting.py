"""Optional PNG figures; matplotlib is imported lazily and only here."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ArgumentError

__all__ = ["require_matplotlib", "plot_field", "plot_points", "plot_trace"]


def require_matplotlib():
    """Import matplotlib with the non-interactive backend."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ArgumentError("figures need matplotlib (pip install 'artifact[plot]')") from exc
    return plt


def _disk_samples(res: int):
    x = np.linspace(-1, 1, res)
    X, Y = np.meshgrid(x, x)
    inside = X**2 + Y**2 <= 1
    return X, Y, inside


def plot_field(path, field, title: str = "", res: int = 201, points=None) -> Path:
    """Image of a callable f(x, y) on the unit disk, optional overlay points."""
    plt = require_matplotlib()
    X, Y, inside = _disk_samples(res)
    Z = np.full(X.shape, np.nan)
    Z[inside] = field(X[inside], Y[inside])
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.pcolormesh(X, Y, Z, shading="auto", cmap="viridis")
    fig.colorbar(im, ax=ax)
    if points is not None:
        pts = np.asarray(points)
        ax.plot(pts[:, 0], pts[:, 1], "k.", ms=3)
    t = np.linspace(0, 2 * np.pi, 400)
    ax.plot(np.cos(t), np.sin(t), "k-", lw=0.8)
    ax.set_aspect("equal")
    ax.set_axis_off()
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_points(path, groups: dict, title: str = "") -> Path:
    """Scatter plot of labelled point sets in the unit disk."""
    plt = require_matplotlib()
    fig, ax = plt.subplots(figsize=(4, 4))
    for (label, pts), marker in zip(sorted(groups.items()), "so^vx+"):
        pts = np.asarray(pts)
        ax.plot(pts[:, 0], pts[:, 1], marker, ms=4, ls="none", label=label)
    t = np.linspace(0, 2 * np.pi, 400)
    ax.plot(np.cos(t), np.sin(t), "k-", lw=0.8)
    ax.set_aspect("equal")
    ax.legend(fontsize=7)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_trace(path, trace, title: str = "objective") -> Path:
    plt = require_matplotlib()
    if len(trace) == 0:
        raise ArgumentError("empty residual trace")
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.semilogy(np.arange(len(trace)), np.maximum(trace, 1e-300), "o-")
    ax.set_xlabel("Gauss-Newton step")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
