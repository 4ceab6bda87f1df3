"""Moebius maps of the unit disk for the one-sided partial-boundary setup.

F(z) = e^{i omega} (z - a) / (1 - conj(a) z) maps the disk onto itself; its
inverse G carries the accessible arc |tau| <= beta onto the whole boundary
except one gap between two equidistant measurement angles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DomainError
from .forward import ConductivityField, ElectrodeSet

__all__ = [
    "MobiusMap",
    "BoundaryCorrespondence",
    "fit_mobius_one_sided",
    "boundary_correspondence",
    "pull_back_electrodes",
    "push_forward_conductivity",
    "pull_back_reconstruction",
]


@dataclass(frozen=True)
class MobiusMap:
    """F(z) = e^{i omega} (z - a) / (1 - conj(a) z), |a| < 1."""

    a: complex = 0j
    omega: float = 0.0

    def __post_init__(self):
        if not abs(self.a) < 1:
            raise ArgumentError("Moebius parameter needs |a| < 1")
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "omega", float(self.omega) % (2 * np.pi))

    @staticmethod
    def _check(z):
        z = np.asarray(z, dtype=complex)
        if np.any(np.abs(z) > 1 + 1e-12):
            raise DomainError("point outside the closed unit disk")
        return z

    def forward(self, z):
        """F(z)."""
        z = self._check(z)
        return np.exp(1j * self.omega) * (z - self.a) / (1 - np.conj(self.a) * z)

    def inverse(self, w):
        """G(w) = F^{-1}(w)."""
        w = self._check(w) * np.exp(-1j * self.omega)
        return (w + self.a) / (1 + np.conj(self.a) * w)

    def forward_angle(self, theta):
        """Boundary angle of F(e^{i theta}), continuous in theta."""
        theta = np.asarray(theta, dtype=float)
        return theta + np.angle(np.exp(-1j * theta) * self.forward(np.exp(1j * theta)))

    def inverse_angle(self, tau):
        tau = np.asarray(tau, dtype=float)
        return tau + np.angle(np.exp(-1j * tau) * self.inverse(np.exp(1j * tau)))

    def to_json(self) -> str:
        return json.dumps({"a_re": self.a.real, "a_im": self.a.imag, "omega": self.omega})

    @classmethod
    def from_json(cls, text: str) -> "MobiusMap":
        d = json.loads(text)
        return cls(complex(d["a_re"], d["a_im"]), d["omega"])


def _endpoint_angle(a: float, beta: float) -> float:
    """Boundary angle of G(e^{i beta}) for real a, omega = 0."""
    w = np.exp(1j * beta)
    return float(np.angle((w + a) / (1 + a * w)))


def fit_mobius_one_sided(beta: float, n: int, tol: float = 1e-13) -> MobiusMap:
    """Map whose inverse sends the arc |tau| <= beta onto the boundary minus one gap.

    The endpoints e^{+-i beta} go to the equidistant angles +-pi (n - 1) / n,
    so the inaccessible arc lands between theta_{(n+1)/2} and theta_{(n+3)/2}
    (the gap antipodal to the arc center).  By symmetry a is real and omega
    is 0; a is found by bisection on the monotone endpoint condition and
    polished by secant steps.  beta = pi returns the identity.
    """
    if n < 3 or n % 2 == 0:
        raise ArgumentError("n must be odd and >= 3")
    if beta == np.pi:
        return MobiusMap(0j, 0.0)
    if not (0.0 < beta < np.pi):
        raise ArgumentError("arc half-width beta must be in (0, pi)")
    target = np.pi * (n - 1) / n
    res = lambda a: _endpoint_angle(a, beta) - target
    lo, hi = -1.0 + 1e-15, 1.0 - 1e-15
    sign_lo = np.sign(res(lo))
    if sign_lo == np.sign(res(hi)):
        raise ArgumentError(f"no Moebius parameter in (-1, 1) fits beta={beta}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sign(res(mid)) == sign_lo:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    a0, a1 = lo, hi
    r0, r1 = res(a0), res(a1)
    for _ in range(5):
        if r1 == r0 or abs(r1) < tol * 1e-3:
            break
        a0, a1, r0 = a1, a1 - r1 * (a1 - a0) / (r1 - r0), r1
        r1 = res(a1)
    a = a1 if abs(r1) <= abs(r0) else a0
    if abs(res(a)) > tol:
        raise ArgumentError(f"endpoint condition not met to {tol:g} (residual {abs(res(a)):.3g})")
    return MobiusMap(complex(a, 0.0), 0.0)


@dataclass(frozen=True)
class BoundaryCorrespondence:
    theta: np.ndarray
    tau: np.ndarray
    beta: float

    def to_csv(self) -> str:
        lines = ["k,theta_k,tau_k"]
        lines += [f"{k + 1},{t:.17g},{u:.17g}" for k, (t, u) in enumerate(zip(self.theta, self.tau))]
        return "\n".join(lines) + "\n"


def boundary_correspondence(mobius: MobiusMap, n: int, beta: float) -> BoundaryCorrespondence:
    """Equidistant angles theta_k and their images tau_k = F(theta_k) on the arc."""
    theta = 2 * np.pi * np.arange(n) / n
    tau = (mobius.forward_angle(theta) + np.pi) % (2 * np.pi) - np.pi
    return BoundaryCorrespondence(theta, tau, beta)


def pull_back_electrodes(electrodes: ElectrodeSet, mobius: MobiusMap) -> ElectrodeSet:
    """Electrodes chi_q o G on the original boundary.

    Supports are the F-images of the target boxes and heights are kept, so
    measuring the original conductivity with these electrodes equals
    measuring the pushed-forward conductivity with the target electrodes.
    """
    s = mobius.forward_angle(electrodes.starts)
    e = mobius.forward_angle(electrodes.ends)
    e = s + (e - s) % (2 * np.pi)
    c = mobius.forward_angle(electrodes.centers)
    meta = dict(electrodes.meta, pulled_back=json.loads(mobius.to_json()))
    return ElectrodeSet(c, s, e, electrodes.heights, meta)


def push_forward_conductivity(sigma: ConductivityField, mobius: MobiusMap) -> ConductivityField:
    """Pushed-forward conductivity sigma o F on the target disk (isotropy is kept)."""

    def func(r, theta):
        w = r * np.exp(1j * theta)
        z = mobius.forward(np.where(np.abs(w) > 1, w / np.abs(w), w))
        return sigma(np.minimum(np.abs(z), 1.0), np.angle(z))

    return ConductivityField(func, f"{sigma.name}|pushed")


def pull_back_reconstruction(field, mobius: MobiusMap, points=None):
    """Carry a target-disk reconstruction back to the original disk.

    ``field`` is a callable f(x, y) on the target disk; the result evaluates
    f(G(z)).  With ``points`` (complex target grid points) the mapped points
    F(points) are returned as well.
    """

    def pulled(x, y):
        z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        w = mobius.inverse(z)
        return field(w.real, w.imag)

    if points is None:
        return pulled
    return pulled, mobius.forward(np.asarray(points, dtype=complex))
