"""Staggered polar grids and optimal grids.

A staggered grid on the unit disk has primary radii (where potentials live)
interlaced with dual radii (where fluxes are balanced), and uniformly spaced
primary angles interlaced with dual angles.  Grid steps are measured in the
logarithmic coordinates

    z(r) = int_r^1 dt / (t sigma(t)),    zhat(r) = int_r^1 sigma(t) / t dt,

so for sigma = 1 both reduce to -log r.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ArgumentError, DomainError

__all__ = [
    "GridSteps",
    "StaggeredGrid",
    "layer_count",
    "coordinate_z",
    "coordinate_zhat",
    "radii_from_steps",
    "steps_from_radii",
    "make_grid",
    "check_interlacing",
    "optimal_grid_interpolation",
    "optimal_grid_electrodes",
    "truncated_measure_grid",
]


@dataclass(frozen=True)
class GridSteps:
    """Primary steps ``alpha`` and dual steps ``alpha_hat`` of a layered grid.

    Both arrays have length ``l``.  For ``hbar = 0`` the first dual step has no
    role (the boundary layer carries no dual half cell) and is stored as 0.
    """

    alpha: np.ndarray
    alpha_hat: np.ndarray
    hbar: int = 1

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).copy()
        ah = np.asarray(self.alpha_hat, dtype=float).copy()
        if a.ndim != 1 or ah.shape != a.shape or a.size == 0:
            raise ArgumentError("alpha and alpha_hat must be 1-D arrays of equal positive length")
        if self.hbar not in (0, 1):
            raise ArgumentError("hbar must be 0 or 1")
        if self.hbar == 0:
            ah[0] = 0.0
        a.setflags(write=False)
        ah.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "alpha_hat", ah)

    @property
    def l(self) -> int:
        return int(self.alpha.size)

    @property
    def active_alpha_hat(self) -> np.ndarray:
        """Dual steps that carry information (all of them unless hbar = 0)."""
        return self.alpha_hat if self.hbar == 1 else self.alpha_hat[1:]

    def is_positive(self) -> bool:
        return bool(np.all(self.alpha > 0) and np.all(self.active_alpha_hat > 0))

    def coefficients(self) -> np.ndarray:
        """Continued fraction coefficients in nesting order.

        ``hbar = 1``: (ah_1, a_1, ah_2, a_2, ..., ah_l, a_l).
        ``hbar = 0``: (a_1, ah_2, a_2, ..., ah_l, a_l).
        """
        kappa = np.empty(2 * self.l)
        kappa[0::2] = self.alpha_hat
        kappa[1::2] = self.alpha
        return kappa if self.hbar == 1 else kappa[1:]

    @classmethod
    def from_coefficients(cls, kappa, hbar: int = 1) -> "GridSteps":
        kappa = np.asarray(kappa, dtype=float)
        if hbar == 0:
            kappa = np.concatenate([[0.0], kappa])
        if kappa.size % 2:
            raise ArgumentError("coefficient count incompatible with hbar")
        return cls(alpha=kappa[1::2], alpha_hat=kappa[0::2], hbar=hbar)

    def to_dict(self) -> dict:
        return {"hbar": self.hbar, "alpha": self.alpha.tolist(), "alpha_hat": self.alpha_hat.tolist()}


@dataclass(frozen=True)
class StaggeredGrid:
    """Tensor-product staggered grid on the unit disk."""

    n: int
    l: int
    hbar: int
    primary_radii: np.ndarray
    dual_radii: np.ndarray
    steps: GridSteps | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("primary_radii", "dual_radii"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.primary_radii.size != self.l + 1:
            raise ArgumentError("primary_radii must have length l + 1")
        if self.dual_radii.size != self.l + self.hbar:
            raise ArgumentError("dual_radii must have length l + hbar")

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.n

    @property
    def primary_angles(self) -> np.ndarray:
        return self.h * np.arange(self.n)

    @property
    def dual_angles(self) -> np.ndarray:
        return self.h * (np.arange(self.n) + 0.5)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "l": self.l,
                "hbar": self.hbar,
                "primary_radii": self.primary_radii.tolist(),
                "dual_radii": self.dual_radii.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "StaggeredGrid":
        d = json.loads(text)
        grid = cls(d["n"], d["l"], d["hbar"], d["primary_radii"], d["dual_radii"])
        check_interlacing(grid.primary_radii, grid.dual_radii, grid.hbar)
        return grid

    def to_csv(self) -> str:
        """Rows (index, r, rhat); the missing dual radius of an hbar=0 grid is blank."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "r", "r_hat"])
        for j in range(self.l + 1):
            rh = repr(float(self.dual_radii[j])) if j < self.dual_radii.size else ""
            w.writerow([j + 1, repr(float(self.primary_radii[j])), rh])
        return buf.getvalue()


def layer_count(n: int, hbar: int) -> int:
    """Number of layers l with 2 l + hbar - 1 = (n - 1) / 2."""
    if n < 3 or n % 2 == 0:
        raise ArgumentError(f"n must be odd and >= 3, got {n}")
    if hbar not in (0, 1):
        raise ArgumentError("hbar must be 0 or 1")
    twice_l = (n - 1) // 2 + 1 - hbar
    if twice_l % 2 or twice_l < 2:
        raise ArgumentError(f"no integer layer count for n={n}, hbar={hbar}")
    return twice_l // 2


def _check_sigma_value(s):
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise DomainError("conductivity must be positive and finite")
    return s


def _coordinate(r: float, integrand) -> float:
    r = float(r)
    if not (0.0 < r <= 1.0):
        raise DomainError(f"radius must lie in (0, 1], got {r}")
    if r == 1.0:
        return 0.0
    # integrate in t = -log r where the integrands are smooth and bounded
    val, _ = integrate.quad(lambda t: integrand(np.exp(-t)), 0.0, -np.log(r),
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return float(val)


def coordinate_z(r: float, sigma=None) -> float:
    """z(r) = int_r^1 dt / (t sigma(t)); ``sigma`` is a callable of r (default 1)."""
    if sigma is None:
        return _coordinate(r, lambda x: 1.0)
    return _coordinate(r, lambda x: 1.0 / _check_sigma_value(sigma(x)))


def coordinate_zhat(r: float, sigma=None) -> float:
    """zhat(r) = int_r^1 sigma(t) / t dt; ``sigma`` is a callable of r (default 1)."""
    if sigma is None:
        return _coordinate(r, lambda x: 1.0)
    return _coordinate(r, lambda x: _check_sigma_value(sigma(x)))


def radii_from_steps(steps: GridSteps) -> tuple[np.ndarray, np.ndarray]:
    """Radii for the reference conductivity: r_{j+1} = exp(-sum_{q<=j} alpha_q).

    The dual radii follow the same rule with the dual steps.  For ``hbar = 0``
    the boundary layer has no dual half cell, so the dual radii are
    1, exp(-ah_2), exp(-ah_2 - ah_3), ... (length l).
    """
    primary = np.exp(-np.concatenate([[0.0], np.cumsum(steps.alpha)]))
    if steps.hbar == 1:
        dual = np.exp(-np.concatenate([[0.0], np.cumsum(steps.alpha_hat)]))
    else:
        dual = np.exp(-np.cumsum(steps.alpha_hat))
    return primary, dual


def steps_from_radii(primary, dual, hbar: int = 1) -> GridSteps:
    """Inverse of :func:`radii_from_steps` for the reference conductivity."""
    primary = np.asarray(primary, dtype=float)
    dual = np.asarray(dual, dtype=float)
    alpha = -np.diff(np.log(primary))
    if hbar == 1:
        alpha_hat = -np.diff(np.log(dual))
    else:
        alpha_hat = np.concatenate([[0.0], -np.diff(np.log(dual))])
    return GridSteps(alpha, alpha_hat, hbar)


def check_interlacing(primary, dual, hbar: int) -> None:
    """Raise ArgumentError unless the radii interlace strictly.

    hbar = 0:  1 = r_1 = rh_1 > r_2 > rh_2 > ... > r_l > rh_l > r_{l+1}
    hbar = 1:  1 = rh_1 = r_1 > rh_2 > r_2 > ... > rh_{l+1} > r_{l+1}
    """
    primary = np.asarray(primary, dtype=float)
    dual = np.asarray(dual, dtype=float)
    l = primary.size - 1
    if primary[0] != 1.0 or dual[0] != 1.0:
        raise ArgumentError("outermost radii must equal 1")
    if hbar == 1:
        if dual.size != l + 1:
            raise ArgumentError("hbar = 1 grids need l + 1 dual radii")
        body = np.column_stack([dual[1:], primary[1:]]).ravel()
    else:
        if dual.size != l:
            raise ArgumentError("hbar = 0 grids need l dual radii")
        body = np.concatenate([np.column_stack([primary[1:l], dual[1:l]]).ravel(), [primary[l]]])
    seq = np.concatenate([[1.0], body])
    if seq[-1] < 0 or np.any(np.diff(seq) >= 0):
        raise ArgumentError("radii are not strictly interlaced")


def make_grid(n: int, steps: GridSteps) -> StaggeredGrid:
    """Grid with n angular lines whose radii come from ``steps`` (reference convention)."""
    primary, dual = radii_from_steps(steps)
    check_interlacing(primary, dual, steps.hbar)
    return StaggeredGrid(n, steps.l, steps.hbar, primary, dual, steps)


def _closed_form_steps(n: int, l: int) -> GridSteps:
    h = 2.0 * np.pi / n
    j = np.arange(1, l + 1)
    alpha = h / np.tan(h * (2 * l - 2 * j + 1) / 2.0)
    alpha_hat = h / np.tan(h * (2 * l - 2 * j + 2) / 2.0)
    return GridSteps(alpha, alpha_hat, 1)


def optimal_grid_interpolation(n: int, hbar: int = 1, method: str = "auto", dps: int = 50) -> GridSteps:
    """Steps of the optimal grid for lumped-current data of sigma = 1.

    The grid matches F(w_k^2) = w_k at w_k = 2 sin(k h / 2) / h, k = 1..(n-1)/2.
    ``method="closed"`` uses the cotangent formulas (hbar = 1 only);
    ``method="rational"`` runs rational interpolation and Euclidean division in
    ``dps``-digit arithmetic.  ``"auto"`` picks the closed form when available.
    """
    l = layer_count(n, hbar)
    if method == "auto":
        method = "closed" if hbar == 1 else "rational"
    if method == "closed":
        if hbar != 1:
            raise ArgumentError("closed form available for hbar = 1 only")
        return _closed_form_steps(n, l)
    if method != "rational":
        raise ArgumentError(f"unknown method {method!r}")
    from . import spectral

    x, F = spectral.lumped_reference_samples(n, dps=dps)
    return spectral.steps_from_samples(x, F, hbar=hbar, dps=dps)


def optimal_grid_electrodes(n: int, hbar: int = 1, width: float = 1.0, dps: int = 50) -> GridSteps:
    """Optimal grid for box-electrode data of sigma = 1.

    Matches F(w_k^2) = |k| sinc^2(k w h / 2) at the nodes w_k, where ``width``
    is the electrode width as a fraction w of the angular spacing h.
    """
    layer_count(n, hbar)
    from . import spectral

    x, F = spectral.electrode_reference_samples(n, width=width, dps=dps)
    return spectral.steps_from_samples(x, F, hbar=hbar, dps=dps)


def truncated_measure_grid(l: int) -> GridSteps:
    """Steps that reproduce the reference spectral data xi = 2, delta = pi (j - 1/2)."""
    if l < 1:
        raise ArgumentError("l must be >= 1")
    from . import spectral

    return spectral.lanczos_from_spectral(spectral.reference_spectral_data(l))
