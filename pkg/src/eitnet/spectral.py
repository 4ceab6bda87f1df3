"""Layered media: eigenvalue functions, continued fractions and inverse spectral solvers.

For a layered conductivity sigma(r) the Fourier modes of the boundary
potential decouple.  Mode k has DtN eigenvalue sigma(1) f(k^2) where
f(k^2) = v_r(1) / v(1) for the radial solution regular at the center.  A
layered network with grid steps (alpha, alpha_hat) has the rational analogue
F(lambda) = 1 / Fdag(lambda) with

    Fdag(lambda) = 1 / (hbar ah_1 lambda + 1 / (a_1 + 1 / (ah_2 lambda + ... + 1 / (ah_l lambda + 1 / a_l)))).

This module evaluates these functions and inverts them: rational
interpolation of samples followed by Euclidean division, and a Lanczos solver
for the inverse eigenvalue problem with spectral data (delta_j, xi_j).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import linalg

from .errors import (
    AccuracyError,
    ArgumentError,
    BreakdownError,
    DomainError,
    IllConditionedError,
    InconsistentDataError,
)
from .grids import GridSteps, layer_count, truncated_measure_grid

__all__ = [
    "SpectralData",
    "LayeredConductivity",
    "LayeredReconstruction",
    "RationalCoefficients",
    "reference_spectral_data",
    "eigenvalue_f",
    "continued_fraction_eval",
    "dtn_function",
    "jacobi_matrix",
    "partial_fractions",
    "lanczos_from_spectral",
    "rational_interp_coeffs",
    "split_numerator_denominator",
    "euclidean_division",
    "steps_from_samples",
    "lumped_reference_samples",
    "electrode_reference_samples",
    "spectral_data_of",
    "reconstruct_layered",
    "estimate_mean_potential",
    "mean_potential_conductivity",
    "mean_potential_spectral_data",
]


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class SpectralData:
    """Truncated spectral measure: eigenvalue roots delta_j and weights xi_j."""

    delta: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta, dtype=float).copy()
        x = np.asarray(self.xi, dtype=float).copy()
        if d.ndim != 1 or d.shape != x.shape or d.size == 0:
            raise ArgumentError("delta and xi must be 1-D arrays of equal positive length")
        if np.any(d <= 0) or np.any(x <= 0):
            raise InconsistentDataError("spectral data must be positive")
        if np.any(np.diff(d) <= 0):
            raise InconsistentDataError("delta must be strictly increasing")
        d.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "xi", x)

    @property
    def l(self) -> int:
        return int(self.delta.size)

    def to_json(self) -> str:
        return json.dumps([{"delta": float(d), "xi": float(x)} for d, x in zip(self.delta, self.xi)], indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SpectralData":
        rows = json.loads(text)
        return cls([r["delta"] for r in rows], [r["xi"] for r in rows])


class LayeredConductivity:
    """Radially layered conductivity given as a function of r or of the scaled depth zeta.

    ``coord="r"`` means ``func`` takes radii in (0, 1]; ``coord="zeta"`` means
    it takes the scaled logarithmic depth zeta in [0, 1] with r = exp(-Z zeta).
    """

    def __init__(self, func, coord: str = "r", name: str | None = None):
        if coord not in ("r", "zeta"):
            raise ArgumentError("coord must be 'r' or 'zeta'")
        self._func = func
        self.coord = coord
        self.name = name or "layered"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s = np.asarray(self._func(x), dtype=float)
        s = np.broadcast_to(s, x.shape).copy() if s.shape != x.shape else s
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise DomainError(f"conductivity {self.name} is not positive")
        return s

    @classmethod
    def constant(cls, value: float = 1.0, coord: str = "r") -> "LayeredConductivity":
        if value <= 0:
            raise DomainError("constant conductivity must be positive")
        return cls(lambda x: np.full(np.shape(x), float(value)), coord, name=f"const{value:g}")

    @classmethod
    def piecewise(cls, breaks, values, coord: str = "zeta") -> "LayeredConductivity":
        """Value i on [breaks[i], breaks[i+1]); the last value extends to infinity."""
        breaks = np.asarray(breaks, dtype=float)
        values = np.asarray(values, dtype=float)
        if breaks.shape != values.shape or np.any(np.diff(breaks) < 0):
            raise ArgumentError("breaks must be sorted and match values")

        def func(x):
            idx = np.searchsorted(breaks, x, side="right") - 1
            return values[np.clip(idx, 0, values.size - 1)]

        obj = cls(func, coord, name="piecewise")
        obj.breaks = breaks
        obj.values = values
        return obj

    def as_zeta(self, eps: float | None) -> "LayeredConductivity":
        """Same conductivity expressed in zeta, with truncation radius ``eps``."""
        if self.coord == "zeta":
            return self
        if eps is None or not (0.0 < eps < 1.0):
            raise ArgumentError("a truncation radius eps in (0, 1) is required")
        Z = -np.log(eps)
        return LayeredConductivity(lambda z: self(np.exp(-Z * np.asarray(z))), "zeta", self.name)

    def as_radius(self, eps: float | None) -> "LayeredConductivity":
        if self.coord == "r":
            return self
        if eps is None or not (0.0 < eps < 1.0):
            raise ArgumentError("a truncation radius eps in (0, 1) is required")
        Z = -np.log(eps)
        return LayeredConductivity(
            lambda r: self(np.clip(-np.log(np.maximum(r, 1e-300)) / Z, 0.0, 1.0)), "r", self.name
        )


def _as_layered(sigma, coord="r") -> LayeredConductivity:
    if sigma is None:
        return LayeredConductivity.constant(1.0, coord)
    if isinstance(sigma, LayeredConductivity):
        return sigma
    if np.isscalar(sigma):
        return LayeredConductivity.constant(float(sigma), coord)
    return LayeredConductivity(sigma, coord)


def reference_spectral_data(l: int) -> SpectralData:
    """Spectral data of sigma = 1: xi_j = 2, delta_j = pi (j - 1/2)."""
    j = np.arange(1, l + 1)
    return SpectralData(np.pi * (j - 0.5), np.full(l, 2.0))


# ---------------------------------------------------------------------------
# eigenvalue function of the continuum layered problem


def _radial_flux_fd(sig_t, k: int, T: float, cells: int) -> float:
    """-v_t(0)/v(0) for (sig v_t)_t = k^2 sig v on [0, T], v(T) = 0, with sig(0) factored out."""
    t = np.linspace(0.0, T, cells + 1)
    dt = T / cells
    s_node = sig_t(t)
    s_half = sig_t(t[:-1] + 0.5 * dt)
    k2 = float(k) ** 2
    # unknowns v_1 .. v_{N-1}; v_0 = 1, v_N = 0
    lower = s_half[1:-1] / dt
    upper = s_half[1:-1] / dt
    diag = -(s_half[:-1] + s_half[1:]) / dt - k2 * s_node[1:-1] * dt
    rhs = np.zeros(cells - 1)
    rhs[0] = -s_half[0] / dt
    ab = np.zeros((3, cells - 1))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    v = linalg.solve_banded((1, 1), ab, rhs)
    flux = s_half[0] * (v[0] - 1.0) / dt - 0.5 * dt * k2 * s_node[0]
    return -flux / s_node[0]


def eigenvalue_f(sigma, k: int, cells: int = 20000, depth: float = 18.0) -> float:
    """f(k^2) = v_r(1) / v(1) for the layered radial equation.

    Solved in t = -log r, where the equation reads (sigma v_t)_t = k^2 sigma v,
    with v(0) = 1 and v = 0 at depth t = depth / |k| (the decaying solution has
    fallen by exp(-depth) there).  Second-order finite differences on ``cells``
    and ``2 cells`` cells are combined by Richardson extrapolation.  The DtN
    eigenvalue of the mode is sigma(1) f(k^2).
    """
    k = int(k)
    if k == 0:
        return 0.0
    sig = _as_layered(sigma, "r")
    if sig.coord != "r":
        raise ArgumentError("eigenvalue_f needs sigma as a function of r")
    T = depth / abs(k)

    def sig_t(t):
        return sig(np.exp(-t))

    f1 = _radial_flux_fd(sig_t, k, T, cells)
    f2 = _radial_flux_fd(sig_t, k, T, 2 * cells)
    return float((4.0 * f2 - f1) / 3.0)


# ---------------------------------------------------------------------------
# continued fractions and the Jacobi matrix


def continued_fraction_eval(steps: GridSteps, lam):
    """Evaluate Fdag(lambda) by backward recursion from the innermost layer.

    ``lam`` may be a scalar or an array; real input off the cut gives real output.
    """
    lam_arr = np.asarray(lam, dtype=complex)
    if np.any((lam_arr.imag == 0.0) & (lam_arr.real <= 0.0)):
        raise DomainError("lambda must lie off the cut (-inf, 0]")
    a, ah = steps.alpha, steps.alpha_hat
    l = steps.l
    g = np.full(lam_arr.shape, complex(a[l - 1]))
    gh = np.zeros(lam_arr.shape, dtype=complex)
    for j in range(l - 1, -1, -1):
        weight = steps.hbar if j == 0 else 1
        gh = weight * ah[j] * lam_arr + 1.0 / g
        if j > 0:
            g = a[j - 1] + 1.0 / gh
    val = 1.0 / gh
    if np.isrealobj(lam) or np.all(lam_arr.imag == 0.0):
        val = val.real
    return val[()] if val.ndim == 0 else val


def dtn_function(steps: GridSteps, lam):
    """F(lambda) = 1 / Fdag(lambda)."""
    return 1.0 / continued_fraction_eval(steps, lam)


def jacobi_matrix(steps: GridSteps) -> np.ndarray:
    """Tridiagonal matrix A whose resolvent gives Fdag (hbar = 1 grids).

    Row 1: [-1/(ah_1 a_1), 1/(ah_1 a_1)].  Row i > 1: sub-diagonal
    1/(ah_i a_{i-1}), diagonal -(1/a_i + 1/a_{i-1})/ah_i, super-diagonal
    1/(ah_i a_i).  Fdag(lambda) = e_1^T (lambda - A)^{-1} e_1 / ah_1.
    """
    if steps.hbar != 1:
        raise ArgumentError("the Jacobi matrix form requires hbar = 1")
    a, ah = steps.alpha, steps.alpha_hat
    l = steps.l
    A = np.zeros((l, l))
    for i in range(l):
        right = 1.0 / (ah[i] * a[i])
        left = 1.0 / (ah[i] * a[i - 1]) if i > 0 else 0.0
        A[i, i] = -(right + left)
        if i > 0:
            A[i, i - 1] = left
        if i + 1 < l:
            A[i, i + 1] = right
    return A


def partial_fractions(steps: GridSteps) -> SpectralData:
    """Spectral data with Fdag(lambda) = sum_j xi_j / (lambda + delta_j^2).

    Uses the symmetrized matrix D^{1/2} A D^{-1/2}, D = diag(ah); with
    orthonormal eigenvectors q_j the weights are xi_j = q_{1j}^2 / ah_1.
    Weights that underflow to zero are floored at the smallest positive float.
    """
    A = jacobi_matrix(steps)
    d = np.sqrt(steps.alpha_hat)
    S = (d[:, None] * A) / d[None, :]
    S = 0.5 * (S + S.T)
    evals, evecs = np.linalg.eigh(-S)
    xi = np.maximum(evecs[0, :] ** 2 / steps.alpha_hat[0], np.finfo(float).tiny)
    return SpectralData(np.sqrt(evals), xi)


def lanczos_from_spectral(data: SpectralData) -> GridSteps:
    """Grid steps whose Jacobi matrix has the given spectral data.

    The Lanczos recursion on diag(delta^2) started at the unit vector
    proportional to sqrt(xi) yields the diagonal a_j and off-diagonal b_j of the
    symmetrized (negated) Jacobi matrix.  Steps follow from

        ah_1 = 1 / sum(xi),  a_1 = 1 / (ah_1 a_1_diag),
        ah_{j+1} = 1 / (b_j^2 a_j^2 ah_j),  1/a_{j+1} = a_{j+1}_diag ah_{j+1} - 1/a_j.
    """
    lam = data.delta ** 2
    xi = data.xi
    l = data.l
    W = np.zeros((l, l))
    w = np.sqrt(xi / xi.sum())
    diag = np.zeros(l)
    off = np.zeros(max(l - 1, 0))
    W[0] = w
    for j in range(l):
        u = lam * W[j]
        diag[j] = W[j] @ u
        if j == l - 1:
            break
        u = u - diag[j] * W[j] - (off[j - 1] * W[j - 1] if j > 0 else 0.0)
        # full reorthogonalization against all previous Lanczos vectors
        for _ in range(2):
            u = u - W[: j + 1].T @ (W[: j + 1] @ u)
        b = np.linalg.norm(u)
        if not b > 1e-300:
            raise BreakdownError(f"Lanczos breakdown at step {j + 1}", index=j + 1)
        off[j] = b
        W[j + 1] = u / b

    ah = np.zeros(l)
    a = np.zeros(l)
    ah[0] = 1.0 / xi.sum()
    a[0] = 1.0 / (ah[0] * diag[0])
    for j in range(1, l):
        ah[j] = 1.0 / (off[j - 1] ** 2 * a[j - 1] ** 2 * ah[j - 1])
        inv = diag[j] * ah[j] - 1.0 / a[j - 1]
        if not inv > 0:
            raise BreakdownError(f"non-positive primary step at index {j + 1}", index=j + 1)
        a[j] = 1.0 / inv
    if np.any(ah <= 0) or np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise BreakdownError("non-positive grid step")
    return GridSteps(a, ah, 1)


# ---------------------------------------------------------------------------
# rational interpolation and Euclidean division


@dataclass(frozen=True)
class RationalCoefficients:
    """Coefficients c_0..c_N (ascending powers) of K(x) = P(x)/Q(x), c_0 = -1.

    P collects the powers with the parity of N, Q the others.  Entries are
    floats, or mpmath numbers when the solve ran in extended precision.
    """

    c: tuple
    condition: float
    order: int


def _row_entries(x, D, N):
    # P(x) - D Q(x) = 0 with c_0 = -1 moved to the right-hand side
    row = []
    for j in range(1, N + 1):
        row.append(x ** j if (j - N) % 2 == 0 else -D * x ** j)
    rhs = 1 if N % 2 == 0 else -D
    return row, rhs


def rational_interp_coeffs(x, D, order: int | None = None, dps: int | None = None,
                           max_condition: float = 1e13) -> RationalCoefficients:
    """Solve the Vandermonde-like system for the ratio P/Q interpolating D at x.

    ``order`` N defaults to len(x) (2 l for hbar = 1 data).  Columns are
    scaled to unit norm and the system solved by QR.  In double precision the
    solve is refused above ``max_condition``; pass ``dps`` to solve with
    mpmath at that many digits instead.
    """
    N = len(x) if order is None else int(order)
    if len(x) != N or len(D) != N:
        raise ArgumentError("need exactly N samples for an order-N ratio")
    xf = np.array([float(v) for v in x])
    if np.any(xf <= 0) or np.unique(xf).size != N:
        raise ArgumentError("nodes must be distinct and positive")
    Df = np.array([float(v) for v in D])
    Af = np.empty((N, N))
    bf = np.empty(N)
    for k in range(N):
        row, rhs = _row_entries(xf[k], Df[k], N)
        Af[k] = row
        bf[k] = rhs
    scale = np.linalg.norm(Af, axis=0)
    cond = float(np.linalg.cond(Af / scale))

    if dps is None:
        if not np.isfinite(cond) or cond > max_condition:
            raise IllConditionedError(f"Vandermonde system condition {cond:.3e}", condition=cond)
        Q, R = np.linalg.qr(Af / scale)
        y = linalg.solve_triangular(R, Q.T @ bf)
        c = (-1.0,) + tuple(float(v) for v in y / scale)
        return RationalCoefficients(c, cond, N)

    with mpmath.workdps(dps):
        xm = [mpmath.mpf(v) for v in x]
        Dm = [mpmath.mpf(v) for v in D]
        A = mpmath.matrix(N, N)
        b = mpmath.matrix(N, 1)
        for k in range(N):
            row, rhs = _row_entries(xm[k], Dm[k], N)
            for j in range(N):
                A[k, j] = row[j]
            b[k] = rhs
        colnorm = [mpmath.sqrt(mpmath.fsum(A[i, j] ** 2 for i in range(N))) for j in range(N)]
        for j in range(N):
            for i in range(N):
                A[i, j] /= colnorm[j]
        y, _ = mpmath.qr_solve(A, b)
        c = (mpmath.mpf(-1),) + tuple(y[j] / colnorm[j] for j in range(N))
    return RationalCoefficients(c, cond, N)


def split_numerator_denominator(coeffs: RationalCoefficients):
    """Ascending coefficient lists (P, Q) of numerator degree N and denominator degree N - 1."""
    N = coeffs.order
    zero = coeffs.c[0] * 0
    P = [cj if (j - N) % 2 == 0 else zero for j, cj in enumerate(coeffs.c)]
    Q = [cj if (j - N) % 2 != 0 else zero for j, cj in enumerate(coeffs.c[:N])]
    return P, Q


def euclidean_division(P, Q, dps: int | None = None) -> np.ndarray:
    """Continued fraction coefficients of K = P/Q = k_1 x + 1/(k_2 x + 1/(... + 1/(k_N x))).

    ``P`` and ``Q`` are ascending coefficient sequences of degrees N and N - 1
    with alternating parity.  Each division step removes the leading term,
    k = lead(P)/lead(Q), and continues with (Q, P - k x Q).
    """
    N = len(P) - 1
    if len(Q) != N or N < 1:
        raise ArgumentError("P must have degree N and Q degree N - 1")

    def body():
        p = [P[N - 2 * i] for i in range(N // 2 + 1)]
        q = [Q[N - 1 - 2 * i] for i in range(N // 2 + (N % 2))]
        kappa = []
        for step in range(N):
            if q[0] == 0:
                raise InconsistentDataError(f"zero leading coefficient at step {step + 1}", index=step + 1)
            k = p[0] / q[0]
            if not k > 0:
                raise InconsistentDataError(
                    f"non-positive continued fraction coefficient at index {step + 1}", index=step + 1
                )
            kappa.append(k)
            r = [p[i + 1] - k * (q[i + 1] if i + 1 < len(q) else 0) for i in range(len(p) - 1)]
            p, q = q, r
        return kappa

    if dps is not None:
        with mpmath.workdps(dps):
            kappa = body()
    else:
        kappa = body()
    return np.array([float(k) for k in kappa])


def steps_from_samples(x, F, hbar: int = 1, dps: int | None = None) -> GridSteps:
    """Grid steps of the layered network whose F interpolates samples F(x_k^2).

    hbar = 1: F(x^2)/x has coefficients (ah_1, a_1, ..., ah_l, a_l).
    hbar = 0: x/F(x^2) has coefficients (a_1, ah_2, a_2, ..., ah_l, a_l).
    """
    N = len(x)
    if hbar == 1 and N % 2:
        raise ArgumentError("hbar = 1 needs an even number of samples")
    if hbar == 0 and N % 2 == 0:
        raise ArgumentError("hbar = 0 needs an odd number of samples")
    if dps is None:
        D = [float(F[k]) / float(x[k]) if hbar == 1 else float(x[k]) / float(F[k]) for k in range(N)]
    else:
        with mpmath.workdps(dps):
            D = [mpmath.mpf(F[k]) / mpmath.mpf(x[k]) if hbar == 1 else mpmath.mpf(x[k]) / mpmath.mpf(F[k])
                 for k in range(N)]
    coeffs = rational_interp_coeffs(x, D, order=N, dps=dps)
    P, Q = split_numerator_denominator(coeffs)
    kappa = euclidean_division(P, Q, dps=dps)
    return GridSteps.from_coefficients(kappa, hbar)


def _omega(k, n, dps):
    if dps is None:
        h = 2.0 * np.pi / n
        return 2.0 * np.sin(k * h / 2.0) / h
    with mpmath.workdps(dps):
        h = 2 * mpmath.pi / n
        return 2 * mpmath.sin(k * h / 2) / h


def lumped_reference_samples(n: int, dps: int | None = None):
    """Nodes w_k and values F(w_k^2) = w_k of lumped-current data for sigma = 1."""
    m = (n - 1) // 2
    x = [_omega(k, n, dps) for k in range(1, m + 1)]
    return x, list(x)


def electrode_reference_samples(n: int, width: float = 1.0, dps: int | None = None):
    """Nodes w_k and values |k| sinc^2(k w h / 2) of box-electrode data for sigma = 1."""
    m = (n - 1) // 2
    x = [_omega(k, n, dps) for k in range(1, m + 1)]
    if dps is None:
        h = 2.0 * np.pi / n
        F = [k * np.sinc(k * width * h / 2.0 / np.pi) ** 2 for k in range(1, m + 1)]
    else:
        with mpmath.workdps(dps):
            h = 2 * mpmath.pi / n
            F = [k * mpmath.sinc(k * mpmath.mpf(width) * h / 2) ** 2 for k in range(1, m + 1)]
    return x, F


# ---------------------------------------------------------------------------
# spectral data of the continuum problem


def _fd_spectrum(sig_z, l: int, cells: int):
    z = np.linspace(0.0, 1.0, cells + 1)
    dz = 1.0 / cells
    s_half = sig_z(z[:-1] + 0.5 * dz)
    s_node = sig_z(z[:-1])
    mass = s_node * dz
    mass[0] *= 0.5
    # stiffness of -(sigma v')' with Neumann at 0 and v = 0 at the last node
    kd = np.empty(cells)
    kd[0] = s_half[0] / dz
    kd[1:] = (s_half[:-1] + s_half[1:]) / dz
    ko = -s_half[:-1] / dz
    sm = np.sqrt(mass)
    d = kd / mass
    e = ko / (sm[:-1] * sm[1:])
    _, evecs = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, l - 1))
    # The dense solver is accurate only to eps * ||K||, far too coarse for the
    # low modes.  Rayleigh quotients written as sums of positive terms and one
    # inverse iteration restore full relative accuracy.
    evals = np.empty(l)
    xi = np.empty(l)
    for j in range(l):
        y = evecs[:, j] / sm
        for _ in range(2):
            mu = _rayleigh(y, s_half, mass, dz)
            ab = np.zeros((3, cells))
            ab[0, 1:] = ko
            ab[1] = kd - mu * mass
            ab[2, :-1] = ko
            y = linalg.solve_banded((1, 1), ab, mass * y)
            y /= np.sqrt(np.sum(mass * y * y))
        evals[j] = _rayleigh(y, s_half, mass, dz)
        xi[j] = y[0] ** 2
    return evals, xi


def _rayleigh(y, s_half, mass, dz):
    dy = np.diff(np.append(y, 0.0))
    return np.sum(s_half * dy * dy) / dz / np.sum(mass * y * y)


def spectral_data_of(sigma, l: int, eps: float | None = None, cells: int = 20000,
                     rtol: float = 1e-5) -> SpectralData:
    """First l eigenpairs of (sigma v')' = -delta^2 sigma v on zeta in (0, 1).

    Neumann at zeta = 0, Dirichlet at zeta = 1; eigenfunctions are normalized
    by int y^2 sigma dzeta = 1 and xi_j = y_j(0)^2.  ``sigma`` is a function of
    zeta, or a LayeredConductivity in r together with the truncation radius
    ``eps``.  Second-order finite differences on ``cells`` and ``2 cells``
    cells, Richardson extrapolated; the estimated error must stay below ``rtol``.
    """
    if cells < 20000:
        raise ArgumentError("at least 20000 cells are required")
    sig = _as_layered(sigma, "zeta")
    if sig.coord == "r":
        sig = sig.as_zeta(eps)
    lam1, xi1 = _fd_spectrum(sig, l, cells)
    lam2, xi2 = _fd_spectrum(sig, l, 2 * cells)
    lam = (4.0 * lam2 - lam1) / 3.0
    xi = (4.0 * xi2 - xi1) / 3.0
    err = max(np.max(np.abs(lam2 - lam1) / lam), np.max(np.abs(xi2 - xi1) / xi)) / 3.0
    if err > rtol:
        raise AccuracyError(f"spectral data error estimate {err:.2e} exceeds {rtol:.1e}")
    return SpectralData(np.sqrt(lam), xi)


# ---------------------------------------------------------------------------
# mean potential


def mean_potential_conductivity(qbar: float) -> LayeredConductivity:
    """sigma(zeta) with (sqrt sigma)'' = qbar sqrt sigma, sigma(0) = 1, sigma'(0) = 0."""
    if qbar <= -np.pi ** 2 / 4:
        raise ArgumentError("qbar must exceed -pi^2/4")
    if qbar > 0:
        s = np.sqrt(qbar)
        return LayeredConductivity(lambda z: np.cosh(s * np.asarray(z)) ** 2, "zeta", f"cosh2({qbar:g})")
    if qbar < 0:
        s = np.sqrt(-qbar)
        return LayeredConductivity(lambda z: np.cos(s * np.asarray(z)) ** 2, "zeta", f"cos2({qbar:g})")
    return LayeredConductivity.constant(1.0, "zeta")


def mean_potential_spectral_data(qbar: float, l: int) -> SpectralData:
    """Exact data of the constant-potential conductivity: delta^2 shifted by qbar, xi = 2."""
    ref = reference_spectral_data(l)
    return SpectralData(np.sqrt(ref.delta ** 2 + qbar), ref.xi)


def estimate_mean_potential(data: SpectralData) -> float:
    """Least-squares fit of qbar from delta_j - pi (j - 1/2) ~ qbar / ((2 j - 1) pi) over the top third."""
    l = data.l
    j = np.arange(1, l + 1)
    ref = np.pi * (j - 0.5)
    start = l - max(1, l // 3)
    basis = 1.0 / ((2 * j[start:] - 1) * np.pi)
    resid = data.delta[start:] - ref[start:]
    return float(basis @ resid / (basis @ basis))


# ---------------------------------------------------------------------------
# layered reconstruction


@dataclass(frozen=True)
class LayeredReconstruction:
    """Point values of a layered reconstruction and their piecewise-constant interpolant.

    ``nodes`` are depths in the logarithmic coordinate of the reference grid
    (zeta for spectral data, z = -log r for interpolation data), sorted
    increasingly; ``kinds`` marks each value as primary ("p") or dual ("d").
    """

    nodes: np.ndarray
    values: np.ndarray
    kinds: tuple
    steps: GridSteps
    reference: GridSteps
    coord: str

    @property
    def field(self) -> LayeredConductivity:
        return LayeredConductivity.piecewise(self.nodes, self.values, coord=self.coord)

    def __call__(self, x):
        return self.field(x)

    def to_csv(self) -> str:
        lines = [f"{self.coord},sigma,kind"]
        for z, s, k in zip(self.nodes, self.values, self.kinds):
            lines.append(f"{z!r},{s!r},{k}")
        return "\n".join(lines) + "\n"


def _point_values(steps: GridSteps, ref: GridSteps):
    """Depths and values of the reconstruction mapping on the reference grid.

    The dual step around primary depth z_j gives sigma there, and the primary
    step containing dual depth zh gives the value at zh.
    """
    l = ref.l
    z = np.concatenate([[0.0], np.cumsum(ref.alpha)])
    pos, val, kind = [], [], []
    if ref.hbar == 1:
        zh = np.concatenate([[0.0], np.cumsum(ref.alpha_hat)])
        for j in range(l):
            pos.append(z[j])
            val.append(steps.alpha_hat[j] / ref.alpha_hat[j])
            kind.append("p")
            pos.append(zh[j + 1])
            val.append(ref.alpha[j] / steps.alpha[j])
            kind.append("d")
    else:
        zh = np.cumsum(ref.alpha_hat)  # dual depths 0, ah_2, ah_2 + ah_3, ...
        for j in range(l):
            if j > 0:
                pos.append(z[j])
                val.append(steps.alpha_hat[j] / ref.alpha_hat[j])
                kind.append("p")
            pos.append(zh[j])
            val.append(ref.alpha[j] / steps.alpha[j])
            kind.append("d")
    order = np.argsort(pos, kind="stable")
    return np.asarray(pos)[order], np.asarray(val)[order], tuple(kind[i] for i in order)


def reconstruct_layered(measured, l: int | None = None, mode: str = "inverse-spectral",
                        reference=None, hbar: int = 1, n: int | None = None,
                        dps: int | None = 50) -> LayeredReconstruction:
    """Reconstruction mapping for layered media.

    ``mode="inverse-spectral"``: ``measured`` is SpectralData; steps come from
    the Lanczos solver and are compared with ``reference`` steps (default: the
    truncated measure grid; pass ``"mean-potential"`` to use the constant
    potential grid fitted to the data).

    ``mode="interpolation"``: ``measured`` is a pair (x, F) of samples
    F(x_k^2); steps come from rational interpolation and ``reference`` must be
    steps computed from the same measurement type (default: lumped-current
    optimal grid for ``n``).
    """
    if mode == "inverse-spectral":
        if not isinstance(measured, SpectralData):
            raise ArgumentError("inverse-spectral mode needs SpectralData")
        if l is not None and l != measured.l:
            raise ArgumentError("measurement count does not match l")
        l = measured.l
        steps = lanczos_from_spectral(measured)
        if reference is None:
            ref = truncated_measure_grid(l)
        elif isinstance(reference, str) and reference == "mean-potential":
            ref = lanczos_from_spectral(mean_potential_spectral_data(estimate_mean_potential(measured), l))
        elif isinstance(reference, GridSteps):
            ref = reference
        else:
            raise ArgumentError("reference must be GridSteps or 'mean-potential'")
        coord = "zeta"
    elif mode == "interpolation":
        x, F = measured
        steps = steps_from_samples(x, F, hbar=hbar, dps=dps)
        if reference is None:
            if n is None:
                n = 2 * len(x) + 1
            from .grids import optimal_grid_interpolation

            ref = optimal_grid_interpolation(n, hbar)
        elif isinstance(reference, GridSteps):
            ref = reference
        else:
            raise ArgumentError("reference must be GridSteps")
        coord = "z"
    else:
        raise ArgumentError(f"unknown mode {mode!r}")
    if ref.l != steps.l or ref.hbar != steps.hbar:
        raise ArgumentError("reference steps come from a different measurement type")
    pos, val, kind = _point_values(steps, ref)
    return LayeredReconstruction(pos, val, kind, steps, ref, coord)
