"""Continuum forward problem: fine finite-volume solver and DtN measurements.

The fine solver discretizes div(sigma grad u) = 0 on the unit disk in
log-polar coordinates t = -log r, theta, where the equation keeps its form
(sigma u_t)_t + (sigma u_theta)_theta = 0.  Nodes sit on rings t_0 = 0 < t_1 <
... with geometric grading in t and uniform spacing in theta; the innermost
ring at r = r_min collapses to a single floating center node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import linalg as spla

from .errors import AccuracyError, ArgumentError, DomainError
from .spectral import LayeredConductivity, _as_layered, eigenvalue_f

__all__ = [
    "ConductivityField",
    "ElectrodeSet",
    "FineGrid",
    "FineSolver",
    "FineSolution",
    "MeasuredDtn",
    "solve_fine",
    "measure_dtn",
    "flux_eigenvalues",
    "fourier_dtn_layered",
    "lumped_dtn_layered",
    "phantom",
    "phantom_names",
    "circulant_eigenvalues",
]


# ---------------------------------------------------------------------------
# conductivity fields


class ConductivityField:
    """Positive conductivity sigma(r, theta) on the closed unit disk.

    Parameters
    ----------
    func : callable
        Vectorized ``func(r, theta)``.
    name : str
        Identifier recorded in provenance.
    layered : LayeredConductivity, optional
        Set when sigma depends on r only; enables the layered fast paths.
    """

    def __init__(self, func, name: str = "custom", layered: LayeredConductivity | None = None):
        self._func = func
        self.name = name
        self.layered = layered

    def __call__(self, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if np.any(r < 0) or np.any(r > 1 + 1e-12):
            raise DomainError("conductivity evaluated outside the closed unit disk")
        s = np.asarray(self._func(r, theta), dtype=float)
        s = np.broadcast_to(s, np.broadcast(r, theta).shape).copy()
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise DomainError(f"conductivity {self.name} is not positive")
        return s

    def at_xy(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self(np.hypot(x, y), np.arctan2(y, x))

    @classmethod
    def constant(cls, value: float = 1.0) -> "ConductivityField":
        if value <= 0:
            raise DomainError("constant conductivity must be positive")
        lay = LayeredConductivity.constant(value)
        return cls(lambda r, th: np.full(np.broadcast(r, th).shape, float(value)), f"const{value:g}", lay)

    @classmethod
    def from_layered(cls, sigma, name: str | None = None) -> "ConductivityField":
        lay = _as_layered(sigma, "r")
        if lay.coord != "r":
            raise ArgumentError("layered field must be a function of r (use as_radius)")
        return cls(lambda r, th: lay(np.broadcast_to(r, np.broadcast(r, th).shape)), name or lay.name, lay)

    @classmethod
    def from_xy(cls, func, name: str = "custom") -> "ConductivityField":
        return cls(lambda r, th: func(r * np.cos(th), r * np.sin(th)), name)

    @cached_property
    def bounds(self) -> tuple[float, float]:
        """(sigma_min, sigma_max) over a polar sample of the disk."""
        r = np.sqrt(np.linspace(0.0, 1.0, 101))[:, None]
        th = np.linspace(0.0, 2 * np.pi, 200, endpoint=False)[None, :]
        s = self(r, th)
        return float(s.min()), float(s.max())


# ---------------------------------------------------------------------------
# electrodes


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class ElectrodeSet:
    """Box electrodes on arcs [start_q, end_q] with constant height.

    The default height 1 / (end - start) gives unit integral.  Pulled-back
    electrodes keep the height of their image so that measurements are
    invariant under the boundary map.
    """

    centers: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    heights: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("centers", "starts", "ends", "heights"):
            a = np.asarray(getattr(self, name), dtype=float).copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (self.centers.shape == self.starts.shape == self.ends.shape == self.heights.shape):
            raise ArgumentError("electrode arrays must have equal length")
        widths = self.ends - self.starts
        if np.any(widths <= 0) or np.any(widths >= np.pi) or np.any(self.heights <= 0):
            raise ArgumentError("electrodes need positive width below pi and positive height")
        s0 = self.starts % (2 * np.pi)
        order = np.argsort(s0)
        s = s0[order]
        e = s + widths[order]
        nxt = np.concatenate([s[1:], [s[0] + 2 * np.pi]])
        if np.any(nxt - e < -1e-12):
            raise ArgumentError("electrode supports overlap")

    @property
    def n(self) -> int:
        return int(self.centers.size)

    @classmethod
    def uniform(cls, n: int, width: float = 0.5, offset: float = 0.0) -> "ElectrodeSet":
        """n equally spaced electrodes at offset + 2 pi (q - 1) / n, width a fraction of the spacing."""
        if not (0.0 < width <= 1.0):
            raise ArgumentError("width must be in (0, 1]")
        h = 2 * np.pi / n
        c = offset + h * np.arange(n)
        hw = 0.5 * width * h * (1 - 1e-12 if width == 1.0 else 1.0)
        return cls(c, c - hw, c + hw, np.full(n, 1.0 / (2 * hw)), {"kind": "uniform", "n": n, "width": width, "offset": offset})

    @classmethod
    def on_arc(cls, n: int, center: float, half_width: float, width: float = 0.5) -> "ElectrodeSet":
        """n electrodes with centers spaced uniformly on the arc |theta - center| <= half_width."""
        if not (0.0 < half_width < np.pi):
            raise ArgumentError("arc half-width must be in (0, pi)")
        spacing = 2 * half_width / n
        c = center - half_width + spacing * (np.arange(n) + 0.5)
        hw = 0.5 * width * spacing
        return cls(c, c - hw, c + hw, np.full(n, 1.0 / (2 * hw)),
                   {"kind": "arc", "n": n, "center": center, "half_width": half_width, "width": width})

    @classmethod
    def two_arcs(cls, n: int, half_width: float, width: float = 0.5, centers=(np.pi / 2, -np.pi / 2)) -> "ElectrodeSet":
        """n = 2 m electrodes, m on each of two arcs, counterclockwise order."""
        if n % 2:
            raise ArgumentError("two-arc setups need even n")
        a = cls.on_arc(n // 2, centers[0], half_width, width)
        b = cls.on_arc(n // 2, centers[1], half_width, width)
        cat = lambda x, y: np.concatenate([x, y])
        return cls(cat(a.centers, b.centers), cat(a.starts, b.starts), cat(a.ends, b.ends), cat(a.heights, b.heights),
                   {"kind": "two-arcs", "n": n, "half_width": half_width, "width": width, "centers": list(map(float, centers))})

    def min_feature(self) -> float:
        """Smallest electrode width or gap between neighbouring electrodes."""
        s0 = self.starts % (2 * np.pi)
        order = np.argsort(s0)
        s = s0[order]
        e = s + (self.ends - self.starts)[order]
        gaps = np.concatenate([s[1:], [s[0] + 2 * np.pi]]) - e
        return float(min((self.ends - self.starts).min(), gaps.min()))

    def cell_weights(self, theta: np.ndarray, dtheta: float) -> np.ndarray:
        """Cell averages of each electrode function over cells centred at ``theta``."""
        d = _wrap(theta[:, None] - self.starts[None, :])
        w = self.ends - self.starts
        lo = np.maximum(d - dtheta / 2, 0.0)
        hi = np.minimum(d + dtheta / 2, w[None, :])
        ov = np.clip(hi - lo, 0.0, None)
        return ov * self.heights[None, :] / dtheta

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "starts": self.starts.tolist(),
            "ends": self.ends.tolist(),
            "heights": self.heights.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ElectrodeSet":
        return cls(d["centers"], d["starts"], d["ends"], d["heights"], d.get("meta", {}))


# ---------------------------------------------------------------------------
# fine grid and solver


@dataclass(frozen=True)
class FineGrid:
    """Log-polar staggered grid.

    ``n_theta`` nodes per ring, ``n_r`` rings t_0 = 0 .. t_{n_r - 1} plus a
    center node standing for the disk r < r_min.  The first step is
    dtheta / sqrt(3), which cancels the leading dispersion error of the
    five-point stencil for decaying Fourier modes; later steps grow
    geometrically to reach t = -log r_min.
    """

    n_theta: int = 512
    n_r: int = 256
    r_min: float = 1e-4

    def __post_init__(self):
        if self.n_theta < 8 or self.n_r < 4:
            raise ArgumentError("grid too coarse")
        if not (0 < self.r_min < 1):
            raise ArgumentError("r_min must be in (0, 1)")

    @cached_property
    def dtheta(self) -> float:
        return 2 * np.pi / self.n_theta

    @cached_property
    def theta(self) -> np.ndarray:
        return self.dtheta * np.arange(self.n_theta)

    @cached_property
    def t(self) -> np.ndarray:
        """Ring positions t_0..t_{n_r}; the last one is the center closure."""
        T = -np.log(self.r_min)
        d1 = self.dtheta / np.sqrt(3.0)
        N = self.n_r
        if d1 * N >= T:
            q = 1.0
            steps = np.full(N, T / N)
        else:
            g = lambda q: d1 * (q ** N - 1) / (q - 1) - T
            q = optimize.brentq(g, 1 + 1e-12, 2.0, xtol=1e-15)
            steps = d1 * q ** np.arange(N)
            steps *= T / steps.sum()
        return np.concatenate([[0.0], np.cumsum(steps)])

    @property
    def n_nodes(self) -> int:
        return self.n_r * self.n_theta + 1

    @property
    def center(self) -> int:
        return self.n_r * self.n_theta

    @cached_property
    def node_r(self) -> np.ndarray:
        r = np.repeat(np.exp(-self.t[: self.n_r]), self.n_theta)
        return np.concatenate([r, [0.0]])

    @cached_property
    def node_theta(self) -> np.ndarray:
        return np.concatenate([np.tile(self.theta, self.n_r), [0.0]])

    @cached_property
    def dual_t(self) -> np.ndarray:
        """Width in t of the dual cell of each ring."""
        t = self.t
        w = np.empty(self.n_r)
        w[0] = 0.5 * (t[1] - t[0])
        w[1:] = 0.5 * (t[2:] - t[:-2])
        return w

    @cached_property
    def node_area(self) -> np.ndarray:
        """Physical area of each node's dual cell (area element r^2 dt dtheta)."""
        t = self.t
        ring = np.empty(self.n_r)
        lo = np.concatenate([[0.0], 0.5 * (t[:-2] + t[1:-1])])
        hi = 0.5 * (t[:-1] + t[1:])
        ring = 0.5 * (np.exp(-2 * lo) - np.exp(-2 * hi)) * self.dtheta
        inner = np.exp(-2 * hi[-1]) * np.pi
        return np.concatenate([np.repeat(ring, self.n_theta), [inner]])

    @cached_property
    def edges(self):
        """(a, b, geometric factor, midpoint r, midpoint theta) for every edge."""
        Nt, Nr = self.n_theta, self.n_r
        t = self.t
        i = np.arange(Nt)
        a_list, b_list, g_list, rm, tm = [], [], [], [], []
        for j in range(Nr):
            # angular edges on ring j
            a_list.append(j * Nt + i)
            b_list.append(j * Nt + (i + 1) % Nt)
            g_list.append(np.full(Nt, self.dual_t[j] / self.dtheta))
            rm.append(np.full(Nt, np.exp(-t[j])))
            tm.append(self.theta + 0.5 * self.dtheta)
            # radial edges to ring j + 1 (or to the center)
            a_list.append(j * Nt + i)
            b_list.append((j + 1) * Nt + i if j < Nr - 1 else np.full(Nt, self.center))
            g_list.append(np.full(Nt, self.dtheta / (t[j + 1] - t[j])))
            rm.append(np.full(Nt, np.exp(-0.5 * (t[j] + t[j + 1]))))
            tm.append(self.theta.copy())
        return tuple(np.concatenate(x) for x in (a_list, b_list, g_list, rm, tm))

    def edge_conductance(self, sigma) -> np.ndarray:
        """Edge conductances from a field (midpoint samples) or node values (endpoint means)."""
        a, b, g, rm, tm = self.edges
        if isinstance(sigma, ConductivityField):
            return g * sigma(rm, tm)
        s = np.asarray(sigma, dtype=float)
        if s.shape != (self.n_nodes,):
            raise ArgumentError("node conductivity must have one value per fine node")
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise DomainError("node conductivity is not positive")
        return g * 0.5 * (s[a] + s[b])

    def sample(self, sigma: ConductivityField) -> np.ndarray:
        return sigma(self.node_r, self.node_theta)

    def to_dict(self) -> dict:
        return {"n_theta": self.n_theta, "n_r": self.n_r, "r_min": self.r_min}

    @classmethod
    def for_electrodes(cls, electrodes: "ElectrodeSet", n_theta: int = 512, n_r: int = 256, min_cells: int = 16,
                       max_theta: int = 4096) -> "FineGrid":
        """Production grid, doubling n_theta until every electrode and gap spans ``min_cells`` cells."""
        feature = electrodes.min_feature()
        while feature < min_cells * 2 * np.pi / n_theta and n_theta < max_theta:
            n_theta *= 2
        return cls(n_theta, n_r)


@dataclass
class FineSolution:
    grid: FineGrid
    u: np.ndarray  # nodal potentials (n_nodes,) or (n_nodes, k)
    current: np.ndarray  # boundary current density, sigma du/dn at r = 1

    def boundary_potential(self):
        return self.u[: self.grid.n_theta]


class FineSolver:
    """Kirchhoff system of the fine grid with a reusable factorization.

    Parameters
    ----------
    grid : FineGrid
    sigma : ConductivityField or (n_nodes,) array of node values
    """

    def __init__(self, grid: FineGrid, sigma):
        self.grid = grid
        self.gamma = grid.edge_conductance(sigma)
        a, b, *_ = grid.edges
        N = grid.n_nodes
        w = self.gamma
        K = sparse.coo_matrix(
            (np.concatenate([-w, -w, w, w]), (np.concatenate([a, b, a, b]), np.concatenate([b, a, a, b]))), shape=(N, N)
        ).tocsc()
        self.K = K
        nb = grid.n_theta
        self._KII = K[nb:, nb:].tocsc()
        self._KIB = K[nb:, :nb].tocsc()
        self._KBB = K[:nb, :nb].tocsc()
        self._KBI = K[:nb, nb:].tocsc()
        self._lu = None

    @property
    def lu(self):
        if self._lu is None:
            self._lu = spla.splu(self._KII, permc_spec="MMD_AT_PLUS_A")
        return self._lu

    def dirichlet(self, u_b) -> FineSolution:
        """Solve with Dirichlet data at the boundary nodes (columns are separate problems)."""
        u_b = np.asarray(u_b, dtype=float)
        vec = u_b.ndim == 1
        U_b = u_b[:, None] if vec else u_b
        if U_b.shape[0] != self.grid.n_theta:
            raise ArgumentError("Dirichlet data needs one value per boundary node")
        U_i = self.lu.solve(-(self._KIB @ U_b))
        J = self._KBB @ U_b + self._KBI @ U_i
        U = np.vstack([U_b, U_i])
        dens = J / self.grid.dtheta
        if vec:
            return FineSolution(self.grid, U[:, 0], dens[:, 0])
        return FineSolution(self.grid, U, dens)

    def mixed(self, fixed_mask, fixed_values, current_density) -> FineSolution:
        """Dirichlet values on ``fixed_mask`` boundary nodes, current density elsewhere."""
        g = self.grid
        nb = g.n_theta
        fixed = np.nonzero(fixed_mask)[0]
        free = np.setdiff1d(np.arange(g.n_nodes), fixed)
        rhs = np.zeros(g.n_nodes)
        rhs[:nb] = np.asarray(current_density, dtype=float) * g.dtheta
        u = np.zeros(g.n_nodes)
        u[fixed] = fixed_values
        Kff = self.K[free][:, free].tocsc()
        b = rhs[free] - self.K[free][:, fixed] @ u[fixed]
        u[free] = spla.spsolve(Kff, b)
        J = (self.K @ u)[:nb] / g.dtheta
        return FineSolution(g, u, J)


def solve_fine(sigma, dirichlet=None, neumann=None, grounded=None, grid: FineGrid | None = None) -> FineSolution:
    """Solve div(sigma grad u) = 0 with Dirichlet or Neumann boundary data.

    Parameters
    ----------
    sigma : ConductivityField or node values
    dirichlet : callable theta -> u or array on the boundary nodes
    neumann : callable theta -> current density or array; must have zero mean
        unless ``grounded`` is given
    grounded : boolean mask or callable theta -> bool marking boundary nodes
        held at zero potential (partial-boundary setups)
    grid : FineGrid, default 512 x 256

    Returns
    -------
    FineSolution
        Neumann solutions without a grounded arc are normalized by zero
        potential at the boundary node theta = 0.
    """
    grid = grid or FineGrid()
    solver = FineSolver(grid, sigma)
    th = grid.theta

    def as_boundary(data):
        return np.asarray(data(th) if callable(data) else data, dtype=float)

    if (dirichlet is None) == (neumann is None):
        raise ArgumentError("give exactly one of dirichlet and neumann data")
    if dirichlet is not None:
        if grounded is not None:
            raise ArgumentError("a grounded arc applies to current-driven setups")
        return solver.dirichlet(as_boundary(dirichlet))
    J = as_boundary(neumann)
    if grounded is None:
        scale = max(np.max(np.abs(J)), 1e-300)
        if abs(J.mean()) > 1e-10 * scale:
            raise ArgumentError("Neumann data must have zero mean")
        mask = np.zeros(grid.n_theta, dtype=bool)
        mask[0] = True
        sol = solver.mixed(mask, 0.0, J)
        return sol
    mask = np.asarray(grounded(th) if callable(grounded) else grounded, dtype=bool)
    return solver.mixed(mask, 0.0, np.where(mask, 0.0, J))


@dataclass
class MeasuredDtn:
    """Measured DtN matrix with provenance."""

    matrix: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _finish_measurement(M, provenance):
    scale = np.max(np.abs(M))
    asym = float(np.max(np.abs(M - M.T)) / scale) if scale > 0 else 0.0
    M = 0.5 * (M + M.T)
    np.fill_diagonal(M, 0.0)
    np.fill_diagonal(M, -M.sum(axis=1))
    provenance = dict(provenance, asymmetry=asym)
    return MeasuredDtn(M, provenance)


def measure_dtn(sigma, n: int | None = None, electrodes: ElectrodeSet | None = None, grid: FineGrid | None = None,
                solver: FineSolver | None = None, return_potentials: bool = False):
    """Electrode measurements (Lambda)_pq = int chi_p Lambda_sigma chi_q.

    Each column comes from one Dirichlet solve with the cell-averaged
    electrode function as boundary data; the diagonal is fixed by zero row
    sums.  Boundary nodes outside all electrodes carry zero potential, which
    grounds the inaccessible boundary in partial setups.
    """
    if electrodes is None:
        if n is None:
            raise ArgumentError("give n or an electrode set")
        electrodes = ElectrodeSet.uniform(n)
    if n is not None and electrodes.n != n:
        raise ArgumentError("electrode count differs from n")
    if solver is None:
        grid = grid or FineGrid.for_electrodes(electrodes)
        solver = FineSolver(grid, sigma)
    grid = solver.grid
    X = electrodes.cell_weights(grid.theta, grid.dtheta)
    sol = solver.dirichlet(X)
    M = X.T @ (sol.current * grid.dtheta)
    flux = np.abs(sol.current.sum(axis=0)).max() / max(np.abs(sol.current).max(), 1e-300)
    name = sigma.name if isinstance(sigma, ConductivityField) else "node-values"
    prov = {"sigma": name, "n": electrodes.n, "electrodes": electrodes.to_dict(), "grid": grid.to_dict(),
            "construction": "fine", "flux_balance": float(flux)}
    out = _finish_measurement(M, prov)
    if return_potentials:
        return out, sol.u, X
    return out


def flux_eigenvalues(sigma, ks, grid: FineGrid | None = None) -> np.ndarray:
    """DtN eigenvalues of the fine solver for boundary data cos(k theta)."""
    grid = grid or FineGrid()
    solver = FineSolver(grid, sigma)
    ks = np.atleast_1d(ks)
    C = np.cos(np.outer(grid.theta, ks))
    sol = solver.dirichlet(C)
    return (sol.current * C).sum(axis=0) / (C * C).sum(axis=0)


# ---------------------------------------------------------------------------
# layered constructions


def _layered_of(sigma) -> LayeredConductivity:
    if isinstance(sigma, ConductivityField):
        if sigma.layered is None:
            raise ArgumentError("conductivity is not layered")
        return sigma.layered
    lay = _as_layered(sigma, "r")
    if lay.coord != "r":
        raise ArgumentError("layered conductivity must be a function of r")
    return lay


def _dtn_eigenvalue(lay: LayeredConductivity, k: int) -> float:
    return float(lay(np.array(1.0))) * eigenvalue_f(lay, k)


def circulant_eigenvalues(M: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric circulant matrix indexed by k = 0..n-1."""
    return np.real(np.fft.fft(M[0]))


def _log_sin(x):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(np.sin(0.5 * x)))


def _unit_kernel_box(electrodes: ElectrodeSet) -> np.ndarray:
    """int chi_p Lambda_1 chi_q for box electrodes, closed form off the diagonal.

    The unit-disk DtN kernel is -1 / (4 pi sin^2((theta - phi) / 2)); its
    double integral over two boxes reduces to log|sin| corner terms.
    """
    s, e, hgt = electrodes.starts, electrodes.ends, electrodes.heights
    a, b = s[:, None], e[:, None]
    c, d = s[None, :], e[None, :]
    corners = _log_sin(b - c) - _log_sin(a - c) - _log_sin(b - d) + _log_sin(a - d)
    with np.errstate(invalid="ignore", divide="ignore"):
        M = hgt[:, None] * hgt[None, :] * corners / np.pi
    np.fill_diagonal(M, 0.0)
    return M


def fourier_dtn_layered(sigma, n: int, width: float = 0.5, mode: str = "full", k_exact: int = 64,
                        k_cap: int = 100000) -> MeasuredDtn:
    """Box-electrode DtN matrix of a layered conductivity from its Fourier series.

    (Lambda)_pq = (1 / 2 pi) sum_k e^{i k (theta_p - theta_q)} lambda_k sinc^2(k w h / 2),
    lambda_k = sigma(1) f(k^2) the DtN eigenvalue of mode k.

    ``mode="band"`` keeps |k| <= (n - 1) / 2, which makes [e^{i k theta_p}] exact
    eigenvectors with eigenvalues lambda_k sinc^2(k w h / 2) / h.
    ``mode="full"`` sums all k: the sigma(1) |k| part by the closed-form
    kernel, the remainder lambda_k - sigma(1) |k| exactly for |k| <= k_exact
    and from a fitted tail c0 + c1 / |k| beyond.  The diagonal comes from zero
    row sums in both modes.
    """
    lay = _layered_of(sigma)
    if n < 3:
        raise ArgumentError("n must be >= 3")
    if not (0.0 < width <= 1.0):
        raise ArgumentError("width must be in (0, 1]")
    h = 2 * np.pi / n
    a = 0.5 * width * h
    theta = h * np.arange(n)
    diff = theta[:, None] - theta[None, :]
    s1 = float(lay(np.array(1.0)))
    prov = {"sigma": lay.name, "n": n, "electrodes": {"kind": "uniform", "width": width}, "construction": f"fourier-{mode}"}
    if mode == "band":
        K = (n - 1) // 2
        ks = np.arange(1, K + 1)
        lam = np.array([_dtn_eigenvalue(lay, k) for k in ks])
        c2 = np.sinc(ks * a / np.pi) ** 2
        M = (lam * c2 * np.cos(ks[None, None, :] * diff[..., None])).sum(-1) / np.pi
        return _finish_measurement(M, prov)
    if mode != "full":
        raise ArgumentError("mode must be 'band' or 'full'")
    if width == 1.0:
        raise AccuracyError(f"series does not converge for touching electrodes (k cap {k_cap})")
    electrodes = ElectrodeSet.uniform(n, width)
    M = s1 * _unit_kernel_box(electrodes)
    ks = np.arange(1, k_exact + 1)
    lam = np.array([_dtn_eigenvalue(lay, k) for k in ks])
    rem = lam - s1 * ks
    c2 = np.sinc(ks * a / np.pi) ** 2
    M += (rem * c2 * np.cos(ks[None, None, :] * diff[..., None])).sum(-1) / np.pi
    # tail fit on the last third of the exact range
    sel = ks >= 2 * k_exact // 3
    A = np.column_stack([np.ones(sel.sum()), 1.0 / ks[sel]])
    c0, c1 = np.linalg.lstsq(A, rem[sel], rcond=None)[0]
    # c0 part: sum over all k of c_k^2 e^{ik diff} / 2 pi is the electrode overlap, zero off the
    # diagonal, so the k > k_exact tail equals minus the k = 0 term minus the exact range
    M -= c0 * (0.5 + (c2 * np.cos(ks[None, None, :] * diff[..., None])).sum(-1)) / np.pi
    kt = np.arange(k_exact + 1, k_cap + 1)
    ct = np.sinc(kt * a / np.pi) ** 2 / kt
    for p in range(n):
        for q in range(p + 1, n):
            v = c1 * np.dot(ct, np.cos(kt * diff[p, q])) / np.pi
            M[p, q] += v
            M[q, p] += v
    prov.update(tail_c0=float(c0), tail_c1=float(c1))
    return _finish_measurement(M, prov)


def lumped_dtn_layered(sigma, n: int) -> np.ndarray:
    """Circulant matrix with eigenvalues sigma(1) f(k^2) omega_k / |k| on [e^{i k theta_p}].

    omega_k = 2 sin(k h / 2) / h; the k = 0 eigenvalue is zero.
    """
    lay = _layered_of(sigma)
    if n < 3 or n % 2 == 0:
        raise ArgumentError("n must be odd and >= 3")
    h = 2 * np.pi / n
    K = (n - 1) // 2
    ks = np.arange(1, K + 1)
    omega = 2 * np.sin(ks * h / 2) / h
    lam = np.array([_dtn_eigenvalue(lay, k) for k in ks]) * omega / ks
    theta = h * np.arange(n)
    diff = theta[:, None] - theta[None, :]
    M = 2 * (lam * np.cos(ks[None, None, :] * diff[..., None])).sum(-1) / n
    return 0.5 * (M + M.T)


# ---------------------------------------------------------------------------
# phantoms


def _registry() -> dict:
    text = resources.files("eitnet").joinpath("data/phantoms.json").read_text()
    return json.loads(text)


def phantom_names() -> list[str]:
    return sorted(_registry()["phantoms"])


def phantom(name: str) -> ConductivityField:
    """Named conductivity from the versioned phantom registry."""
    reg = _registry()
    entry = reg["phantoms"].get(name)
    if entry is None:
        raise ArgumentError(f"unknown phantom {name!r}; known: {', '.join(sorted(reg['phantoms']))}")
    kind = entry["kind"]
    label = f"{name}@v{reg['version']}"
    if kind == "bumps":
        bumps = entry["bumps"]
        base = entry["background"]

        def func(x, y):
            s = np.full(np.broadcast(x, y).shape, float(base))
            for bump in bumps:
                cx, cy = bump["center"]
                s = s + bump["amplitude"] * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * bump["width"] ** 2))
            return s

        return ConductivityField.from_xy(func, label)
    if kind == "inclusions":
        base = entry["background"]
        ann = entry["annulus"]
        ells = entry["ellipses"]

        def func(x, y):
            s = np.full(np.broadcast(x, y).shape, float(base))
            r = np.hypot(x, y)
            s = np.where(r >= ann["inner_radius"], ann["value"], s)
            for e in ells:
                cx, cy = e["center"]
                ax, ay = e["axes"]
                inside = ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 <= 1.0
                s = np.where(inside, e["value"], s)
            return s

        return ConductivityField.from_xy(func, label)
    if kind == "layered-zeta":
        eps = entry["eps"]
        amp = entry["amplitude"]
        Z = -np.log(eps)

        def lay_func(r):
            zeta = np.clip(-np.log(np.maximum(r, 1e-300)) / Z, 0.0, 1.0)
            return 1.0 + amp * np.sin(np.pi * zeta)

        return ConductivityField.from_layered(LayeredConductivity(lay_func, "r", label), label)
    raise ArgumentError(f"phantom kind {kind!r} not supported")
