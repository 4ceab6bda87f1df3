"""Network recovery and the continuum reconstruction pipeline.

Circular networks are recovered by damped Gauss-Newton fitting of the DtN
map; pyramidal and two-sided networks by layer peeling (see ``peeling``).
Recovered conductances divided by the reference conductances of sigma = 1
give point values of the conductivity on a grid; these point values precondition
a Gauss-Newton iteration on the fine-grid log-conductivity.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

from .errors import ArgumentError, ConvergenceError, EITError, InconsistentDataError, StructuralError
from .forward import ConductivityField, ElectrodeSet, FineGrid, FineSolver, MeasuredDtn, measure_dtn
from .grids import make_grid, optimal_grid_electrodes, optimal_grid_interpolation
from .network import (
    NetworkGraph,
    ResistorNetwork,
    build_circular,
    check_dtn_consistency,
    dtn_jacobian,
    dtn_map,
    layered_conductances,
)
from .peeling import RecoveredNetwork, flip_two_sided, peel_pyramidal, peel_two_sided

__all__ = [
    "RecoveredNetwork",
    "SensitivityMatrix",
    "ReconstructionResult",
    "circular_hbar",
    "recover_circular",
    "recover_network",
    "peel_pyramidal",
    "peel_two_sided",
    "flip_two_sided",
    "optimal_grid_steps",
    "optimal_points",
    "reconstruction_mapping",
    "sensitivity_matrix",
    "sensitivity_grid",
    "interpolate_points",
    "gauss_newton_step",
    "gauss_newton",
]


def _matrix(data) -> np.ndarray:
    M = data.matrix if isinstance(data, MeasuredDtn) else data
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ArgumentError("DtN data must be a square matrix")
    return M


# ---------------------------------------------------------------------------
# circular networks


def circular_hbar(n: int) -> int:
    """The boundary-layer type hbar for which an n-electrode circular network is critical."""
    if n < 3 or n % 2 == 0:
        raise ArgumentError(f"circular networks need odd n >= 3, got {n}")
    return 1 if ((n - 1) // 2) % 2 == 0 else 0


def recover_circular(data, graph: NetworkGraph | None = None, hbar: int | None = None, gamma0=None, check: bool = True,
                     max_iter: int = 200, tol: float = 1e-12, accept: float = 1e-8) -> RecoveredNetwork:
    """Fit a circular network to a DtN matrix.

    Minimizes the squared misfit of the logarithms of the (negative)
    off-diagonal DtN entries over log-conductances.  Steps are damped
    Gauss-Newton (Levenberg-Marquardt) steps on the analytic Jacobian.  For
    consistent data the minimizer is the same as for the plain entry
    misfit, but the log misfit weights small and large entries evenly.  The default start is the
    layered optimal-grid network scaled to the data trace.

    Parameters
    ----------
    data : (n, n) array or MeasuredDtn
    graph : circular NetworkGraph, default ``build_circular(n, hbar)``
    hbar : boundary-layer type, default the feasible one for n
    gamma0 : initial conductances
    check : run :func:`check_dtn_consistency` first
    tol : stop when the relative max residual drops below this
    accept : relative residual required at exit

    Raises
    ------
    InconsistentDataError
        If the consistency check fails.
    ConvergenceError
        If the relative entry residual stays above ``accept`` after
        ``max_iter`` iterations (networks with n >= 15 and strongly
        non-layered conductances may need a larger cap).
    """
    M = _matrix(data)
    n = M.shape[0]
    if graph is None:
        graph = build_circular(n, circular_hbar(n) if hbar is None else hbar)
    if graph.n != n:
        raise ArgumentError("graph boundary size differs from data")
    report = None
    if check:
        report = check_dtn_consistency(M)
        if not report.ok:
            raise InconsistentDataError(f"data fails consistency checks: {', '.join(report.failures())}")
    if gamma0 is None:
        if graph.topology == "circular":
            gamma0 = layered_conductances(graph, optimal_grid_interpolation(n, graph.meta["hbar"]))
        else:
            gamma0 = np.ones(graph.n_edges)
        L0 = dtn_map(ResistorNetwork(graph, gamma0))
        gamma0 = gamma0 * np.trace(M) / np.trace(L0)
    rec = _fit_network(M, graph, np.asarray(gamma0, dtype=float), max_iter, tol, accept)
    if report is not None:
        rec.diagnostics["worst_minor"] = report.worst_minor
    return rec


def recover_network(data, topology: str, n: int | None = None, hbar: int | None = None, dps="auto") -> RecoveredNetwork:
    """Recover a network of the given topology (circular, pyramidal, two-sided, two-sided-flipped).

    ``dps`` sets the working precision of layer peeling; "auto" uses 40
    digits where double-precision peeling loses accuracy (pyramidal n >= 8,
    two-sided n >= 12).
    """
    M = _matrix(data)
    n = n or M.shape[0]
    if dps == "auto":
        dps = 40 if n >= (8 if topology == "pyramidal" else 12) else None
    if topology == "circular":
        return recover_circular(M, hbar=hbar)
    if topology == "pyramidal":
        return peel_pyramidal(M, n, dps=dps)
    if topology == "two-sided":
        return peel_two_sided(M, n, dps=dps)
    if topology == "two-sided-flipped":
        return flip_two_sided(M, n, dps=dps)
    raise ArgumentError(f"unknown topology {topology!r}")


def _fit_network(M, graph, gamma0, max_iter, tol, accept) -> RecoveredNetwork:
    iu = np.triu_indices(M.shape[0], 1)
    if np.any(M[iu] >= 0):
        raise InconsistentDataError("off-diagonal DtN entries must be negative for a well-connected network")
    target = np.log(-M[iu])

    def residual(x):
        net = ResistorNetwork(graph, np.exp(x))
        L = dtn_map(net)
        if np.any(L[iu] >= 0):
            raise ArgumentError("trial network is not well connected")
        return np.log(-L[iu]) - target, net, L

    x = np.log(gamma0)
    r, net, L = residual(x)
    cost = float(r @ r)
    mu = 1e-2
    it = 0
    eye = np.eye(graph.n_edges)
    zeros = np.zeros(graph.n_edges)
    for it in range(1, max_iter + 1):
        if np.max(np.abs(r)) <= tol:
            break
        J = dtn_jacobian(net) * np.exp(x)[None, :] / L[iu][:, None]
        accepted = False
        while mu < 1e10:
            dx = np.linalg.lstsq(np.vstack([J, np.sqrt(mu) * eye]), np.concatenate([-r, zeros]), rcond=None)[0]
            try:
                r_new, net_new, L_new = residual(x + dx)
                c_new = float(r_new @ r_new)
            except (EITError, FloatingPointError):
                c_new = np.inf
            if c_new < cost:
                x, r, net, L, cost = x + dx, r_new, net_new, L_new, c_new
                mu = max(mu / 3, 1e-15)
                accepted = True
                break
            mu *= 2
        if not accepted:
            break
    scale = np.max(np.abs(M[iu]))
    rel = float(np.max(np.abs(L[iu] - M[iu])) / scale)
    if rel > accept:
        raise ConvergenceError(f"network fit stopped at relative residual {rel:.3g} after {it} iterations", rel)
    refit = float(np.max(np.abs(L - M)))
    return RecoveredNetwork(net, refit, {"iterations": it, "relative_residual": rel})


# ---------------------------------------------------------------------------
# reconstruction mapping


@dataclass
class ReconstructionResult:
    """Point values of the reconstruction mapping and their interpolant.

    ``points`` is (P, 2) Cartesian; ``trace`` holds the Gauss-Newton
    objective per accepted step (empty before any refinement).
    """

    points: np.ndarray
    values: np.ndarray
    kinds: tuple
    gamma: np.ndarray
    gamma_ref: np.ndarray
    trace: list = field(default_factory=list)
    fine_values: np.ndarray | None = None
    fine_grid: FineGrid | None = None
    diagnostics: dict = field(default_factory=dict)

    def interpolant(self):
        return interpolate_points(self.points, self.values)

    def to_json(self) -> str:
        return json.dumps(
            {
                "points": self.points.tolist(),
                "values": self.values.tolist(),
                "kinds": list(self.kinds),
                "gamma": self.gamma.tolist(),
                "gamma_ref": self.gamma_ref.tolist(),
                "trace": [float(t) for t in self.trace],
                "diagnostics": self.diagnostics,
            },
            indent=2,
            sort_keys=True,
        )


def optimal_grid_steps(n: int, hbar: int = 1, width: float | None = 0.5):
    """Optimal grid steps for box electrodes of relative ``width`` (None: lumped currents).

    Falls back to the lumped-current grid when the electrode fit does not
    give positive steps.
    """
    if width is not None:
        try:
            steps = optimal_grid_electrodes(n, hbar, width)
            if steps.is_positive():
                return steps
        except EITError:
            pass
    return optimal_grid_interpolation(n, hbar)


def optimal_points(graph: NetworkGraph, width: float | None = 0.5) -> np.ndarray:
    """Grid points of circular-network edges on the optimal grid.

    Angular edges of layer j sit at the primary radius r_j and the dual angle
    between their end nodes; radial edges sit at the dual radius between
    their layers and at their primary angle.  ``width`` selects the grid
    fitted to box-electrode data (None: lumped-current grid); the
    interpolation route is used when the electrode fit is not available.
    """
    if graph.topology != "circular":
        raise ArgumentError("optimal grid points exist for circular networks only")
    n, hbar = graph.n, graph.meta["hbar"]
    grid = make_grid(n, optimal_grid_steps(n, hbar, width))
    h = grid.h
    pts = np.empty((graph.n_edges, 2))
    for e, (kind, (j, q)) in enumerate(zip(graph.kinds, graph.meta["edge_layer_angle"])):
        if kind == "angular":
            r, th = grid.primary_radii[j - 1], h * (q + 0.5)
        else:
            r = grid.dual_radii[j] if hbar == 1 else grid.dual_radii[j - 1]
            th = h * q
        pts[e] = r * np.cos(th), r * np.sin(th)
    return pts


def reconstruction_mapping(data, reference, topology: str = "circular", points=None, recovered=None,
                           reference_network=None, width: float | None = 0.5) -> ReconstructionResult:
    """Point values sigma_e = gamma_e / gamma_ref_e on a grid.

    ``data`` and ``reference`` must come from the same measurement operator.
    ``points`` defaults to the optimal grid for circular networks; for
    pyramidal and two-sided networks it is required (use a sensitivity grid).
    """
    M = _matrix(data)
    Mref = _matrix(reference)
    n = M.shape[0]
    ref = reference_network or recover_network(Mref, topology, n)
    rec = recovered or recover_network(M, topology, n)
    if points is None:
        if topology != "circular":
            raise ArgumentError("non-circular topologies need explicit grid points (sensitivity grid)")
        points = optimal_points(ref.network.graph, width)
    values = rec.gamma / ref.gamma
    kinds = tuple(ref.network.graph.kinds)
    diag = {"topology": topology, "refit": rec.residual, "refit_reference": ref.residual}
    return ReconstructionResult(np.asarray(points, dtype=float), values, kinds, rec.gamma, ref.gamma, diagnostics=diag)


def interpolate_points(points, values):
    """Piecewise-linear interpolant on the Delaunay triangulation, nearest value outside the hull."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    lin = LinearNDInterpolator(points, values)
    near = NearestNDInterpolator(points, values)

    def f(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = lin(x, y)
        bad = np.isnan(v)
        if np.any(bad):
            v = np.where(bad, near(x, y), v)
        return v

    return f


# ---------------------------------------------------------------------------
# sensitivity


@dataclass
class SensitivityMatrix:
    """Derivatives of network conductances with respect to fine-grid node conductivities.

    ``matrix`` is (edges, fine nodes); ``points`` are the per-edge argmax
    points of the sensitivity density (per unit area).
    """

    matrix: np.ndarray
    grid: FineGrid
    gamma: np.ndarray
    points: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def density(self) -> np.ndarray:
        return self.matrix / self.grid.node_area[None, :]


def _measurement_derivative(grid: FineGrid, gamma_fine, U, n) -> np.ndarray:
    """d M_pq / d sigma_node for p < q, with edge conductances geom * mean of node values."""
    a, b, geom, *_ = grid.edges
    dU = U[a] - U[b]
    iu = np.triu_indices(n, 1)
    out = np.empty((iu[0].size, grid.n_nodes))
    half = 0.5 * geom
    for k, (p, q) in enumerate(zip(*iu)):
        w = dU[:, p] * dU[:, q] * half
        out[k] = np.bincount(a, w, grid.n_nodes) + np.bincount(b, w, grid.n_nodes)
    return out


def _network_jacobian(net: ResistorNetwork) -> np.ndarray:
    J = dtn_jacobian(net)
    if J.shape[0] != J.shape[1]:
        raise StructuralError("network is not critical (edge count differs from data count)")
    cond = np.linalg.cond(J)
    if not np.isfinite(cond) or cond > 1e15:
        raise StructuralError(f"network Jacobian is singular (cond={cond:.3g}); criticality fails")
    return J


def _recover(M, topology):
    return recover_network(M, topology, M.shape[0])


def sensitivity_matrix(sigma_ref, electrodes: ElectrodeSet, topology: str = "circular", grid: FineGrid | None = None,
                       recovered: RecoveredNetwork | None = None, margin: float | None = None) -> SensitivityMatrix:
    """D_sigma gamma = (D_gamma Lambda_gamma)^{-1} D_sigma M at sigma_ref.

    The measurement derivative is the exact derivative of the discrete
    measurement: d M_pq / d gamma_e = (U_p(a) - U_p(b)) (U_q(a) - U_q(b)) for a
    fine edge e = (a, b), with U_p the fine potential driven by electrode p,
    chained to node conductivities through the endpoint-mean rule.

    ``sigma_ref`` is a ConductivityField or fine node values.  Grid points
    are the largest local maxima of the densities outside discs of radius
    ``margin`` around electrode edges (default: a quarter of the smallest
    electrode or gap arc).
    """
    grid = grid or FineGrid.for_electrodes(electrodes)
    if isinstance(sigma_ref, ConductivityField):
        sigma_nodes = grid.sample(sigma_ref)
    else:
        sigma_nodes = np.asarray(sigma_ref, dtype=float)
    solver = FineSolver(grid, sigma_nodes)
    meas, U, _ = measure_dtn(None, electrodes=electrodes, solver=solver, return_potentials=True)
    rec = recovered or _recover(meas.matrix, topology)
    J = _network_jacobian(rec.network)
    dM = _measurement_derivative(grid, solver.gamma, U, electrodes.n)
    D = np.linalg.solve(J, dM)
    if margin is None:
        margin = 0.25 * electrodes.min_feature()
    points, flat = _argmax_points(D, grid, electrodes, margin)
    diag = {"flat_edges": flat, "margin": float(margin), "measurement": meas.matrix.tolist()}
    return SensitivityMatrix(D, grid, rec.gamma, points, diag)


def _local_maxima(values, grid: FineGrid) -> np.ndarray:
    """Ring nodes not smaller than any of their angular and radial neighbours."""
    Nt, Nr = grid.n_theta, grid.n_r
    A = values[: Nt * Nr].reshape(Nr, Nt)
    m = (A >= np.roll(A, 1, axis=1)) & (A >= np.roll(A, -1, axis=1))
    m[:-1] &= A[:-1] >= A[1:]
    m[1:] &= A[1:] >= A[:-1]
    out = np.zeros(grid.n_nodes, dtype=bool)
    out[: Nt * Nr] = m.ravel()
    return out


def _argmax_points(D, grid: FineGrid, electrodes: ElectrodeSet, margin: float):
    """Largest local maximum of each sensitivity density away from electrode edges.

    Box electrodes make the densities singular like 1/distance at the
    electrode edges, so the global maximum always sits there on a resolving
    grid; candidates are local maxima farther than ``margin`` from every
    electrode edge point.
    """
    r = grid.node_r
    th = grid.node_theta
    z = r * np.exp(1j * th)
    ends = np.exp(1j * np.concatenate([electrodes.starts, electrodes.ends]))
    far = np.min(np.abs(z[:, None] - ends[None, :]), axis=1) >= margin
    pts = np.empty((D.shape[0], 2))
    flat = []
    for k, row in enumerate(D / grid.node_area[None, :]):
        cand = np.nonzero(_local_maxima(row, grid) & far)[0]
        if cand.size == 0:
            cand = np.nonzero(far)[0]
        vals = row[cand]
        mx = vals.max()
        cand = cand[vals >= mx - 1e-12 * abs(mx)]
        if cand.size > 1:
            flat.append(k)
            cand = cand[np.lexsort((th[cand], r[cand]))]
        i = cand[0]
        pts[k] = r[i] * np.cos(th[i]), r[i] * np.sin(th[i])
    return pts, flat


def sensitivity_grid(S: SensitivityMatrix) -> np.ndarray:
    """Grid points P_e = argmax of the sensitivity density of edge e."""
    if not np.all(np.isfinite(S.matrix)):
        raise ArgumentError("sensitivity matrix has non-finite entries")
    if S.diagnostics.get("flat_edges"):
        warnings.warn(f"flat sensitivity for edges {S.diagnostics['flat_edges']}; ties broken by radius, angle")
    return S.points


# ---------------------------------------------------------------------------
# Gauss-Newton refinement


@dataclass
class _Iterate:
    kappa: np.ndarray
    q: np.ndarray
    residual: float
    U: np.ndarray
    gamma_fine: np.ndarray
    network: ResistorNetwork


def _evaluate(kappa, grid, electrodes, topology, gamma_ref, q_target):
    sigma = np.exp(kappa)
    solver = FineSolver(grid, sigma)
    meas, U, _ = measure_dtn(None, electrodes=electrodes, solver=solver, return_potentials=True)
    rec = _recover(meas.matrix, topology)
    q = rec.gamma / gamma_ref
    res = float(np.sum((q - q_target) ** 2))
    return _Iterate(kappa, q, res, U, solver.gamma, rec.network)


def gauss_newton_step(kappa, data, reference_gamma, electrodes: ElectrodeSet, topology: str = "circular",
                      grid: FineGrid | None = None, cutoff: float = 1e-10, max_halvings: int = 5,
                      current: _Iterate | None = None):
    """One preconditioned Gauss-Newton step on the fine-grid log-conductivity.

    kappa+ = kappa - (diag(1 / gamma_ref) D_sigma gamma diag(exp kappa))^+ (Q(kappa) - Q(data)),
    with Q the reconstruction mapping and the pseudoinverse truncated at
    ``cutoff`` relative singular value.  A step that fails network recovery
    or increases the objective is halved, at most ``max_halvings`` times.

    Returns
    -------
    (kappa_new, residual_new, info) with info["accepted"].
    """
    grid = grid or FineGrid.for_electrodes(electrodes)
    kappa = np.asarray(kappa, dtype=float)
    if not np.all(np.isfinite(kappa)):
        raise ArgumentError("log-conductivity must be finite")
    q_target = data if np.ndim(data) == 1 else _recover(_matrix(data), topology).gamma / reference_gamma
    it = current or _evaluate(kappa, grid, electrodes, topology, reference_gamma, q_target)
    if it.residual == 0.0:
        return kappa, 0.0, {"accepted": False, "reason": "zero residual", "iterate": it, "q_target": q_target}
    J = _network_jacobian(it.network)
    dM = _measurement_derivative(grid, it.gamma_fine, it.U, electrodes.n)
    A = np.linalg.solve(J, dM) * (np.exp(kappa)[None, :] / reference_gamma[:, None])
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    keep = s > cutoff * s[0]
    coef = (u[:, keep].T @ (it.q - q_target)) / s[keep]
    step = -(vt[keep].T @ coef)
    t = 1.0
    for attempt in range(max_halvings + 1):
        trial = kappa + t * step
        try:
            new = _evaluate(trial, grid, electrodes, topology, reference_gamma, q_target)
        except (InconsistentDataError, ConvergenceError, StructuralError):
            new = None
        if new is not None and new.residual <= it.residual:
            return trial, new.residual, {"accepted": True, "step_scale": t, "iterate": new, "q_target": q_target,
                                         "rank": int(keep.sum()), "previous": it.residual}
        t *= 0.5
    return kappa, it.residual, {"accepted": False, "reason": "no decrease after halving", "iterate": it,
                                "q_target": q_target}


def gauss_newton(data, reference, electrodes: ElectrodeSet, topology: str = "circular", steps: int = 1,
                 points=None, grid: FineGrid | None = None, kappa0=None, stop_rel: float = 1e-3) -> ReconstructionResult:
    """Reconstruction mapping followed by ``steps`` Gauss-Newton refinements.

    The initial iterate interpolates the point values of the reconstruction
    mapping onto the fine grid.  Iteration stops early when the relative
    reduction of the objective falls below ``stop_rel``.
    """
    grid = grid or FineGrid.for_electrodes(electrodes)
    result = reconstruction_mapping(data, reference, topology, points=points)
    gamma_ref = result.gamma_ref
    q_target = result.values
    if kappa0 is None:
        f = result.interpolant()
        kappa0 = np.log(f(grid.node_r * np.cos(grid.node_theta), grid.node_r * np.sin(grid.node_theta)))
    kappa = np.asarray(kappa0, dtype=float)
    current = _evaluate(kappa, grid, electrodes, topology, gamma_ref, q_target)
    trace = [current.residual]
    changes = []
    for _ in range(steps):
        new_kappa, res, info = gauss_newton_step(kappa, q_target, gamma_ref, electrodes, topology, grid, current=current)
        if not info["accepted"]:
            break
        changes.append(float(np.max(np.abs(np.exp(new_kappa) - np.exp(kappa)))))
        kappa = new_kappa
        current = info["iterate"]
        prev = trace[-1]
        trace.append(res)
        if prev > 0 and (prev - res) / prev < stop_rel:
            break
    result.trace = trace
    result.fine_values = np.exp(kappa)
    result.fine_grid = grid
    result.diagnostics["field_changes"] = changes
    return result
