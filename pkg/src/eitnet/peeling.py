"""Direct layer-peeling recovery of pyramidal and two-sided networks.

Both algorithms work in double precision or, with ``dps``, in mpmath
arithmetic.  The recovery problem is exponentially ill-conditioned in n, so
exact round trips beyond n ~ 8 need extended-precision data as well.
"""

from __future__ import annotations

from contextlib import nullcontext
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import ArgumentError, InconsistentDataError
from .network import NetworkGraph, ResistorNetwork, build_pyramidal, build_two_sided, dtn_map

__all__ = ["RecoveredNetwork", "peel_pyramidal", "peel_two_sided", "flip_two_sided"]

_COND_LIMIT = 1e14


@dataclass
class RecoveredNetwork:
    """Recovered conductances with refit diagnostics.

    ``residual`` is max |Lambda_refit - Lambda_input|.
    """

    network: ResistorNetwork
    residual: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def gamma(self) -> np.ndarray:
        return self.network.gamma


# ---------------------------------------------------------------------------
# arithmetic helpers shared by float and mpmath modes


def _as_working(Lam, n, dps):
    if dps is None:
        Lam = np.asarray(Lam, dtype=float)
    else:
        Lam = np.array([[x if isinstance(x, mpmath.mpf) else mpmath.mpf(float(x)) for x in row] for row in np.asarray(Lam)], dtype=object)
    if Lam.shape != (n, n):
        raise ArgumentError("DtN matrix must be n x n")
    return (Lam + Lam.T) / 2


def _solve(A, B, p, layer):
    """Solve A X = B; singular A means the data is not from this topology."""
    if A.shape[0] == 0:
        return np.zeros((0,) + B.shape[1:], dtype=B.dtype)
    cond = np.linalg.cond(np.asarray(A, dtype=float))
    if A.dtype != object:
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise InconsistentDataError(f"singular block at node {p}, layer {layer} (cond={cond:.3g})", p, layer)
        return np.linalg.solve(A, B)
    try:
        X = mpmath.inverse(mpmath.matrix(A.tolist())) * mpmath.matrix(B.tolist())
    except ZeroDivisionError as exc:
        raise InconsistentDataError(f"singular block at node {p}, layer {layer}", p, layer) from exc
    return np.array(X.tolist(), dtype=object).reshape(B.shape)


def _special(Lam, p, cols, Z, C, layer):
    """Lambda[p, cols] - Lambda[p, C] Lambda[Z, C]^{-1} Lambda[Z, cols]; 1-based indices."""
    p0 = p - 1
    c0 = [c - 1 for c in cols]
    out = Lam[p0, c0]
    if Z:
        Z0 = [z - 1 for z in Z]
        C0 = [c - 1 for c in C]
        X = _solve(Lam[np.ix_(Z0, C0)], Lam[np.ix_(Z0, c0)], p, layer)
        out = out - Lam[p0, C0] @ X
    return out


def _zeros(shape, like):
    if like.dtype == object:
        return np.array([[mpmath.mpf(0)] * shape[1] for _ in range(shape[0])], dtype=object).reshape(shape)
    return np.zeros(shape)


def _finish(graph, gamma, Lam0, diagnostics, dps):
    gamma = np.array([float(g) for g in gamma])
    if np.any(np.isnan(gamma)):
        raise InconsistentDataError("peeling left conductances unassigned")
    if np.any(gamma <= 0):
        k = int(np.argmin(gamma))
        raise InconsistentDataError(f"non-positive conductance {gamma[k]:.3g} recovered on edge {k}", k, None)
    net = ResistorNetwork(graph, gamma)
    refit = dtn_map(net, dps=dps)
    residual = float(np.max(np.abs(np.asarray(refit - Lam0, dtype=float))))
    return RecoveredNetwork(net, residual, diagnostics)


def _coord_lookup(graph: NetworkGraph):
    return {(int(round(x)), int(round(-y))): i for i, (x, y) in enumerate(graph.coords)}


def _edge_lookup(graph: NetworkGraph):
    return {tuple(sorted(map(int, e))): k for k, e in enumerate(graph.edges)}


# ---------------------------------------------------------------------------
# pyramidal networks


def peel_pyramidal(Lam, n: int, dps: int | None = None) -> RecoveredNetwork:
    """Recover a pyramidal network with n = 2 m boundary nodes from its DtN map.

    For each boundary node v_p the conductances of its horizontal and vertical
    edges follow from blocks of the current DtN map with the index sets
    Z, C, H, V; the DtN map of the network with the outer layer removed is
    then formed from the Kirchhoff blocks of that layer.  The projector keeps
    every boundary row except those of v_1 and v_n, which makes the projected
    boundary-to-next-layer block triangular and invertible.

    Parameters
    ----------
    Lam : (n, n) array
        DtN map in boundary order v_1..v_n (float or mpf entries).
    n : int
        Even number of boundary nodes.
    dps : int, optional
        Work in mpmath arithmetic with this many digits.
    """
    if n < 2 or n % 2:
        raise ArgumentError("peel_pyramidal needs even n >= 2")
    ctx = mpmath.workdps(dps) if dps else nullcontext()
    with ctx:
        Lam = _as_working(Lam, n, dps)
        Lam0 = Lam.copy()
        graph = build_pyramidal(n)
        at = _coord_lookup(graph)
        eidx = _edge_lookup(graph)
        R = n // 2
        gamma = [np.nan] * graph.n_edges
        absent = []
        layer = 0
        while True:
            m = Lam.shape[0] // 2
            t = layer
            gh, gv = [None] * (2 * m), [None] * (2 * m)
            for p in range(1, 2 * m + 1):
                if p <= m:
                    Z = [j for j in range(1, m + 1) if j != p]
                    C = list(range(m + 2, 2 * m + 1))
                    H = list(range(1, p + 1))
                    V = list(range(p, m + 2))
                else:
                    Z = [j for j in range(m + 1, 2 * m + 1) if j != p]
                    C = list(range(1, m))
                    H = list(range(p, 2 * m + 1))
                    V = list(range(m, p + 1))
                gh[p - 1] = _special(Lam, p, H, Z, C, layer).sum()
                gv[p - 1] = _special(Lam, p, V, Z, C, layer).sum()
            for p in range(1, 2 * m + 1):
                if p <= m:
                    y = R + 1 - p
                    x, hx = R + 1 - y + t, R + 2 - y + t
                else:
                    y = p - m + t
                    x, hx = R + y - t, R + y - t - 1
                node = at[(x, y)]
                gamma[eidx[tuple(sorted((node, at[(hx, y)])))]] = gh[p - 1]
                below = at.get((x, y + 1))
                if below is not None:
                    gamma[eidx[tuple(sorted((node, below)))]] = gv[p - 1]
                else:
                    absent.append(abs(float(gv[p - 1])))
            if m == 1:
                break
            nb, ns = 2 * m, 2 * m - 2
            K_BB = _zeros((nb, nb), Lam)
            K_BS = _zeros((nb, ns), Lam)
            K_SS = _zeros((ns, ns), Lam)

            def connect(b, s, g):
                K_BB[b, b] += g
                K_SS[s, s] += g
                K_BS[b, s] -= g

            for p in range(1, m + 1):
                if p <= m - 1:
                    connect(p - 1, p - 1, gh[p - 1])
                if p >= 2:
                    connect(p - 1, p - 2, gv[p - 1])
            for p in range(m + 1, 2 * m + 1):
                mirror = 2 * m + 1 - p
                if mirror <= m - 1:
                    connect(p - 1, 2 * m - 2 - mirror, gh[p - 1])
                if mirror >= 2:
                    connect(p - 1, 2 * m - 1 - mirror, gv[p - 1])
            g_top = gh[m - 1]
            K_BB[m - 1, m - 1] += g_top
            K_BB[m, m] += g_top
            K_BB[m - 1, m] -= g_top
            K_BB[m, m - 1] -= g_top
            keep = list(range(1, nb - 1))
            PK = K_BS[keep]
            X = _solve((Lam - K_BB)[np.ix_(keep, keep)], PK, 0, layer)
            Lam = -K_SS - PK.T @ X
            Lam = (Lam + Lam.T) / 2
            layer += 1
        diagnostics = {"layers": layer + 1, "absent_edge_max": max(absent) if absent else 0.0}
        return _finish(graph, gamma, Lam0, diagnostics, dps)


# ---------------------------------------------------------------------------
# two-sided networks


def peel_two_sided(Lam, n: int, dps: int | None = None) -> RecoveredNetwork:
    """Recover a two-sided network T_n, n = 2 m, from its DtN map.

    The bottom chain of horizontal boundary edges is removed first with the
    boundary-edge formula.  Rounds of vertical spikes (boundary-spike
    formula) then alternate with rounds of horizontal boundary edges on the
    top and bottom rows, shrinking the index windows by two each time, until
    the last layer is reached: vertical edges read off the diagonal for odd
    m, a horizontal chain on the shared middle row for even m.

    Index sets wrap around cyclically.  Removing spikes with conductances D
    maps the DtN map Lambda to D (D - Lambda)^{-1} D - D.  When the final
    spikes of even m meet on the middle row, the top and bottom spike of a
    column share their inner endpoint and the update is taken through the
    2m x m copy matrix E instead.
    """
    if n < 4 or n % 2:
        raise ArgumentError("peel_two_sided needs even n >= 4")
    m = n // 2
    ctx = mpmath.workdps(dps) if dps else nullcontext()
    with ctx:
        Lam = _as_working(Lam, n, dps)
        Lam0 = Lam.copy()
        graph = build_two_sided(n)
        at = _coord_lookup(graph)
        eidx = _edge_lookup(graph)
        gamma = [np.nan] * graph.n_edges
        duplicate_gap = 0.0

        def cyc(i):
            return (i - 1) % n + 1

        def node_of(p, top, bottom):
            return at[(p, top)] if p <= m else at[(2 * m + 1 - p, bottom)]

        def set_edge(a, b, value):
            gamma[eidx[tuple(sorted((a, b)))]] = value

        def chain_laplacian(weights):
            A = _zeros((m, m), Lam)
            for i, w in weights.items():
                A[i, i] += w
                A[i + 1, i + 1] += w
                A[i, i + 1] -= w
                A[i + 1, i] -= w
            return A

        def edge_formula(p, q, Z, C, layer):
            return -_special(Lam, p, [q], Z, C, layer)[0]

        top, bottom = 0, m
        layer = 0
        # (1) bottom chain of horizontal boundary edges
        weights = {}
        for p in range(m + 2, 2 * m + 1):
            Z = [cyc(p + i) for i in range(1, m)]
            C = [cyc(p - i) for i in range(2, m + 1)]
            g = edge_formula(p, p - 1, Z, C, layer)
            set_edge(node_of(p, top, bottom), node_of(p - 1, top, bottom), g)
            weights[p - m - 2] = g  # local index along the bottom block
        Lam = Lam.copy()
        Lam[m:, m:] = Lam[m:, m:] - chain_laplacian(weights)
        s = m - 1
        while True:
            # (3) vertical spikes
            layer += 1
            spikes = []
            for p in range(1, n + 1):
                L = [cyc(p - i) for i in range(1, s + 1)]
                Rr = [cyc(p + i) for i in range(1, s + 1)]
                use_left = (p <= m and p < m / 2) or (p > m and p > 3 * m / 2)
                Z, C = (L, Rr) if use_left else (Rr, L)
                spikes.append(_special(Lam, p, [p], Z, C, layer)[0])
            for p in range(1, n + 1):
                if p <= m:
                    set_edge(at[(p, top)], at[(p, top + 1)], spikes[p - 1])
                else:
                    x = 2 * m + 1 - p
                    set_edge(at[(x, bottom)], at[(x, bottom - 1)], spikes[p - 1])
            top, bottom = top + 1, bottom - 1
            D = np.diag(spikes) if Lam.dtype != object else _diag_obj(spikes)
            if top == bottom:
                # shared middle row: Lambda = D - D E (E^T D E + Lambda_row)^{-1} E^T D
                E = _zeros((n, m), Lam)
                for p in range(1, n + 1):
                    E[p - 1, (p if p <= m else 2 * m + 1 - p) - 1] += 1
                Dinv = np.diag([1 / d for d in spikes]) if Lam.dtype != object else _diag_obj([1 / d for d in spikes])
                Minv_full = Dinv @ (D - Lam) @ Dinv
                EtE_inv = np.diag([1 / float(2)] * m) if Lam.dtype != object else _diag_obj([mpmath.mpf(1) / 2] * m)
                Minv = EtE_inv @ E.T @ Minv_full @ E @ EtE_inv
                M = _solve(Minv, _eye(m, Lam), 0, layer)
                Lam_row = M - E.T @ D @ E
                for x in range(1, m):
                    set_edge(at[(x, top)], at[(x + 1, top)], -Lam_row[x - 1, x])
                duplicate_gap = max(duplicate_gap, float(np.max(np.abs(np.asarray(Lam_row.sum(axis=1), dtype=float)))))
                break
            Lam = D @ _solve(D - Lam, D, 0, layer) - D
            Lam = (Lam + Lam.T) / 2
            if s == 1:
                break
            s -= 2
            # (5) horizontal boundary edges on the top and bottom rows
            layer += 1
            found = {}
            for p in range(1, n + 1):
                use_left = (p <= m and p < m / 2) or (p > m and p < 3 * m / 2)
                if use_left:
                    Z = [cyc(p - i) for i in range(1, s + 1)]
                    C = [cyc(p + i) for i in range(2, s + 2)]
                    q = p + 1
                else:
                    # mirror image of the windows above, so that q is in neither set
                    Z = [cyc(p + i) for i in range(1, s + 1)]
                    C = [cyc(p - i) for i in range(2, s + 2)]
                    q = p - 1
                if q < 1 or q > n or (p <= m) != (q <= m):
                    continue
                key = (min(p, q), max(p, q))
                g = edge_formula(p, q, Z, C, layer)
                if key in found:
                    duplicate_gap = max(duplicate_gap, abs(float(g - found[key])) / abs(float(found[key])))
                else:
                    found[key] = g
            top_w, bot_w = {}, {}
            for (p, q), g in found.items():
                set_edge(node_of(p, top, bottom), node_of(q, top, bottom), g)
                if p <= m:
                    top_w[p - 1] = g
                else:
                    bot_w[p - m - 1] = g
            Lam = Lam.copy()
            Lam[:m, :m] = Lam[:m, :m] - chain_laplacian(top_w)
            Lam[m:, m:] = Lam[m:, m:] - chain_laplacian(bot_w)
            if s == 0:
                break
        if top != bottom:
            # (7) odd m: remaining vertical edges between adjacent rows
            for x in range(1, m + 1):
                set_edge(at[(x, top)], at[(x, bottom)], Lam[x - 1, x - 1])
        diagnostics = {"duplicate_gap": duplicate_gap}
        return _finish(graph, gamma, Lam0, diagnostics, dps)


def _diag_obj(values):
    k = len(values)
    out = np.array([[mpmath.mpf(0)] * k for _ in range(k)], dtype=object)
    for i, v in enumerate(values):
        out[i, i] = v
    return out


def _eye(k, like):
    if like.dtype == object:
        return _diag_obj([mpmath.mpf(1)] * k)
    return np.eye(k)


def flip_two_sided(Lam, n: int, dps: int | None = None) -> RecoveredNetwork:
    """Fit T_n turned upside down to the same data.

    The boundary order is reversed, T_n is peeled, and the result is returned
    on the mirrored graph (horizontal boundary chain on top) with the
    original boundary order, so its DtN map refits ``Lam`` directly.
    """
    Lam = np.asarray(Lam)
    rev = np.arange(n)[::-1]
    rec = peel_two_sided(Lam[np.ix_(rev, rev)], n, dps=dps)
    g = rec.network.graph
    m = n // 2
    nI = g.n_interior
    perm = np.arange(g.n_nodes)
    perm[nI:] = nI + (n - 1 - np.arange(n))  # old boundary slot -> new slot
    edges = perm[g.edges]
    coords = np.empty_like(g.coords)
    coords[perm] = np.column_stack([g.coords[:, 0], -(m + g.coords[:, 1])])
    flipped = NetworkGraph("two-sided-flipped", n, nI, edges, g.kinds, coords, {"m": m})
    net = ResistorNetwork(flipped, rec.gamma)
    ctx = mpmath.workdps(dps) if dps else nullcontext()
    with ctx:
        refit = dtn_map(net, dps=dps)
        residual = float(np.max(np.abs(np.asarray(refit - _as_working(Lam, n, dps), dtype=float))))
    return RecoveredNetwork(net, residual, dict(rec.diagnostics, flipped=True))
