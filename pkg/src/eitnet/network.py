"""Resistor networks: graphs, Kirchhoff matrices and discrete DtN maps.

Nodes are numbered interior-first, then boundary.  Boundary nodes are stored
in circular order, so the DtN matrix rows follow that order too.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as spla

from .errors import ArgumentError, StructuralError
from .grids import GridSteps, layer_count, make_grid

__all__ = [
    "NetworkGraph",
    "ResistorNetwork",
    "KirchhoffMatrix",
    "ConsistencyReport",
    "build_circular",
    "build_pyramidal",
    "build_two_sided",
    "assemble_kirchhoff",
    "dtn_map",
    "solve_dirichlet",
    "harmonic_extension",
    "dtn_jacobian",
    "y_delta",
    "circular_pairs",
    "check_dtn_consistency",
    "layered_conductances",
    "offdiag_vector",
]


@dataclass(frozen=True)
class NetworkGraph:
    """Graph with boundary nodes in circular order.

    ``edges`` is an (E, 2) integer array; ``kinds`` gives each edge an
    orientation label (radial, angular, horizontal or vertical); ``coords``
    holds a drawing position per node.  Nodes 0..n_interior-1 are interior and
    n_interior..n_nodes-1 are the boundary nodes v_1..v_n.
    """

    topology: str
    n: int
    n_interior: int
    edges: np.ndarray
    kinds: tuple
    coords: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)
        c = np.asarray(self.coords, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if len(self.kinds) != e.shape[0]:
            raise ArgumentError("one kind label per edge is required")
        if np.any(e[:, 0] == e[:, 1]):
            raise ArgumentError("self loops are not allowed")
        key = np.sort(e, axis=1)
        if np.unique(key, axis=0).shape[0] != key.shape[0]:
            raise ArgumentError("duplicate edges")
        if e.size and (e.min() < 0 or e.max() >= self.n_nodes):
            raise ArgumentError("edge endpoint out of range")

    @property
    def n_nodes(self) -> int:
        return self.n_interior + self.n

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def boundary(self) -> np.ndarray:
        return np.arange(self.n_interior, self.n_nodes)

    @property
    def interior(self) -> np.ndarray:
        return np.arange(self.n_interior)

    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes)

    def is_connected(self) -> bool:
        adj = sparse.coo_matrix(
            (np.ones(self.n_edges), (self.edges[:, 0], self.edges[:, 1])), shape=(self.n_nodes,) * 2
        )
        ncomp, _ = sparse.csgraph.connected_components(adj, directed=False)
        return ncomp == 1


@dataclass(frozen=True)
class ResistorNetwork:
    """A graph with a positive conductance on each edge."""

    graph: NetworkGraph
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float).copy()
        if g.shape != (self.graph.n_edges,):
            raise ArgumentError("one conductance per edge is required")
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise ArgumentError("conductances must be positive")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    def to_json(self) -> str:
        g = self.graph
        return json.dumps(
            {
                "topology": g.topology,
                "n": g.n,
                "nodes": [
                    {"id": i, "boundary": bool(i >= g.n_interior), "x": float(g.coords[i, 0]), "y": float(g.coords[i, 1])}
                    for i in range(g.n_nodes)
                ],
                "edges": [
                    {"i": int(a), "j": int(b), "gamma": float(c), "kind": k}
                    for (a, b), c, k in zip(g.edges, self.gamma, g.kinds)
                ],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ResistorNetwork":
        d = json.loads(text)
        nodes = sorted(d["nodes"], key=lambda v: v["id"])
        n_int = sum(1 for v in nodes if not v["boundary"])
        graph = NetworkGraph(
            d["topology"],
            d["n"],
            n_int,
            [(e["i"], e["j"]) for e in d["edges"]],
            tuple(e.get("kind", "") for e in d["edges"]),
            [(v["x"], v["y"]) for v in nodes],
        )
        return cls(graph, [e["gamma"] for e in d["edges"]])


@dataclass(frozen=True)
class KirchhoffMatrix:
    """Weighted graph Laplacian with interior-first block structure."""

    K: object  # dense ndarray or scipy sparse matrix
    n_interior: int

    def _block(self, rows, cols):
        K = self.K
        sub = K[rows][:, cols]
        return sub.toarray() if sparse.issparse(sub) else np.asarray(sub)

    @property
    def II(self):
        m = self.n_interior
        return self.K[:m, :m]

    @property
    def IB(self):
        m = self.n_interior
        return self.K[:m, m:]

    @property
    def BI(self):
        m = self.n_interior
        return self.K[m:, :m]

    @property
    def BB(self):
        m = self.n_interior
        return self.K[m:, m:]


# ---------------------------------------------------------------------------
# graph builders


def _relabel(topology, n, nodes, boundary_order, edges, kinds, meta):
    """Renumber nodes interior-first; ``nodes`` maps key -> coordinates."""
    bset = set(boundary_order)
    interior = [k for k in nodes if k not in bset]
    order = interior + list(boundary_order)
    index = {k: i for i, k in enumerate(order)}
    e = [(index[a], index[b]) for a, b in edges]
    coords = [nodes[k] for k in order]
    graph = NetworkGraph(topology, n, len(interior), e, tuple(kinds), coords, meta)
    if not graph.is_connected():
        raise StructuralError("graph is not connected")
    return graph


def build_circular(n: int, hbar: int = 1, steps: GridSteps | None = None) -> NetworkGraph:
    """Circular network on a staggered polar grid.

    Layers 1..l carry n nodes each (layer 1 is the boundary); the innermost
    primary layer l+1 collapses to a single center node.  Radial edges join
    consecutive layers along each primary angle; angular edges join
    neighbouring nodes of layers 1..l (hbar = 1) or 2..l (hbar = 0).  The edge
    count is n (2 l + hbar - 1) = n (n - 1) / 2.  ``steps`` only sets the
    drawing radii (default: the optimal grid).
    """
    l = layer_count(n, hbar)
    if steps is None:
        from .grids import optimal_grid_interpolation

        steps = optimal_grid_interpolation(n, hbar)
    grid = make_grid(n, steps)
    radii = grid.primary_radii
    theta = grid.primary_angles
    nodes = {}
    for j in range(1, l + 1):
        for q in range(n):
            nodes[(j, q)] = (radii[j - 1] * np.cos(theta[q]), radii[j - 1] * np.sin(theta[q]))
    nodes["c"] = (0.0, 0.0)
    edges, kinds, info = [], [], []
    for j in range(1, l + 1):
        for q in range(n):
            inner = (j + 1, q) if j < l else "c"
            edges.append(((j, q), inner))
            kinds.append("radial")
            info.append((j, q))
    first_ring = 1 if hbar == 1 else 2
    for j in range(first_ring, l + 1):
        for q in range(n):
            edges.append(((j, q), (j, (q + 1) % n)))
            kinds.append("angular")
            info.append((j, q))
    boundary = [(1, q) for q in range(n)]
    meta = {"l": l, "hbar": hbar, "edge_layer_angle": info}
    return _relabel("circular", n, nodes, boundary, edges, kinds, meta)


def build_pyramidal(n: int) -> NetworkGraph:
    """Pyramidal network with n boundary nodes.

    Rows y = 1..R of a square lattice, R = ceil(n / 2), row y holding
    L_1 + 2 (y - 1) nodes (L_1 = 2 for even n, 1 for odd n) centred under the
    apex.  The two ends of every row are boundary nodes; they are numbered up
    the left flank from the bottom, then down the right flank.  Horizontal
    edges join row neighbours and vertical edges join each node to the node
    below it.  The n - 2 interior nodes of the bottom row close the gap
    between v_1 and v_n.
    """
    if n < 2:
        raise ArgumentError("pyramidal networks need n >= 2")
    R = (n + 1) // 2
    L1 = 2 if n % 2 == 0 else 1
    nodes = {}
    rows = []
    for y in range(1, R + 1):
        x0 = R + 1 - y
        xs = list(range(x0, x0 + L1 + 2 * (y - 1)))
        rows.append(xs)
        for x in xs:
            nodes[(x, y)] = (float(x), float(-y))
    left = [(rows[y - 1][0], y) for y in range(R, 0, -1)]
    right = [(rows[y - 1][-1], y) for y in range(1, R + 1)]
    if L1 == 1:
        boundary = left[:-1] + [left[-1]] + right[1:]
    else:
        boundary = left + right
    if len(boundary) != n:
        raise StructuralError("pyramid boundary count mismatch")
    edges, kinds = [], []
    for y, xs in enumerate(rows, start=1):
        for x in xs[:-1]:
            edges.append(((x, y), (x + 1, y)))
            kinds.append("horizontal")
    for y, xs in enumerate(rows[:-1], start=1):
        for x in xs:
            edges.append(((x, y), (x, y + 1)))
            kinds.append("vertical")
    return _relabel("pyramidal", n, nodes, boundary, edges, kinds, {"rows": R})


def build_two_sided(n: int) -> NetworkGraph:
    """Two-sided network T_n, n = 2 m.

    An m-column lattice with rows 0..m.  Row 0 holds the top boundary nodes
    v_1..v_m (left to right), row m the bottom boundary nodes v_{m+1}..v_{2m}
    (right to left); rows 1..m-1 are interior and their end nodes separate the
    two sides.  Vertical edges join consecutive rows in every column,
    horizontal edges join neighbours in rows 1..m (so the bottom boundary
    nodes are chained and the top ones are not).
    """
    if n < 4 or n % 2:
        raise ArgumentError("two-sided networks need even n >= 4")
    m = n // 2
    nodes = {(x, y): (float(x), float(-y)) for x in range(1, m + 1) for y in range(0, m + 1)}
    boundary = [(x, 0) for x in range(1, m + 1)] + [(x, m) for x in range(m, 0, -1)]
    edges, kinds = [], []
    for y in range(1, m + 1):
        for x in range(1, m):
            edges.append(((x, y), (x + 1, y)))
            kinds.append("horizontal")
    for y in range(0, m):
        for x in range(1, m + 1):
            edges.append(((x, y), (x, y + 1)))
            kinds.append("vertical")
    return _relabel("two-sided", n, nodes, boundary, edges, kinds, {"m": m})


def layered_conductances(graph: NetworkGraph, steps: GridSteps) -> np.ndarray:
    """Conductances h / alpha_j (radial) and alpha_hat_j / h (angular) of a layered network."""
    if graph.topology != "circular":
        raise ArgumentError("layered conductances are defined on circular graphs")
    h = 2.0 * np.pi / graph.n
    gamma = np.empty(graph.n_edges)
    for e, (kind, (j, _)) in enumerate(zip(graph.kinds, graph.meta["edge_layer_angle"])):
        gamma[e] = h / steps.alpha[j - 1] if kind == "radial" else steps.alpha_hat[j - 1] / h
    return gamma


# ---------------------------------------------------------------------------
# Kirchhoff matrix and DtN map

_DENSE_LIMIT = 2000


def assemble_kirchhoff(net: ResistorNetwork, sparse_format: bool | None = None) -> KirchhoffMatrix:
    """K_ij = -gamma(E_ij) off the diagonal, rows summing to zero."""
    g = net.graph
    N = g.n_nodes
    a, b = g.edges[:, 0], g.edges[:, 1]
    w = net.gamma
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([b, a, a, b])
    vals = np.concatenate([-w, -w, w, w])
    K = sparse.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    if sparse_format is None:
        sparse_format = N > _DENSE_LIMIT
    return KirchhoffMatrix(K if sparse_format else K.toarray(), g.n_interior)


def _interior_solver(kirch: KirchhoffMatrix):
    KII = kirch.II
    if kirch.n_interior == 0:
        return lambda rhs: np.zeros((0,) + np.shape(rhs)[1:])
    if sparse.issparse(KII):
        try:
            lu = spla.splu(sparse.csc_matrix(KII))
        except RuntimeError as exc:
            raise StructuralError("interior block is singular (disconnected interior)") from exc
        return lambda rhs: lu.solve(np.asarray(rhs, dtype=float))
    try:
        cf = linalg.cho_factor(KII)
    except linalg.LinAlgError as exc:
        raise StructuralError("interior block is singular (disconnected interior)") from exc
    return lambda rhs: linalg.cho_solve(cf, rhs)


def _dense_block(M):
    return M.toarray() if sparse.issparse(M) else np.asarray(M)


def dtn_map(net: ResistorNetwork, dps: int | None = None) -> np.ndarray:
    """Schur complement K_BB - K_BI K_II^{-1} K_IB.

    With ``dps`` the complement is formed in mpmath arithmetic at that many
    digits and returned as an object array of mpf values.
    """
    if dps is not None:
        return _dtn_map_mp(net, dps)
    kirch = assemble_kirchhoff(net)
    solve = _interior_solver(kirch)
    KIB = _dense_block(kirch.IB)
    Lam = _dense_block(kirch.BB) - _dense_block(kirch.BI) @ solve(KIB)
    return 0.5 * (Lam + Lam.T)


def _dtn_map_mp(net: ResistorNetwork, dps: int) -> np.ndarray:
    import mpmath

    g = net.graph
    with mpmath.workdps(dps):
        K = mpmath.zeros(g.n_nodes, g.n_nodes)
        for (a, b), w in zip(g.edges, net.gamma):
            w = mpmath.mpf(float(w))
            a, b = int(a), int(b)
            K[a, b] -= w
            K[b, a] -= w
            K[a, a] += w
            K[b, b] += w
        m = g.n_interior
        N = g.n_nodes
        KBB = K[m:N, m:N]
        if m:
            X = mpmath.inverse(K[0:m, 0:m]) * K[0:m, m:N]
            KBB = KBB - K[m:N, 0:m] * X
        out = np.array(KBB.tolist(), dtype=object)
    return out


def solve_dirichlet(net: ResistorNetwork, u_B):
    """Interior potentials U_I = -K_II^{-1} K_IB u_B and boundary currents J_B."""
    kirch = assemble_kirchhoff(net)
    solve = _interior_solver(kirch)
    u_B = np.asarray(u_B, dtype=float)
    U_I = -solve(kirch.IB @ u_B)
    J_B = kirch.BB @ u_B + kirch.BI @ U_I
    return np.asarray(U_I), np.asarray(J_B)


def harmonic_extension(net: ResistorNetwork) -> np.ndarray:
    """Potentials at all nodes (rows) for unit boundary data at each boundary node (columns)."""
    kirch = assemble_kirchhoff(net)
    solve = _interior_solver(kirch)
    U_I = -solve(_dense_block(kirch.IB))
    return np.vstack([np.asarray(U_I).reshape(net.graph.n_interior, net.graph.n), np.eye(net.graph.n)])


def offdiag_vector(M: np.ndarray) -> np.ndarray:
    """Strict upper triangle of M, row by row."""
    iu = np.triu_indices(M.shape[0], 1)
    return M[iu]


def dtn_jacobian(net: ResistorNetwork) -> np.ndarray:
    """Derivatives of the upper off-diagonal DtN entries with respect to each conductance.

    d Lambda_pq / d gamma_e = (U_p(a) - U_p(b)) (U_q(a) - U_q(b)) for edge e = (a, b),
    where U_p is the potential induced by unit boundary data at v_p.
    """
    U = harmonic_extension(net)
    e = net.graph.edges
    dU = U[e[:, 0]] - U[e[:, 1]]  # (E, n)
    iu = np.triu_indices(net.graph.n, 1)
    return (dU[:, iu[0]] * dU[:, iu[1]]).T


def y_delta(net: ResistorNetwork, node: int) -> ResistorNetwork:
    """Replace a degree-3 interior node by a triangle with star-mesh conductances.

    gamma_pq = gamma_p gamma_q / (gamma_p + gamma_q + gamma_r).  A triangle
    edge that already exists is combined in parallel.
    """
    g = net.graph
    if not (0 <= node < g.n_interior):
        raise ArgumentError("y_delta needs an interior node")
    touching = np.nonzero((g.edges[:, 0] == node) | (g.edges[:, 1] == node))[0]
    if touching.size != 3:
        raise ArgumentError(f"node {node} has degree {touching.size}, not 3")
    nbrs = [int(g.edges[e, 1] if g.edges[e, 0] == node else g.edges[e, 0]) for e in touching]
    if len(set(nbrs)) != 3:
        raise ArgumentError("neighbours must be distinct")
    gs = net.gamma[touching]
    total = gs.sum()
    keep = np.setdiff1d(np.arange(g.n_edges), touching)
    edges = [tuple(g.edges[e]) for e in keep]
    kinds = [g.kinds[e] for e in keep]
    gamma = list(net.gamma[keep])
    lookup = {tuple(sorted(ed)): i for i, ed in enumerate(edges)}
    for (i, a), (j, b) in itertools.combinations(list(enumerate(nbrs)), 2):
        c = gs[i] * gs[j] / total
        key = tuple(sorted((a, b)))
        if key in lookup:
            gamma[lookup[key]] += c
        else:
            lookup[key] = len(edges)
            edges.append((a, b))
            kinds.append("delta")
            gamma.append(c)
    # drop the node and shift labels above it
    remap = np.arange(g.n_nodes)
    remap[node + 1:] -= 1
    edges = [(int(remap[a]), int(remap[b])) for a, b in edges]
    coords = np.delete(g.coords, node, axis=0)
    new_graph = NetworkGraph(g.topology, g.n, g.n_interior - 1, edges, tuple(kinds), coords, dict(g.meta))
    return ResistorNetwork(new_graph, gamma)


# ---------------------------------------------------------------------------
# consistency of measured DtN matrices


@dataclass
class ConsistencyReport:
    symmetric: bool
    rows_sum_zero: bool
    circular_minors_nonpositive: bool
    exhaustive: bool
    minors_checked: int
    worst_minor: float
    first_violation: tuple | None = None
    asymmetry: float = 0.0
    row_sum_max: float = 0.0

    @property
    def ok(self) -> bool:
        return self.symmetric and self.rows_sum_zero and self.circular_minors_nonpositive

    def failures(self) -> list:
        names = []
        if not self.symmetric:
            names.append("symmetric")
        if not self.rows_sum_zero:
            names.append("rows_sum_zero")
        if not self.circular_minors_nonpositive:
            names.append("circular_minors_nonpositive")
        return names


def circular_pairs(n: int, k: int):
    """All circular pairs (P, Q) of size k: p_1..p_k, q_k..q_1 in circular order."""
    for subset in itertools.combinations(range(n), 2 * k):
        for s in range(2 * k):
            rot = subset[s:] + subset[:s]
            yield rot[:k], rot[k:][::-1]


def _random_circular_pair(n, k, rng):
    subset = np.sort(rng.choice(n, size=2 * k, replace=False))
    s = int(rng.integers(2 * k))
    rot = np.concatenate([subset[s:], subset[:s]])
    return tuple(rot[:k]), tuple(rot[k:][::-1])


def check_dtn_consistency(M, n: int | None = None, tol: float = 1e-10, exhaustive_limit: int = 11,
                          samples: int = 500, seed: int = 0) -> ConsistencyReport:
    """Check symmetry, zero row sums and the sign of all circular minors.

    A DtN map has det(-M[P, Q]) >= 0 for every circular pair, which makes the
    circular minors of M non-positive in the sign-adjusted sense
    (-1)^k det M[P, Q] >= 0.  Determinants are compared with ``tol`` times
    max|M|^k.  Exhaustive for n <= ``exhaustive_limit``, else ``samples``
    random pairs per size.
    """
    M = np.asarray(M, dtype=float)
    if n is None:
        n = M.shape[0]
    if M.shape != (n, n):
        raise ArgumentError("matrix must be n x n")
    scale = max(np.max(np.abs(M)), 1e-300)
    asym = float(np.max(np.abs(M - M.T)) / scale)
    rowsum = float(np.max(np.abs(M.sum(axis=1))) / scale)
    rng = np.random.default_rng(seed)
    worst = np.inf
    first = None
    count = 0
    exhaustive = n <= exhaustive_limit
    for k in range(1, n // 2 + 1):
        pairs = circular_pairs(n, k) if exhaustive else (_random_circular_pair(n, k, rng) for _ in range(samples))
        for P, Q in pairs:
            d = np.linalg.det(-M[np.ix_(P, Q)]) / scale ** k
            count += 1
            if d < worst:
                worst = d
            if first is None and d < -tol:
                first = (tuple(int(p) for p in P), tuple(int(q) for q in Q), float(d))
    return ConsistencyReport(
        symmetric=asym <= 1e-8,
        rows_sum_zero=rowsum <= 1e-8,
        circular_minors_nonpositive=first is None,
        exhaustive=exhaustive,
        minors_checked=count,
        worst_minor=float(worst),
        first_violation=first,
        asymmetry=asym,
        row_sum_max=rowsum,
    )
