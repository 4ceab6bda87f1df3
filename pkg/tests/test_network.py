import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eitnet.errors import ArgumentError, StructuralError
from eitnet.network import (
    NetworkGraph,
    ResistorNetwork,
    assemble_kirchhoff,
    build_circular,
    build_pyramidal,
    build_two_sided,
    check_dtn_consistency,
    circular_pairs,
    dtn_jacobian,
    dtn_map,
    harmonic_extension,
    offdiag_vector,
    solve_dirichlet,
    y_delta,
)

FEASIBLE = [(5, 1), (7, 0), (9, 1), (11, 0), (13, 1)]


def y_network(a, b, c):
    graph = NetworkGraph("custom", 3, 1, [(0, 1), (0, 2), (0, 3)], ("y",) * 3,
                         [(0, 0), (1, 0), (-0.5, 0.8), (-0.5, -0.8)])
    return ResistorNetwork(graph, [a, b, c])


def single_edge(gamma):
    graph = NetworkGraph("custom", 2, 0, [(0, 1)], ("e",), [(0, 0), (1, 0)])
    return ResistorNetwork(graph, [gamma])


def random_network(graph, seed, low=0.1, high=10.0):
    return ResistorNetwork(graph, np.random.default_rng(seed).uniform(low, high, graph.n_edges))


def schur_oracle(net):
    """Dense Schur complement through an explicit inverse."""
    K = np.zeros((net.graph.n_nodes,) * 2)
    for (a, b), g in zip(net.graph.edges, net.gamma):
        K[a, b] -= g
        K[b, a] -= g
        K[a, a] += g
        K[b, b] += g
    m = net.graph.n_interior
    return K[m:, m:] - K[m:, :m] @ np.linalg.inv(K[:m, :m]) @ K[:m, m:]


class TestKirchhoff:
    def test_single_edge(self):
        K = assemble_kirchhoff(single_edge(3.0)).K
        np.testing.assert_array_equal(K, [[3, -3], [-3, 3]])

    def test_y_network_diagonal(self):
        K = assemble_kirchhoff(y_network(1.0, 2.0, 4.0)).K
        np.testing.assert_array_equal(np.diag(K), [7, 1, 2, 4])

    @pytest.mark.parametrize("n,hbar", FEASIBLE)
    def test_invariants(self, n, hbar):
        net = random_network(build_circular(n, hbar), n)
        K = assemble_kirchhoff(net).K
        np.testing.assert_allclose(K, K.T)
        np.testing.assert_allclose(K.sum(axis=1), 0, atol=1e-12)
        for (a, b), g in zip(net.graph.edges, net.gamma):
            assert K[a, b] == -g

    def test_sparse_format(self):
        net = random_network(build_circular(9, 1), 0)
        dense = assemble_kirchhoff(net).K
        sp = assemble_kirchhoff(net, sparse_format=True).K
        np.testing.assert_array_equal(sp.toarray(), dense)


class TestDtn:
    def test_no_interior(self):
        np.testing.assert_allclose(dtn_map(single_edge(2.0)), [[2, -2], [-2, 2]])

    def test_y_network(self):
        a, b, c = 1.0, 2.0, 3.0
        L = dtn_map(y_network(a, b, c))
        s = a + b + c
        assert L[0, 1] == pytest.approx(-a * b / s)
        assert L[0, 2] == pytest.approx(-a * c / s)
        assert L[1, 2] == pytest.approx(-b * c / s)

    def test_series_chain(self):
        graph = NetworkGraph("custom", 2, 1, [(0, 1), (0, 2)], ("e", "e"), [(0, 0), (1, 0), (-1, 0)])
        L = dtn_map(ResistorNetwork(graph, [1.0, 1.0]))
        assert L[0, 1] == pytest.approx(-0.5)

    @pytest.mark.parametrize("builder", [lambda: build_circular(9, 1), lambda: build_pyramidal(7),
                                         lambda: build_two_sided(10)])
    def test_against_explicit_inverse(self, builder):
        net = random_network(builder(), 3)
        np.testing.assert_allclose(dtn_map(net), schur_oracle(net), rtol=1e-10, atol=1e-12)

    @given(st.integers(0, 10**6), st.sampled_from(FEASIBLE))
    def test_symmetric_null_space(self, seed, nh):
        net = random_network(build_circular(*nh), seed)
        L = dtn_map(net)
        scale = np.abs(L).max()
        assert np.abs(L - L.T).max() <= 1e-13 * scale
        assert np.abs(L.sum(axis=1)).max() <= 1e-12 * scale

    def test_extended_precision(self):
        net = random_network(build_pyramidal(6), 1)
        Lm = dtn_map(net, dps=30)
        np.testing.assert_allclose(np.array(Lm, dtype=float), dtn_map(net), rtol=1e-12, atol=1e-13)

    def test_disconnected_interior_rejected(self):
        graph = NetworkGraph("custom", 2, 2, [(0, 1), (2, 3)], ("e", "e"), [(0, 0), (1, 0), (2, 0), (3, 0)])
        with pytest.raises(StructuralError):
            dtn_map(ResistorNetwork(graph, [1.0, 1.0]))

    def test_jacobian_finite_differences(self):
        net = random_network(build_circular(7, 0), 4, 0.5, 2.0)
        J = dtn_jacobian(net)
        for e in (0, 5, 11):
            g = net.gamma.copy()
            step = 1e-6 * g[e]
            g[e] += step
            plus = offdiag_vector(dtn_map(ResistorNetwork(net.graph, g)))
            g[e] -= 2 * step
            minus = offdiag_vector(dtn_map(ResistorNetwork(net.graph, g)))
            np.testing.assert_allclose(J[:, e], (plus - minus) / (2 * step), rtol=1e-5, atol=1e-9)


class TestDirichlet:
    def test_constant_data(self):
        net = random_network(build_circular(9, 1), 0)
        U_I, J_B = solve_dirichlet(net, np.full(9, 2.5))
        np.testing.assert_allclose(U_I, 2.5)
        np.testing.assert_allclose(J_B, 0, atol=1e-12)

    def test_ohm(self):
        _, J = solve_dirichlet(single_edge(2.0), [1.0, 0.0])
        np.testing.assert_allclose(J, [2, -2])

    @given(st.integers(0, 10**6))
    def test_maximum_principle(self, seed):
        rng = np.random.default_rng(seed)
        net = random_network(build_circular(9, 1), seed)
        u = rng.normal(size=9)
        U_I, J_B = solve_dirichlet(net, u)
        assert U_I.min() >= u.min() - 1e-12 and U_I.max() <= u.max() + 1e-12
        np.testing.assert_allclose(J_B, dtn_map(net) @ u, atol=1e-10)

    def test_harmonic_extension_columns(self):
        net = random_network(build_pyramidal(6), 2)
        U = harmonic_extension(net)
        for p in range(6):
            U_I, _ = solve_dirichlet(net, np.eye(6)[p])
            np.testing.assert_allclose(U[: net.graph.n_interior, p], U_I, atol=1e-12)


class TestYDelta:
    def test_symmetric_star(self):
        out = y_delta(y_network(3.0, 3.0, 3.0), 0)
        np.testing.assert_allclose(out.gamma, 1.0)

    def test_asymmetric_star(self):
        out = y_delta(y_network(1.0, 2.0, 3.0), 0)
        got = {tuple(sorted(e)): g for e, g in zip(out.graph.edges, out.gamma)}
        assert got[(0, 1)] == pytest.approx(2 / 6)
        assert got[(0, 2)] == pytest.approx(3 / 6)
        assert got[(1, 2)] == pytest.approx(6 / 6)

    @given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10))
    def test_invariance_star(self, a, b, c):
        net = y_network(a, b, c)
        np.testing.assert_allclose(dtn_map(y_delta(net, 0)), dtn_map(net), rtol=1e-12, atol=1e-14)

    @given(st.integers(0, 10**6))
    def test_invariance_pyramid(self, seed):
        net = random_network(build_pyramidal(8), seed)
        L = dtn_map(net)
        nodes = np.nonzero(net.graph.degree()[: net.graph.n_interior] == 3)[0]
        moved = dtn_map(y_delta(net, int(nodes[seed % nodes.size])))
        assert np.abs(moved - L).max() <= 1e-12 * np.abs(L).max()

    def test_wrong_degree(self):
        net = random_network(build_circular(9, 1), 0)
        with pytest.raises(ArgumentError):
            y_delta(net, 0)

    def test_boundary_node_rejected(self):
        with pytest.raises(ArgumentError):
            y_delta(y_network(1.0, 1.0, 1.0), 2)


class TestConsistency:
    @pytest.mark.parametrize("builder", [lambda: build_circular(9, 1), lambda: build_pyramidal(9),
                                         lambda: build_two_sided(8)])
    def test_constructed_networks_pass(self, builder):
        report = check_dtn_consistency(dtn_map(random_network(builder(), 7)))
        assert report.ok and report.exhaustive and report.first_violation is None

    def test_positive_offdiagonal_flagged(self):
        L = dtn_map(random_network(build_circular(7, 0), 1))
        L[0, 3] = L[3, 0] = abs(L[0, 3])
        L[0, 0] = -L[0, 1:].sum()
        L[3, 3] = -(L[3].sum() - L[3, 3])
        report = check_dtn_consistency(L)
        assert not report.circular_minors_nonpositive
        assert report.failures() == ["circular_minors_nonpositive"]

    def test_row_sums_flagged(self):
        L = dtn_map(random_network(build_circular(5, 1), 1))
        L[0, 0] += 1.0
        assert "rows_sum_zero" in check_dtn_consistency(L).failures()

    def test_sampling_above_limit(self):
        report = check_dtn_consistency(dtn_map(random_network(build_circular(13, 1), 3)), samples=50)
        assert report.ok and not report.exhaustive

    def test_circular_pairs_count(self):
        # C(n, 2k) subsets, 2k rotations each
        n, k = 7, 2
        pairs = list(circular_pairs(n, k))
        assert len(pairs) == len(list(itertools.combinations(range(n), 2 * k))) * 2 * k
        for P, Q in pairs:
            assert len(set(P) | set(Q)) == 2 * k


class TestBuilders:
    @pytest.mark.parametrize("n,hbar", FEASIBLE)
    def test_circular_edge_count(self, n, hbar):
        g = build_circular(n, hbar)
        assert g.n_edges == n * (n - 1) // 2
        assert g.is_connected()

    def test_circular_five(self):
        g = build_circular(5, 1)
        assert g.meta["l"] == 1 and g.n_edges == 10

    @pytest.mark.parametrize("n", [2, 3, 6, 7, 10])
    def test_pyramidal_counts(self, n):
        g = build_pyramidal(n)
        assert g.n == n and g.n_edges == n * (n - 1) // 2 and g.is_connected()

    def test_pyramidal_bottom_row(self):
        g = build_pyramidal(6)
        bottom = g.coords[:, 1].min()
        on_bottom = np.nonzero(g.coords[:, 1] == bottom)[0]
        assert np.sum(on_bottom < g.n_interior) == 6 - 2

    @pytest.mark.parametrize("n", [4, 8, 10, 12])
    def test_two_sided_counts(self, n):
        g = build_two_sided(n)
        assert g.n == n and g.n_edges == n * (n - 1) // 2 and g.is_connected()

    @pytest.mark.parametrize("bad", [lambda: build_circular(8, 1), lambda: build_circular(7, 1),
                                     lambda: build_pyramidal(1), lambda: build_two_sided(9)])
    def test_infeasible(self, bad):
        with pytest.raises(ArgumentError):
            bad()

    def test_json_round_trip(self):
        net = random_network(build_two_sided(8), 0)
        back = ResistorNetwork.from_json(net.to_json())
        np.testing.assert_array_equal(back.gamma, net.gamma)
        np.testing.assert_array_equal(back.graph.edges, net.graph.edges)
        np.testing.assert_allclose(dtn_map(back), dtn_map(net))

    def test_nonpositive_conductance(self):
        with pytest.raises(ArgumentError):
            ResistorNetwork(build_circular(5, 1), np.r_[np.ones(9), 0.0])
