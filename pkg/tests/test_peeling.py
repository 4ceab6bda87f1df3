import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitnet.errors import ArgumentError, InconsistentDataError
from eitnet.network import ResistorNetwork, build_circular, build_pyramidal, build_two_sided, dtn_map
from eitnet.peeling import flip_two_sided, peel_pyramidal, peel_two_sided


def synthesize(graph, gamma, dps=None):
    net = ResistorNetwork(graph, gamma)
    return net, dtn_map(net, dps=dps)


def max_rel(a, b):
    return float(np.max(np.abs(np.asarray(a) / np.asarray(b) - 1)))


class TestPyramidal:
    def test_unit_conductances(self):
        g = build_pyramidal(6)
        _, L = synthesize(g, np.ones(g.n_edges))
        rec = peel_pyramidal(L, 6)
        assert max_rel(rec.gamma, 1.0) <= 1e-10

    @pytest.mark.parametrize("seed", range(5))
    def test_random_double_precision(self, seed):
        g = build_pyramidal(6)
        gamma = np.random.default_rng(seed).uniform(0.5, 2, g.n_edges)
        _, L = synthesize(g, gamma)
        rec = peel_pyramidal(L, 6)
        assert max_rel(rec.gamma, gamma) <= 1e-8
        assert np.abs(dtn_map(rec.network) - L).max() <= 1e-9
        assert rec.residual <= 1e-9

    @settings(max_examples=15)
    @given(st.sampled_from([2, 4, 6, 8, 10, 12]), st.integers(0, 10**6))
    def test_round_trip_extended_precision(self, n, seed):
        g = build_pyramidal(n)
        gamma = np.random.default_rng(seed).uniform(0.1, 10, g.n_edges)
        _, L = synthesize(g, gamma, dps=40)
        rec = peel_pyramidal(L, n, dps=40)
        assert max_rel(rec.gamma, gamma) <= 1e-8
        assert rec.residual <= 1e-9

    def test_wrong_topology_rejected(self):
        g = build_circular(9, 1)
        _, L = synthesize(g, np.ones(g.n_edges))
        with pytest.raises(InconsistentDataError):
            peel_pyramidal(L[:8, :8], 8)

    def test_shape_checked(self):
        with pytest.raises(ArgumentError):
            peel_pyramidal(np.zeros((5, 5)), 6)


class TestTwoSided:
    def test_unit_conductances(self):
        g = build_two_sided(10)
        _, L = synthesize(g, np.ones(g.n_edges))
        rec = peel_two_sided(L, 10)
        assert max_rel(rec.gamma, 1.0) <= 1e-10

    @pytest.mark.parametrize("seed", range(5))
    def test_random_double_precision(self, seed):
        g = build_two_sided(8)
        gamma = np.random.default_rng(seed).uniform(0.5, 2, g.n_edges)
        _, L = synthesize(g, gamma)
        rec = peel_two_sided(L, 8)
        assert max_rel(rec.gamma, gamma) <= 1e-8
        assert np.abs(dtn_map(rec.network) - L).max() <= 1e-9

    @settings(max_examples=15)
    @given(st.sampled_from([4, 6, 8, 10, 12]), st.integers(0, 10**6))
    def test_round_trip_extended_precision(self, n, seed):
        g = build_two_sided(n)
        gamma = np.random.default_rng(seed).uniform(0.1, 10, g.n_edges)
        _, L = synthesize(g, gamma, dps=40)
        rec = peel_two_sided(L, n, dps=40)
        assert max_rel(rec.gamma, gamma) <= 1e-8
        assert rec.residual <= 1e-9

    @pytest.mark.parametrize("n", [8, 10])
    def test_flipped_network_fits_same_data(self, n):
        g = build_two_sided(n)
        gamma = np.random.default_rng(n).uniform(0.5, 2, g.n_edges)
        _, L = synthesize(g, gamma, dps=40)
        flipped = flip_two_sided(L, n, dps=40)
        assert flipped.network.graph.topology == "two-sided-flipped"
        assert np.all(flipped.gamma > 0)
        assert flipped.residual <= 1e-9
        Lf = np.array(L, dtype=float)
        assert np.abs(dtn_map(flipped.network) - Lf).max() <= 1e-9 * np.abs(Lf).max()

    def test_flip_of_flip_data(self):
        # data of the mirrored network are recovered on the mirrored graph exactly
        g = build_two_sided(8)
        gamma = np.random.default_rng(1).uniform(0.5, 2, g.n_edges)
        _, L = synthesize(g, gamma, dps=40)
        flipped = flip_two_sided(L, 8, dps=40)
        Lf = dtn_map(flipped.network, dps=40)
        again = flip_two_sided(Lf, 8, dps=40)
        assert max_rel(again.gamma, flipped.gamma) <= 1e-8

    def test_wrong_topology_rejected(self):
        g = build_circular(9, 1)
        _, L = synthesize(g, np.ones(g.n_edges))
        with pytest.raises(InconsistentDataError):
            peel_two_sided(L[:8, :8], 8)
