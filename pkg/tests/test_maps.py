import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eitnet.errors import ArgumentError, DomainError
from eitnet.forward import ConductivityField, ElectrodeSet
from eitnet.maps import (
    MobiusMap,
    boundary_correspondence,
    fit_mobius_one_sided,
    pull_back_electrodes,
    pull_back_reconstruction,
    push_forward_conductivity,
)


def disk_points(count, seed=0):
    rng = np.random.default_rng(seed)
    return np.sqrt(rng.uniform(0, 1, count)) * np.exp(1j * rng.uniform(-np.pi, np.pi, count))


class TestMobiusMap:
    def test_identity(self):
        z = disk_points(100)
        np.testing.assert_array_equal(MobiusMap().forward(z), z)

    @given(st.floats(-0.95, 0.95), st.floats(-0.95, 0.95), st.floats(0, 2 * np.pi))
    def test_inverse(self, re, im, omega):
        if abs(complex(re, im)) >= 0.95:
            return
        m = MobiusMap(complex(re, im), omega)
        z = disk_points(1000)
        assert np.abs(m.forward(m.inverse(z)) - z).max() <= 1e-12
        assert np.abs(m.inverse(m.forward(z)) - z).max() <= 1e-12

    def test_boundary_preserved(self):
        m = MobiusMap(0.4 - 0.3j, 1.0)
        w = m.forward(np.exp(1j * np.linspace(0, 2 * np.pi, 200)))
        np.testing.assert_allclose(np.abs(w), 1.0, rtol=1e-14)
        assert np.all(np.abs(m.forward(disk_points(200) * 0.99)) < 1)

    def test_zero_goes_to_parameter(self):
        m = MobiusMap(0.3 + 0.2j, 0.0)
        assert m.forward(0.3 + 0.2j) == pytest.approx(0.0, abs=1e-15)

    def test_angle_functions_are_inverse(self):
        m = MobiusMap(-0.6, 0.0)
        theta = np.linspace(-3, 3, 50)
        np.testing.assert_allclose(m.inverse_angle(m.forward_angle(theta)), theta, atol=1e-12)

    def test_parameter_outside_disk(self):
        with pytest.raises(ArgumentError):
            MobiusMap(1.0)

    def test_point_outside_disk(self):
        with pytest.raises(DomainError):
            MobiusMap(0.2).forward(1.5)

    def test_json_round_trip(self):
        m = MobiusMap(0.1 - 0.5j, 2.0)
        assert MobiusMap.from_json(m.to_json()) == m


class TestOneSidedFit:
    def test_full_circle_is_identity(self):
        assert fit_mobius_one_sided(np.pi, 9) == MobiusMap()

    @pytest.mark.parametrize("n", [5, 9, 13])
    @pytest.mark.parametrize("beta", [np.pi / 6, np.pi / 2, 0.9 * np.pi])
    def test_endpoint_condition(self, n, beta):
        m = fit_mobius_one_sided(beta, n)
        target = np.pi * (n - 1) / n
        assert abs(m.inverse_angle(beta) - target) <= 1e-12
        assert abs(m.inverse_angle(-beta) + target) <= 1e-12
        assert m.a.imag == 0 and m.omega == 0

    @pytest.mark.parametrize("beta", [0.0, -1.0, 4.0])
    def test_bad_arc(self, beta):
        with pytest.raises(ArgumentError):
            fit_mobius_one_sided(beta, 9)

    def test_even_n(self):
        with pytest.raises(ArgumentError):
            fit_mobius_one_sided(np.pi / 2, 8)

    def test_correspondence_on_arc(self):
        beta = np.pi / 2
        bc = boundary_correspondence(fit_mobius_one_sided(beta, 9), 9, beta)
        tau = np.sort(bc.tau)
        assert tau[0] == pytest.approx(-beta, abs=1e-12) and tau[-1] == pytest.approx(beta, abs=1e-12)
        assert np.all(np.diff(tau) > 0)
        gaps = np.diff(tau)
        # images crowd toward the middle of the arc
        half = gaps[: gaps.size // 2]
        assert np.all(np.diff(half) < 0)
        assert len(bc.to_csv().strip().splitlines()) == 10


class TestTransport:
    def test_constant_stays_constant(self):
        m = fit_mobius_one_sided(np.pi / 3, 9)
        pushed = push_forward_conductivity(ConductivityField.constant(2.0), m)
        z = disk_points(500)
        np.testing.assert_array_equal(pushed(np.abs(z), np.angle(z)), 2.0)

    def test_rotation(self):
        m = MobiusMap(0j, np.pi / 2)
        sigma = ConductivityField.from_xy(lambda x, y: 1 + x**2)
        pushed = push_forward_conductivity(sigma, m)
        # pushed(w) = sigma(i w): the point (0, 0.5) samples sigma at (-0.5, 0)
        assert pushed.at_xy(0.0, 0.5) == pytest.approx(1.25)

    def test_bump_moves_to_preimage(self):
        m = fit_mobius_one_sided(np.pi / 2, 9)
        sigma = ConductivityField.from_xy(lambda x, y: 1 + np.exp(-((x - 0.5) ** 2 + y**2) / 0.01))
        pushed = push_forward_conductivity(sigma, m)
        peak = m.inverse(0.5 + 0j)
        assert pushed.at_xy(peak.real, peak.imag) == pytest.approx(2.0, rel=1e-12)

    def test_pull_back_of_push_forward(self):
        m = MobiusMap(0.3 - 0.1j, 0.7)
        sigma = ConductivityField.from_xy(lambda x, y: 1 + x * y + 0.5 * x)
        pushed = push_forward_conductivity(sigma, m)
        back = pull_back_reconstruction(pushed.at_xy, m)
        z = disk_points(300) * 0.99
        np.testing.assert_allclose(back(z.real, z.imag), sigma.at_xy(z.real, z.imag), rtol=1e-12)

    def test_points_are_mapped(self):
        m = MobiusMap(0.2, 0.0)
        pts = disk_points(10) * 0.9
        _, mapped = pull_back_reconstruction(lambda x, y: x, m, pts)
        np.testing.assert_allclose(mapped, m.forward(pts))

    def test_pulled_back_electrodes(self):
        m = fit_mobius_one_sided(np.pi / 2, 9)
        E = ElectrodeSet.uniform(9)
        P = pull_back_electrodes(E, m)
        assert np.array_equal(P.heights, E.heights)
        assert np.all(np.abs((P.centers + np.pi) % (2 * np.pi) - np.pi) <= np.pi / 2 + 1e-12)
        np.testing.assert_allclose(m.inverse_angle(P.starts), E.starts, atol=1e-12)
