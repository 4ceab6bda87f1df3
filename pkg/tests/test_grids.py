import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from eitnet.errors import ArgumentError, DomainError, InconsistentDataError
from eitnet.grids import (
    GridSteps,
    StaggeredGrid,
    check_interlacing,
    coordinate_z,
    coordinate_zhat,
    layer_count,
    make_grid,
    optimal_grid_electrodes,
    optimal_grid_interpolation,
    radii_from_steps,
    steps_from_radii,
    truncated_measure_grid,
)

FEASIBLE = [(5, 1), (7, 0), (9, 1), (11, 0), (13, 1), (15, 0), (17, 1)]


def strictly_interlaced(primary, dual, hbar):
    """Independent restatement of the ordering rule, element by element."""
    l = len(primary) - 1
    if hbar == 1:
        seq = [1.0]
        for j in range(1, l + 1):
            seq += [dual[j], primary[j]]
    else:
        seq = [1.0]
        for j in range(1, l):
            seq += [primary[j], dual[j]]
        seq.append(primary[l])
    return primary[0] == 1.0 and dual[0] == 1.0 and all(a > b for a, b in zip(seq, seq[1:]))


class TestCoordinates:
    def test_boundary_is_zero(self):
        assert coordinate_z(1.0) == 0.0

    def test_reference_is_minus_log(self):
        assert coordinate_z(np.exp(-1)) == pytest.approx(1.0, rel=1e-12)

    def test_constant_two(self):
        assert coordinate_z(0.5, lambda r: 2.0 + 0 * r) == pytest.approx(0.5 * np.log(2), rel=1e-10)
        assert coordinate_zhat(0.5, lambda r: 2.0 + 0 * r) == pytest.approx(2 * np.log(2), rel=1e-10)

    def test_variable_conductivity_against_quadrature(self):
        sigma = lambda r: 1 + r**2
        oracle, _ = integrate.quad(lambda t: 1 / (t * sigma(t)), 0.3, 1, epsabs=0, epsrel=1e-13)
        assert coordinate_z(0.3, sigma) == pytest.approx(oracle, rel=1e-10)

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_monotone_decreasing(self, r1, r2):
        sigma = lambda r: 1 + 0.5 * np.sin(3 * r) ** 2
        if r1 < r2:
            assert coordinate_z(r1, sigma) > coordinate_z(r2, sigma)

    @pytest.mark.parametrize("r", [0.0, -0.5, 1.5])
    def test_radius_outside_domain(self, r):
        with pytest.raises(DomainError):
            coordinate_z(r)

    def test_nonpositive_conductivity(self):
        with pytest.raises(DomainError):
            coordinate_z(0.5, lambda r: r - 0.8)


class TestSteps:
    def test_zero_steps_give_unit_radii(self):
        primary, dual = radii_from_steps(GridSteps([0.0, 0.0], [0.0, 0.0]))
        assert np.all(primary == 1) and np.all(dual == 1)

    def test_single_log_two_step(self):
        primary, _ = radii_from_steps(GridSteps([np.log(2)], [0.1]))
        assert primary[1] == pytest.approx(0.5, rel=1e-15)

    @given(st.lists(st.floats(0.01, 3.0), min_size=2, max_size=16), st.sampled_from([0, 1]))
    def test_radii_round_trip(self, values, hbar):
        l = len(values) // 2
        steps = GridSteps(values[:l], values[l : 2 * l], hbar)
        primary, dual = radii_from_steps(steps)
        back = steps_from_radii(primary, dual, hbar)
        np.testing.assert_allclose(back.alpha, steps.alpha, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(back.alpha_hat, steps.alpha_hat, rtol=1e-12, atol=1e-14)

    @given(st.lists(st.floats(0.01, 3.0), min_size=2, max_size=16), st.sampled_from([0, 1]))
    def test_coefficient_round_trip(self, values, hbar):
        l = len(values) // 2
        steps = GridSteps(values[:l], values[l : 2 * l], hbar)
        back = GridSteps.from_coefficients(steps.coefficients(), hbar)
        assert np.array_equal(back.alpha, steps.alpha) and np.array_equal(back.alpha_hat, steps.alpha_hat)

    def test_shape_mismatch(self):
        with pytest.raises(ArgumentError):
            GridSteps([1.0, 2.0], [1.0])


class TestLayerCount:
    @pytest.mark.parametrize("n,hbar", FEASIBLE)
    def test_criticality(self, n, hbar):
        l = layer_count(n, hbar)
        assert 2 * l + hbar - 1 == (n - 1) // 2

    @pytest.mark.parametrize("n,hbar", [(5, 0), (7, 1), (9, 0), (8, 1), (1, 1), (6, 0)])
    def test_infeasible(self, n, hbar):
        with pytest.raises(ArgumentError):
            layer_count(n, hbar)


class TestOptimalGrid:
    def test_five_points_closed_form(self):
        steps = optimal_grid_interpolation(5, 1)
        h = 2 * np.pi / 5
        assert steps.alpha[0] == pytest.approx(h / np.tan(np.pi / 5), rel=1e-14)
        assert steps.alpha_hat[0] == pytest.approx(h / np.tan(2 * np.pi / 5), rel=1e-14)

    @pytest.mark.parametrize("n", [5, 9, 13, 17, 21, 25])
    def test_rational_route_matches_closed_form(self, n):
        closed = optimal_grid_interpolation(n, 1, method="closed")
        rational = optimal_grid_interpolation(n, 1, method="rational")
        np.testing.assert_allclose(rational.alpha, closed.alpha, rtol=1e-8)
        np.testing.assert_allclose(rational.alpha_hat, closed.alpha_hat, rtol=1e-8)

    @pytest.mark.parametrize("n,hbar", FEASIBLE)
    def test_interlacing(self, n, hbar):
        steps = optimal_grid_interpolation(n, hbar)
        primary, dual = radii_from_steps(steps)
        assert strictly_interlaced(primary, dual, hbar)
        check_interlacing(primary, dual, hbar)

    def test_twenty_five_points_has_six_layers(self):
        grid = make_grid(25, optimal_grid_interpolation(25, 1))
        assert grid.l == 6 and len(grid.primary_radii) == 7
        assert strictly_interlaced(grid.primary_radii, grid.dual_radii, 1)

    def test_closed_form_only_for_hbar_one(self):
        with pytest.raises(ArgumentError):
            optimal_grid_interpolation(7, 0, method="closed")

    @pytest.mark.parametrize("n,hbar,width", [(5, 1, 1.0), (7, 0, 0.5), (9, 1, 0.75)])
    def test_electrode_grid_positive(self, n, hbar, width):
        steps = optimal_grid_electrodes(n, hbar, width=width)
        assert steps.is_positive()
        assert strictly_interlaced(*radii_from_steps(steps), hbar)

    @pytest.mark.parametrize("n", [9, 13])
    def test_electrode_data_without_positive_grid(self, n):
        # sinc-weighted reference data admit no positive interpolating grid here
        with pytest.raises(InconsistentDataError):
            optimal_grid_electrodes(n, 1, width=1.0)

    def test_interlacing_violation_detected(self):
        with pytest.raises(ArgumentError):
            check_interlacing([1.0, 0.5], [1.0, 0.4], 1)


class TestTruncatedMeasureGrid:
    def test_one_layer(self):
        steps = truncated_measure_grid(1)
        assert steps.alpha_hat[0] == pytest.approx(0.5, rel=1e-14)
        assert steps.alpha[0] == pytest.approx(8 / np.pi**2, rel=1e-14)

    def test_six_layers_reproduce_reference_spectrum(self):
        # build the tridiagonal matrix from the steps and eigensolve it directly
        steps = truncated_measure_grid(6)
        a, ah = steps.alpha, steps.alpha_hat
        l = 6
        A = np.zeros((l, l))
        for i in range(l):
            A[i, i] = -1 / (ah[i] * a[i]) - (1 / (ah[i] * a[i - 1]) if i else 0)
            if i + 1 < l:
                A[i, i + 1] = 1 / (ah[i] * a[i])
                A[i + 1, i] = 1 / (ah[i + 1] * a[i])
        evals, vecs = np.linalg.eig(-A)
        order = np.argsort(evals.real)
        delta = np.sqrt(evals.real[order])
        np.testing.assert_allclose(delta, np.pi * (np.arange(1, 7) - 0.5), rtol=1e-10)

    @pytest.mark.parametrize("l", [1, 5, 16, 40, 64])
    def test_monotone_relation(self, l):
        steps = truncated_measure_grid(l)
        seq = np.column_stack([steps.alpha_hat, steps.alpha]).ravel()
        assert np.all(np.diff(seq) > 0)

    def test_invalid_layer_count(self):
        with pytest.raises(ArgumentError):
            truncated_measure_grid(0)


class TestSerialization:
    def test_json_round_trip(self):
        grid = make_grid(13, optimal_grid_interpolation(13, 1))
        data = json.loads(grid.to_json())
        assert set(data) >= {"n", "l", "hbar", "primary_radii", "dual_radii"}
        assert np.all(np.diff(data["primary_radii"]) < 0)
        back = StaggeredGrid.from_json(grid.to_json())
        np.testing.assert_array_equal(back.primary_radii, grid.primary_radii)
        np.testing.assert_array_equal(back.dual_radii, grid.dual_radii)

    def test_angles(self):
        grid = make_grid(9, optimal_grid_interpolation(9, 1))
        np.testing.assert_allclose(np.diff(grid.primary_angles), 2 * np.pi / 9)
        np.testing.assert_allclose(grid.dual_angles - grid.primary_angles, np.pi / 9)

    def test_csv_rows(self):
        grid = make_grid(9, optimal_grid_interpolation(9, 1))
        lines = grid.to_csv().strip().splitlines()
        assert len(lines) == grid.l + 2
