"""Acceptance suite: one test per criterion, each printing a pass/fail line."""

import time

import numpy as np
import pytest

from eitnet.forward import ConductivityField, ElectrodeSet, FineGrid, flux_eigenvalues, measure_dtn, phantom
from eitnet.grids import GridSteps, check_interlacing, radii_from_steps, truncated_measure_grid
from eitnet.invert import gauss_newton, gauss_newton_step, reconstruction_mapping, recover_network
from eitnet.maps import fit_mobius_one_sided, pull_back_electrodes, push_forward_conductivity
from eitnet.network import (
    ResistorNetwork,
    build_pyramidal,
    build_two_sided,
    check_dtn_consistency,
    dtn_map,
    y_delta,
)
from eitnet.peeling import peel_pyramidal, peel_two_sided
from eitnet.spectral import (
    continued_fraction_eval,
    lumped_reference_samples,
    mean_potential_spectral_data,
    partial_fractions,
    reconstruct_layered,
    spectral_data_of,
    steps_from_samples,
)

pytestmark = pytest.mark.acceptance


def _cot_steps(n):
    """Cotangent closed form evaluated independently of the package."""
    h = 2 * np.pi / n
    l = ((n - 1) // 2) // 2
    j = np.arange(1, l + 1)
    return h / np.tan(h * (2 * l - 2 * j + 1) / 2), h / np.tan(h * (2 * l - 2 * j + 2) / 2)


def test_criterion_01_reference_eigenvalues(criterion):
    t0 = time.perf_counter()
    one = ConductivityField.constant(1.0)
    ks = np.arange(1, 7)
    fine = np.abs(flux_eigenvalues(one, ks, FineGrid(512, 256)) - ks).max()
    coarse = np.abs(flux_eigenvalues(one, ks, FineGrid(256, 128)) - ks).max()
    elapsed = time.perf_counter() - t0
    ratio = coarse / fine
    ok = fine <= 1e-3 and ratio >= 3 and elapsed < 30
    criterion(1, "reference eigenvalues f(k^2) = |k|", ok,
              f"max err {fine:.2e}, refinement ratio {ratio:.2f}, {elapsed:.1f}s")


def test_criterion_02_closed_form_optimal_grid(criterion):
    t0 = time.perf_counter()
    errs, interlaced = [], True
    for n in (13, 25):
        x, F = lumped_reference_samples(n, dps=50)
        steps = steps_from_samples(x, F, hbar=1, dps=50)
        alpha, alpha_hat = _cot_steps(n)
        errs.append(max(np.abs(steps.alpha - alpha).max(), np.abs(steps.alpha_hat - alpha_hat).max()))
        primary, dual = radii_from_steps(steps)
        try:
            check_interlacing(primary, dual, 1)
        except Exception:
            interlaced = False
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 1e-8 and interlaced and elapsed < 1
    criterion(2, "rational interpolation grid equals cotangent formulas", ok,
              f"max step err {max(errs):.2e}, interlaced {interlaced}, {elapsed:.2f}s")


def test_criterion_03_truncated_measure_grid(criterion):
    t0 = time.perf_counter()
    non_monotone = []
    for l in range(1, 65):
        s = truncated_measure_grid(l)
        seq = np.column_stack([s.alpha_hat, s.alpha]).ravel()
        if not np.all(np.diff(seq) > 0):
            non_monotone.append(l)
    l = 32
    s = truncated_measure_grid(l)
    j = np.arange(2, l - 1)
    dev = np.abs(s.alpha[j - 1] * np.pi * np.sqrt(l**2 - j**2) / 2 - 1).max()
    elapsed = time.perf_counter() - t0
    ok = not non_monotone and dev <= 0.25 and elapsed < 5
    criterion(3, "truncated-measure monotonicity and asymptote", ok,
              f"non-monotone l {non_monotone}, asymptote dev {dev:.3f}, {elapsed:.2f}s")


def test_criterion_04_continued_fraction_partial_fractions(criterion):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        l = int(rng.integers(1, 9))
        steps = GridSteps(rng.uniform(0.05, 3, l), rng.uniform(0.05, 3, l), 1)
        lam = 10 ** rng.uniform(-3, 3, 20)
        sd = partial_fractions(steps)
        direct = continued_fraction_eval(steps, lam)
        pf = (sd.xi[None, :] / (lam[:, None] + sd.delta[None, :] ** 2)).sum(axis=1)
        worst = max(worst, np.abs(direct / pf - 1).max())
    criterion(4, "continued fraction equals partial fractions", worst <= 1e-10, f"max rel {worst:.2e}")


def test_criterion_05_peeling_exactness(criterion):
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    gamma_err = refit = 0.0
    for i in range(100):
        if i < 50:
            n = (6, 8, 10)[i % 3]
            graph, peel = build_pyramidal(n), peel_pyramidal
        else:
            n = (8, 10, 12)[i % 3]
            graph, peel = build_two_sided(n), peel_two_sided
        gamma = rng.uniform(0.1, 10, graph.n_edges)
        net = ResistorNetwork(graph, gamma)
        rec = peel(dtn_map(net, dps=40), n, dps=40)
        gamma_err = max(gamma_err, np.abs(rec.gamma / gamma - 1).max())
        lam = dtn_map(net)
        refit = max(refit, np.abs(dtn_map(rec.network) - lam).max() / np.abs(lam).max())
    elapsed = time.perf_counter() - t0
    ok = gamma_err <= 1e-8 and refit <= 1e-9 and elapsed < 60
    criterion(5, "layer peeling recovers pyramidal and two-sided networks", ok,
              f"gamma rel {gamma_err:.2e}, refit {refit:.2e}, {elapsed:.1f}s")


def test_criterion_06_y_delta_and_minors(criterion):
    rng = np.random.default_rng(6)
    worst_yd = 0.0
    moves = 0
    for graph in (build_pyramidal(8), build_two_sided(10)):
        net = ResistorNetwork(graph, rng.uniform(0.1, 10, graph.n_edges))
        lam = dtn_map(net)
        for node in np.nonzero(graph.degree()[: graph.n_interior] == 3)[0]:
            moved = dtn_map(y_delta(net, int(node)))
            worst_yd = max(worst_yd, np.abs(moved - lam).max() / np.abs(lam).max())
            moves += 1
    report = check_dtn_consistency(measure_dtn(phantom("smooth"), 9).matrix, tol=1e-10)
    ok = moves > 0 and worst_yd <= 1e-12 and report.exhaustive and report.circular_minors_nonpositive
    criterion(6, "Y-Delta invariance and circular minor signs", ok,
              f"{moves} moves, max dev {worst_yd:.1e}; {report.minors_checked} minors, worst {report.worst_minor:.2e}")


def test_criterion_07_mean_potential_point_values(criterion):
    fd_worst = geo_worst = 0.0
    for qbar in (0.5, 1.0, 2.0):
        for l in range(2, 13):
            rec = reconstruct_layered(mean_potential_spectral_data(qbar, l), l)
            ref = rec.reference
            assert rec.steps.l == l
            kinds = np.array(rec.kinds)
            sigma = rec.values[kinds == "p"]
            sigma_dual = rec.values[kinds == "d"]
            roots = np.sqrt(sigma)
            a, ah = ref.alpha, ref.alpha_hat
            res = [abs(sigma[0] - 1), abs((roots[1] - roots[0]) / a[0] / ah[0] - qbar * roots[0])]
            for j in range(1, l - 1):
                flux = (roots[j + 1] - roots[j]) / a[j] - (roots[j] - roots[j - 1]) / a[j - 1]
                res.append(abs(flux / ah[j] - qbar * roots[j]))
            fd_worst = max(fd_worst, max(res))
            geo_worst = max(geo_worst, np.abs(sigma_dual[:-1] - np.sqrt(sigma[:-1] * sigma[1:])).max())
    ok = fd_worst <= 1e-9 and geo_worst <= 1e-9
    criterion(7, "mean-potential point values solve the finite-difference scheme", ok,
              f"scheme residual {fd_worst:.2e}, geometric mean dev {geo_worst:.2e}")


def test_criterion_08_layered_convergence(criterion):
    t0 = time.perf_counter()

    def sigma(z):
        return 1 + 0.3 * np.sin(np.pi * np.asarray(z))

    zz = np.linspace(0, 1, 200001)
    errors = []
    for l in (4, 6, 8, 12, 16):
        rec = reconstruct_layered(spectral_data_of(sigma, l))
        errors.append(float(np.trapezoid(np.abs(rec(zz) - sigma(zz)), zz)))
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(np.diff(errors) <= 0)) and errors[-1] <= 0.05 and elapsed < 120
    criterion(8, "layered reconstruction error non-increasing in l", ok,
              "L1 " + ", ".join(f"{e:.4f}" for e in errors) + f", {elapsed:.1f}s")


def test_criterion_09_reconstruction_identity(criterion):
    n = 9
    electrodes = ElectrodeSet.uniform(n)
    grid = FineGrid.for_electrodes(electrodes, n_theta=256, n_r=128)
    reference = measure_dtn(ConductivityField.constant(), electrodes=electrodes, grid=grid)
    result = reconstruction_mapping(reference, reference)
    exact = bool(np.all(result.values == 1.0))
    gamma_ref = recover_network(reference.matrix, "circular").gamma
    kappa0 = np.zeros(grid.n_nodes)
    kappa, residual, info = gauss_newton_step(kappa0, reference.matrix, gamma_ref, electrodes, grid=grid)
    no_step = (not info["accepted"]) and residual == 0.0 and np.array_equal(kappa, kappa0)
    criterion(9, "reconstruction mapping and Gauss-Newton fix the reference", exact and no_step,
              f"Q values all 1: {exact}, zero step: {no_step}")


def test_criterion_10_one_step_improvement(criterion):
    t0 = time.perf_counter()
    n = 13
    electrodes = ElectrodeSet.uniform(n)
    grid = FineGrid.for_electrodes(electrodes)
    data = measure_dtn(phantom("smooth"), electrodes=electrodes, grid=grid)
    reference = measure_dtn(ConductivityField.constant(), electrodes=electrodes, grid=grid)
    result = gauss_newton(data, reference, electrodes, steps=2, grid=grid, stop_rel=0.0)
    trace = result.trace
    changes = result.diagnostics["field_changes"]
    elapsed = time.perf_counter() - t0
    ok = (len(trace) == 3 and trace[1] <= 0.5 * trace[0] and len(changes) == 2
          and changes[1] < 0.1 * changes[0] and elapsed < 300)
    criterion(10, "first Gauss-Newton step does most of the work", ok,
              f"trace {', '.join(f'{t:.2e}' for t in trace)}, changes {', '.join(f'{c:.3g}' for c in changes)}, "
              f"{elapsed:.0f}s")


def test_criterion_11_conformal_setup(criterion):
    n = 9
    target = np.pi * (n - 1) / n
    endpoint = 0.0
    invariance = 0.0
    smooth = phantom("smooth")
    electrodes = ElectrodeSet.uniform(n)
    off = ~np.eye(n, dtype=bool)
    for beta in (np.pi / 4, np.pi / 2, 3 * np.pi / 4):
        mobius = fit_mobius_one_sided(beta, n)
        endpoint = max(endpoint, abs(mobius.inverse_angle(beta) - target), abs(mobius.inverse_angle(-beta) + target))
        mapped = measure_dtn(push_forward_conductivity(smooth, mobius), electrodes=electrodes,
                             grid=FineGrid(512, 256)).matrix
        pulled = pull_back_electrodes(electrodes, mobius)
        original = measure_dtn(smooth, electrodes=pulled, grid=FineGrid.for_electrodes(pulled)).matrix
        invariance = max(invariance, np.abs(mapped - original)[off].max() / np.abs(mapped[off]).max())
    ok = endpoint <= 1e-12 and invariance <= 1e-3
    criterion(11, "Moebius fit and DtN invariance under the conformal map", ok,
              f"endpoint residual {endpoint:.1e}, DtN rel dev {invariance:.2e}")
