"""Command line driver: ``eit grid|forward|invert|run|selfcheck``."""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ArgumentError, EITError
from .forward import (
    ConductivityField,
    ElectrodeSet,
    FineGrid,
    MeasuredDtn,
    fourier_dtn_layered,
    lumped_dtn_layered,
    measure_dtn,
    phantom,
    phantom_names,
)
from .grids import make_grid, optimal_grid_electrodes, optimal_grid_interpolation, truncated_measure_grid
from .invert import (
    gauss_newton,
    optimal_grid_steps,
    optimal_points,
    reconstruction_mapping,
    recover_network,
    sensitivity_matrix,
)
from .io import Manifest, dumps_json, read_dtn, table_to_csv, write_dtn
from .maps import boundary_correspondence, fit_mobius_one_sided, pull_back_electrodes, pull_back_reconstruction

TOPOLOGIES = ("circular", "pyramidal", "two-sided")
SETUPS = ("full", "one-sided", "two-sided")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """One synthesize-invert-refine experiment."""

    phantom: str = "smooth"
    sigma: float = 1.0
    n: int = 13
    topology: str = "circular"
    setup: str = "full"
    beta: float = np.pi / 2
    grid: str = "optimal"
    gn_steps: int = 1
    n_theta: int = 512
    n_r: int = 256
    width: float = 0.5
    samples: int = 41
    seed: int = 0

    def validate(self) -> "ExperimentConfig":
        if self.phantom != "none" and self.phantom not in phantom_names():
            raise ArgumentError(f"unknown phantom {self.phantom!r}; known: none, {', '.join(phantom_names())}")
        if self.phantom == "none" and not self.sigma > 0:
            raise ArgumentError("constant conductivity must be positive")
        if self.topology not in TOPOLOGIES:
            raise ArgumentError(f"topology must be one of {TOPOLOGIES}")
        if self.setup not in SETUPS:
            raise ArgumentError(f"setup must be one of {SETUPS}")
        if self.topology == "circular" and self.n % 2 == 0:
            raise ArgumentError("circular networks need odd n")
        if self.topology != "circular" and self.n % 2:
            raise ArgumentError(f"{self.topology} networks need even n")
        if self.topology == "two-sided" and self.setup != "two-sided":
            raise ArgumentError("two-sided networks need the two-sided boundary setup")
        if self.topology == "pyramidal" and self.setup != "one-sided":
            raise ArgumentError("pyramidal networks need the one-sided boundary setup")
        if self.setup != "full" and not (0.0 < self.beta < np.pi):
            raise ArgumentError("arc half-width beta must lie in (0, pi)")
        if self.grid not in ("optimal", "sensitivity"):
            raise ArgumentError("grid must be optimal or sensitivity")
        if self.grid == "optimal" and self.topology != "circular":
            raise ArgumentError("optimal grids exist for circular networks only; use --grid sensitivity")
        if self.gn_steps < 0 or self.samples < 2:
            raise ArgumentError("gn_steps must be >= 0 and samples >= 2")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ArgumentError(f"unknown config keys: {', '.join(sorted(extra))}")
        return cls(**d).validate()

    def conductivity(self) -> ConductivityField:
        if self.phantom == "none":
            return ConductivityField.constant(self.sigma)
        return phantom(self.phantom)


def electrodes_for(cfg: ExperimentConfig) -> ElectrodeSet:
    """Electrodes in the coordinates where networks are fitted."""
    if cfg.setup == "two-sided":
        return ElectrodeSet.two_arcs(cfg.n, cfg.beta, cfg.width)
    if cfg.topology == "pyramidal":
        return ElectrodeSet.on_arc(cfg.n, 0.0, cfg.beta, cfg.width)
    return ElectrodeSet.uniform(cfg.n, cfg.width)


# ---------------------------------------------------------------------------
# output helpers


def _disk_samples(m: int):
    x = np.linspace(-1.0, 1.0, m)
    X, Y = np.meshgrid(x, x)
    keep = X**2 + Y**2 <= 1.0
    return X[keep], Y[keep]


def _fine_lookup(grid: FineGrid, values):
    """Nearest fine-node value at Cartesian points."""

    def f(x, y):
        r = np.hypot(x, y)
        th = np.arctan2(y, x) % (2 * np.pi)
        t = -np.log(np.maximum(r, 1e-300))
        ring = np.clip(np.searchsorted(grid.t, t), 0, grid.n_r)
        lower = np.clip(ring - 1, 0, grid.n_r)
        ring = np.where(np.abs(grid.t[lower] - t) < np.abs(grid.t[ring] - t), lower, ring)
        col = np.rint(th / grid.dtheta).astype(int) % grid.n_theta
        idx = np.where(ring >= grid.n_r, grid.center, ring * grid.n_theta + col)
        return np.asarray(values)[idx]

    return f


def _points_csv(points, values, kinds) -> str:
    rows = [(k, kind, float(p[0]), float(p[1]), float(v)) for k, (p, v, kind) in enumerate(zip(points, values, kinds))]
    return table_to_csv(("edge", "kind", "x", "y", "value"), rows)


def _field_csv(stages: dict, m: int) -> str:
    x, y = _disk_samples(m)
    rows = []
    for stage in sorted(stages):
        vals = stages[stage](x, y)
        rows += [(stage, float(a), float(b), float(v)) for a, b, v in zip(x, y, vals)]
    return table_to_csv(("stage", "x", "y", "value"), rows)


# ---------------------------------------------------------------------------
# pipeline


def run_experiment(cfg: ExperimentConfig, out: Path, figures: bool = False) -> Manifest:
    """Synthesize data, recover the network, map to point values, refine by Gauss-Newton."""
    cfg.validate()
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(out, asdict(cfg))
    sigma = cfg.conductivity()
    target = electrodes_for(cfg)
    mobius = None
    measure_with = target
    if cfg.setup == "one-sided" and cfg.topology == "circular":
        mobius = fit_mobius_one_sided(cfg.beta, cfg.n)
        measure_with = pull_back_electrodes(target, mobius)
        man.write_text("mobius.json", mobius.to_json() + "\n")
        man.write_text("correspondence.csv", boundary_correspondence(mobius, cfg.n, cfg.beta).to_csv())

    grid = FineGrid.for_electrodes(measure_with, cfg.n_theta, cfg.n_r)
    data = measure_dtn(sigma, electrodes=measure_with, grid=grid)
    reference = measure_dtn(ConductivityField.constant(1.0), electrodes=target,
                            grid=FineGrid.for_electrodes(target, cfg.n_theta, cfg.n_r))
    for name, meas in (("dtn.csv", data), ("reference.csv", reference)):
        for p in write_dtn(out / name, meas):
            man.add(p)

    ref_net = recover_network(reference, cfg.topology)
    if cfg.grid == "sensitivity":
        S = sensitivity_matrix(ConductivityField.constant(1.0), target, cfg.topology,
                               grid=FineGrid.for_electrodes(target, cfg.n_theta, cfg.n_r), recovered=ref_net)
        points = S.points
    else:
        points = optimal_points(ref_net.network.graph, cfg.width)
        grid_cont = make_grid(cfg.n, optimal_grid_steps(cfg.n, ref_net.network.graph.meta["hbar"], cfg.width))
        man.write_text("grid.json", grid_cont.to_json() + "\n")
        man.write_text("grid.csv", grid_cont.to_csv())

    fine_target = FineGrid.for_electrodes(target, cfg.n_theta, cfg.n_r)
    if cfg.gn_steps > 0:
        result = gauss_newton(data, reference, target, cfg.topology, steps=cfg.gn_steps, points=points, grid=fine_target)
    else:
        result = reconstruction_mapping(data, reference, cfg.topology, points=points, reference_network=ref_net)
    man.write_text("network.json", recover_network(data, cfg.topology).network.to_json() + "\n")
    man.write_text("reconstruction.json", result.to_json() + "\n")

    plot_points = result.points
    stages = {"qn": result.interpolant()}
    if result.fine_values is not None:
        stages["gn"] = _fine_lookup(result.fine_grid, result.fine_values)
    stages["true"] = lambda x, y: sigma.at_xy(x, y)
    if mobius is not None:
        stages = {k: (v if k == "true" else pull_back_reconstruction(v, mobius)) for k, v in stages.items()}
        mapped = mobius.forward(plot_points[:, 0] + 1j * plot_points[:, 1])
        plot_points = np.column_stack([mapped.real, mapped.imag])
    man.write_text("points.csv", _points_csv(plot_points, result.values, result.kinds))
    man.write_text("field.csv", _field_csv(stages, cfg.samples))
    man.write_text("trace.csv", table_to_csv(("step", "objective"), [(k, float(v)) for k, v in enumerate(result.trace)]))
    if figures:
        from .plotting import plot_field, plot_trace

        for stage, f in sorted(stages.items()):
            man.add(plot_field(out / f"field_{stage}.png", f, f"{sigma.name}: {stage}", points=plot_points))
        if len(result.trace) > 0:
            man.add(plot_trace(out / "trace.png", result.trace))
    man.write()
    return man


# ---------------------------------------------------------------------------
# self check


def _check(name, func):
    t0 = time.perf_counter()
    try:
        detail = func()
        ok = True
    except AssertionError as exc:
        ok, detail = False, str(exc) or "assertion failed"
    except Exception as exc:  # noqa: BLE001 - every failure is reported, none aborts the suite
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"check": name, "ok": ok, "detail": str(detail), "seconds": round(time.perf_counter() - t0, 3)}


def selfcheck(seed: int = 0, dtn_file: str | None = None) -> list[dict]:
    """Invariant suite at small sizes; every check returns a one-line detail."""
    from .network import (
        ResistorNetwork,
        build_circular,
        build_pyramidal,
        build_two_sided,
        check_dtn_consistency,
        dtn_map,
        y_delta,
    )
    from .peeling import peel_pyramidal, peel_two_sided
    from .invert import recover_circular
    from .spectral import continued_fraction_eval, partial_fractions
    from .grids import GridSteps, check_interlacing, radii_from_steps
    from .forward import flux_eigenvalues

    rng = np.random.default_rng(seed)
    checks = []

    def grid_closed_form():
        a = optimal_grid_interpolation(13, 1, method="closed")
        b = optimal_grid_interpolation(13, 1, method="rational")
        err = max(np.abs(a.alpha - b.alpha).max(), np.abs(a.alpha_hat - b.alpha_hat).max())
        assert err < 1e-8, f"closed form vs rational {err:.2e}"
        check_interlacing(*radii_from_steps(a), 1)
        return f"max step difference {err:.1e}"

    def continued_fraction():
        worst = 0.0
        for _ in range(20):
            l = int(rng.integers(1, 9))
            steps = GridSteps(rng.uniform(0.1, 2, l), rng.uniform(0.1, 2, l), 1)
            sd = partial_fractions(steps)
            for lam in rng.uniform(0.1, 10, 5):
                v = continued_fraction_eval(steps, lam)
                w = np.sum(sd.xi / (lam + sd.delta**2))
                worst = max(worst, abs(v - w) / abs(v))
        assert worst < 1e-10, f"relative mismatch {worst:.2e}"
        return f"max relative mismatch {worst:.1e}"

    def dtn_structure():
        g = build_circular(7, 0)
        L = dtn_map(ResistorNetwork(g, rng.uniform(0.5, 2, g.n_edges)))
        asym, rows = np.abs(L - L.T).max(), np.abs(L.sum(1)).max()
        assert asym < 1e-12 and rows < 1e-12
        rep = check_dtn_consistency(L)
        assert rep.ok, f"consistency failures {rep.failures()}"
        return f"asymmetry {asym:.1e}, row sums {rows:.1e}"

    def ydelta():
        g = build_pyramidal(6)
        net = ResistorNetwork(g, rng.uniform(0.5, 2, g.n_edges))
        deg = g.degree()
        node = int(next(i for i in range(g.n_interior) if deg[i] == 3))
        err = np.abs(dtn_map(y_delta(net, node)) - dtn_map(net)).max()
        assert err < 1e-12, f"DtN change {err:.2e}"
        return f"DtN change {err:.1e}"

    def peeling():
        errs = []
        for build, peel, n in ((build_pyramidal, peel_pyramidal, 6), (build_two_sided, peel_two_sided, 8)):
            g = build(n)
            gam = rng.uniform(0.5, 2, g.n_edges)
            rec = peel(dtn_map(ResistorNetwork(g, gam)), n)
            errs.append(np.max(np.abs(rec.gamma - gam) / gam))
        assert max(errs) < 1e-8, f"relative errors {errs}"
        return f"pyramidal {errs[0]:.1e}, two-sided {errs[1]:.1e}"

    def circular():
        g = build_circular(5, 1)
        gam = rng.uniform(0.5, 2, g.n_edges)
        rec = recover_circular(dtn_map(ResistorNetwork(g, gam)), g)
        err = np.max(np.abs(rec.gamma - gam) / gam)
        assert err < 1e-7, f"relative error {err:.2e}"
        return f"relative error {err:.1e}"

    def mobius():
        worst = 0.0
        for beta in (np.pi / 4, np.pi / 2, 3 * np.pi / 4):
            m = fit_mobius_one_sided(beta, 9)
            worst = max(worst, abs(m.inverse_angle(beta) - np.pi * 8 / 9))
        assert worst < 1e-12, f"endpoint residual {worst:.2e}"
        return f"endpoint residual {worst:.1e}"

    def fine_solver():
        f = flux_eigenvalues(ConductivityField.constant(1.0), [1, 2], FineGrid(128, 64))
        err = np.abs(f - [1, 2]).max()
        assert err < 1e-2, f"eigenvalue error {err:.2e}"
        return f"eigenvalue error {err:.1e} at 128x64"

    def reference_identity():
        M = lumped_dtn_layered(ConductivityField.constant(1.0), 9)
        res = reconstruction_mapping(M, M, "circular", width=None)
        err = np.abs(res.values - 1).max()
        assert err == 0.0, f"values differ from 1 by {err:.2e}"
        return "all point values exactly 1"

    def corrupted():
        g = build_circular(5, 1)
        L = dtn_map(ResistorNetwork(g, np.ones(g.n_edges)))
        L[0, 0] += 0.1
        rep = check_dtn_consistency(L)
        assert not rep.ok and "rows_sum_zero" in rep.failures(), "corruption not detected"
        return f"detected: {', '.join(rep.failures())}"

    for name, func in (
        ("optimal grid closed form", grid_closed_form),
        ("continued fraction vs partial fractions", continued_fraction),
        ("DtN symmetry, row sums, circular minors", dtn_structure),
        ("Y-Delta invariance", ydelta),
        ("peeling round trips", peeling),
        ("circular recovery round trip", circular),
        ("Moebius endpoint fit", mobius),
        ("fine solver reference eigenvalues", fine_solver),
        ("reconstruction identity", reference_identity),
        ("corrupted DtN detected", corrupted),
    ):
        checks.append(_check(name, func))
    if dtn_file is not None:

        def file_check():
            rep = check_dtn_consistency(read_dtn(dtn_file).matrix)
            assert rep.ok, f"consistency failures: {', '.join(rep.failures())}"
            return "consistent"

        checks.append(_check(f"consistency of {dtn_file}", file_check))
    return checks


# ---------------------------------------------------------------------------
# subcommands


def _cmd_grid(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(out, {"command": "grid", **{k: v for k, v in vars(args).items() if k not in ("func", "out")}})
    if args.kind == "truncated":
        steps = truncated_measure_grid(args.l)
        man.write_text("steps.json", dumps_json(steps.to_dict()))
    else:
        if args.kind == "interpolation":
            steps = optimal_grid_interpolation(args.n, args.hbar)
        else:
            steps = optimal_grid_electrodes(args.n, args.hbar, args.width)
        grid = make_grid(args.n, steps)
        man.write_text("grid.json", grid.to_json() + "\n")
        man.write_text("grid.csv", grid.to_csv())
    man.write()
    return 0


def _cmd_forward(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(phantom=args.phantom, sigma=args.sigma, n=args.n, topology=args.topology, setup=args.setup,
                           beta=args.beta, n_theta=args.n_theta, n_r=args.n_r, width=args.width, grid="sensitivity"
                           if args.topology != "circular" else "optimal").validate()
    man = Manifest(out, {"command": "forward", **asdict(cfg), "construction": args.construction})
    target = electrodes_for(cfg)
    measure_with = target
    if cfg.setup == "one-sided" and cfg.topology == "circular":
        mobius = fit_mobius_one_sided(cfg.beta, cfg.n)
        measure_with = pull_back_electrodes(target, mobius)
        man.write_text("mobius.json", mobius.to_json() + "\n")
    sig = cfg.conductivity()
    ref = ConductivityField.constant(1.0)
    if args.construction == "fine":
        data = measure_dtn(sig, electrodes=measure_with, grid=FineGrid.for_electrodes(measure_with, cfg.n_theta, cfg.n_r))
        refm = measure_dtn(ref, electrodes=target, grid=FineGrid.for_electrodes(target, cfg.n_theta, cfg.n_r))
    else:
        if cfg.setup != "full":
            raise ArgumentError("layered constructions need the full boundary setup")
        if args.construction == "fourier":
            data = fourier_dtn_layered(sig, cfg.n, cfg.width)
            refm = fourier_dtn_layered(ref, cfg.n, cfg.width)
        else:
            data = MeasuredDtn(lumped_dtn_layered(sig, cfg.n), {"sigma": sig.name, "construction": "lumped"})
            refm = MeasuredDtn(lumped_dtn_layered(ref, cfg.n), {"sigma": ref.name, "construction": "lumped"})
    for name, meas in (("dtn.csv", data), ("reference.csv", refm)):
        prov = {"topology": cfg.topology}
        if "electrodes" not in meas.provenance:
            prov["electrodes"] = target.to_dict()
        for p in write_dtn(out / name, meas, prov):
            man.add(p)
    man.write()
    return 0


def _cmd_invert(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = read_dtn(args.data)
    reference = read_dtn(args.reference)
    man = Manifest(out, {"command": "invert", **{k: v for k, v in vars(args).items() if k not in ("func", "out")}})
    if reference.matrix.shape != data.matrix.shape:
        raise ArgumentError("data and reference sizes differ")
    if args.grid == "optimal" and args.topology != "circular":
        raise ArgumentError("optimal grids exist for circular networks only; use --grid sensitivity")
    needs_electrodes = args.grid == "sensitivity" or args.gn_steps > 0
    electrodes = None
    if needs_electrodes:
        if "electrodes" not in reference.provenance:
            raise ArgumentError("sensitivity grids and Gauss-Newton need electrode provenance in the reference sidecar")
        electrodes = ElectrodeSet.from_dict(reference.provenance["electrodes"])
    ref_net = recover_network(reference, args.topology)
    if args.grid == "sensitivity":
        points = sensitivity_matrix(ConductivityField.constant(1.0), electrodes, args.topology, recovered=ref_net).points
    else:
        points = optimal_points(ref_net.network.graph, args.width)
    if args.gn_steps > 0:
        result = gauss_newton(data, reference, electrodes, args.topology, steps=args.gn_steps, points=points)
    else:
        result = reconstruction_mapping(data, reference, args.topology, points=points, reference_network=ref_net)
    man.write_text("reconstruction.json", result.to_json() + "\n")
    man.write_text("points.csv", _points_csv(result.points, result.values, result.kinds))
    stages = {"qn": result.interpolant()}
    if result.fine_values is not None:
        stages["gn"] = _fine_lookup(result.fine_grid, result.fine_values)
    man.write_text("field.csv", _field_csv(stages, args.samples))
    man.write_text("trace.csv", table_to_csv(("step", "objective"), [(k, float(v)) for k, v in enumerate(result.trace)]))
    if args.figures:
        from .plotting import plot_field

        for stage, f in sorted(stages.items()):
            man.add(plot_field(out / f"field_{stage}.png", f, stage, points=result.points))
    man.write()
    return 0


def _cmd_run(args) -> int:
    base = json.loads(Path(args.config).read_text()) if args.config else {}
    for key in ("phantom", "sigma", "n", "topology", "setup", "beta", "grid", "gn_steps", "n_theta", "n_r", "width",
                "samples", "seed"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    cfg = ExperimentConfig.from_dict(base)
    run_experiment(cfg, Path(args.out), figures=args.figures)
    return 0


def _cmd_selfcheck(args) -> int:
    rows = selfcheck(args.seed, args.dtn)
    width = max(len(r["check"]) for r in rows)
    for r in rows:
        print(f"{'PASS' if r['ok'] else 'FAIL'}  {r['check']:<{width}}  {r['seconds']:7.2f}s  {r['detail']}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "selfcheck.json").write_text(dumps_json([{k: v for k, v in r.items() if k != "seconds"} for r in rows]))
    return 0 if all(r["ok"] for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eit", description="Resistor-network inversion for electrical impedance tomography.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grid", help="optimal grids")
    g.add_argument("--kind", choices=("interpolation", "electrodes", "truncated"), default="interpolation")
    g.add_argument("--n", type=int, default=13)
    g.add_argument("--hbar", type=int, choices=(0, 1), default=1)
    g.add_argument("--width", type=float, default=0.5)
    g.add_argument("--l", type=int, default=8)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_grid)

    f = sub.add_parser("forward", help="synthesize DtN data and its sigma = 1 reference")
    f.add_argument("--phantom", default="smooth", help="phantom id or 'none' for constant --sigma")
    f.add_argument("--sigma", type=float, default=1.0)
    f.add_argument("--n", type=int, default=13)
    f.add_argument("--topology", choices=TOPOLOGIES, default="circular")
    f.add_argument("--setup", choices=SETUPS, default="full")
    f.add_argument("--beta", type=float, default=np.pi / 2)
    f.add_argument("--width", type=float, default=0.5)
    f.add_argument("--construction", choices=("fine", "fourier", "lumped"), default="fine")
    f.add_argument("--n-theta", type=int, default=512)
    f.add_argument("--n-r", type=int, default=256)
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_forward)

    i = sub.add_parser("invert", help="network recovery, reconstruction mapping and Gauss-Newton")
    i.add_argument("--topology", choices=TOPOLOGIES, default="circular")
    i.add_argument("--data", required=True)
    i.add_argument("--reference", required=True)
    i.add_argument("--grid", choices=("optimal", "sensitivity"), default="optimal")
    i.add_argument("--gn-steps", type=int, default=0)
    i.add_argument("--width", type=float, default=0.5)
    i.add_argument("--samples", type=int, default=41)
    i.add_argument("--figures", action="store_true", help="also render PNGs (needs matplotlib)")
    i.add_argument("--out", required=True)
    i.set_defaults(func=_cmd_invert)

    r = sub.add_parser("run", help="full experiment from a JSON config and/or flags")
    r.add_argument("--config")
    r.add_argument("--phantom")
    r.add_argument("--sigma", type=float)
    r.add_argument("--n", type=int)
    r.add_argument("--topology", choices=TOPOLOGIES)
    r.add_argument("--setup", choices=SETUPS)
    r.add_argument("--beta", type=float)
    r.add_argument("--grid", choices=("optimal", "sensitivity"))
    r.add_argument("--gn-steps", dest="gn_steps", type=int)
    r.add_argument("--n-theta", dest="n_theta", type=int)
    r.add_argument("--n-r", dest="n_r", type=int)
    r.add_argument("--width", type=float)
    r.add_argument("--samples", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--figures", action="store_true", help="also render PNGs (needs matplotlib)")
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("selfcheck", help="invariant suite at small sizes")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dtn", help="also check the consistency of this DtN CSV")
    s.add_argument("--out")
    s.set_defaults(func=_cmd_selfcheck)
    return p


def _error_json(exc: BaseException) -> str:
    info = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("index", "layer", "residual", "condition"):
        val = getattr(exc, attr, None)
        if val is not None:
            info[attr] = val if isinstance(val, (int, float, str)) else repr(val)
    return json.dumps(info, sort_keys=True, default=repr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except EITError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(_error_json(exc), file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - unexpected failures still produce structured output
        print(_error_json(exc), file=sys.stderr)
        traceback.print_exc(file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
