"""Command-line entry point.

Subcommands: ``run`` (mission + reports), ``baseline`` (grid sweep),
``sweep`` (coverage/time vs particle count), ``render`` (re-draw a trace).

Exit codes: 0 when coverage meets the threshold, 2 when the step cap was hit,
1 on any error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ParticleCoverError
from . import harness


def _add_scenario_arg(p: argparse.ArgumentParser):
    p.add_argument("scenario",
                   help="scenario YAML path or bundled name (case1..case3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="particlecover",
        description="Particle-harvesting visual area coverage planner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a coverage mission and write reports")
    _add_scenario_arg(run)
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--seed", type=int, default=None,
                     help="override both scenario seeds (sampling=S, noise=S+1)")
    run.add_argument("--horizon", type=int, default=None)
    run.add_argument("--particles", type=int, default=None)
    run.add_argument("--no-noise", action="store_true")
    run.add_argument("--threshold", type=float, default=0.975,
                     help="raster coverage required for exit code 0")

    base = sub.add_parser("baseline", help="run the grid-sweep baseline")
    _add_scenario_arg(base)
    base.add_argument("--out", default=None, help="optional output directory")

    sweep = sub.add_parser("sweep",
                           help="coverage and solve time vs particle count")
    _add_scenario_arg(sweep)
    sweep.add_argument("--counts", required=True,
                       help="comma-separated particle counts")
    sweep.add_argument("--repeats", type=int, default=1)
    sweep.add_argument("--out", default=None, help="optional CSV output path")

    rend = sub.add_parser("render", help="render a stored trace to SVG")
    rend.add_argument("trace", help="trace CSV file")
    rend.add_argument("--scenario", default=None,
                      help="scenario for the target boundary overlay")
    rend.add_argument("--out", default=None, help="output SVG path")
    return parser


def _apply_overrides(scenario, args):
    overrides = {}
    if args.seed is not None:
        overrides["seed_sampling"] = args.seed
        overrides["seed_noise"] = args.seed + 1
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.particles is not None:
        overrides["particles"] = args.particles
    if args.no_noise:
        from .mission import NoiseModel
        overrides["noise"] = NoiseModel(enabled=False)
    return scenario.with_overrides(**overrides) if overrides else scenario


def _cmd_run(args) -> int:
    scenario = _apply_overrides(harness.resolve_scenario(args.scenario), args)
    metrics = harness.run_and_report(scenario, args.out)
    print(f"steps={metrics.steps} path_length={metrics.path_length:.3f} m "
          f"coverage_raster={metrics.coverage_raster:.4f} "
          f"coverage_particle={metrics.coverage_particle:.4f} "
          f"mean_solve_time={metrics.mean_solve_time:.3f} s "
          f"termination={metrics.termination}")
    if metrics.termination == "cap":
        return 2
    return 0 if metrics.coverage_raster >= args.threshold else 2


def _cmd_baseline(args) -> int:
    scenario = harness.resolve_scenario(args.scenario)
    trace = harness.grid_baseline(scenario)
    metrics = harness.compute_metrics(trace, scenario)
    print(f"baseline path_length={metrics.path_length:.3f} m "
          f"coverage_raster={metrics.coverage_raster:.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        harness.write_trace(trace, out / "baseline_trace.csv")
        harness.write_metrics(metrics, out / "baseline_metrics.yaml")
        harness.render(trace, out / "baseline.svg", polygon=scenario.polygon,
                       camera=scenario.camera)
    return 0


def _cmd_sweep(args) -> int:
    scenario = harness.resolve_scenario(args.scenario)
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    rows = harness.sweep_particles(scenario, counts, repeats=args.repeats)
    for r in rows:
        print(f"particles={r['particles']} "
              f"mean_coverage_raster={r['mean_coverage_raster']:.4f} "
              f"mean_solve_time={r['mean_solve_time_s']:.3f} s "
              f"max_solve_time={r['max_solve_time_s']:.3f} s")
    if args.out:
        import csv
        with open(args.out, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            wr.writeheader()
            wr.writerows(rows)
    return 0


def _cmd_render(args) -> int:
    trace = harness.read_trace(args.trace)
    polygon = camera = None
    if args.scenario:
        sc = harness.resolve_scenario(args.scenario)
        polygon, camera = sc.polygon, sc.camera
    out = args.out or str(Path(args.trace).with_suffix(".svg"))
    harness.render(trace, out, polygon=polygon, camera=camera)
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "baseline": _cmd_baseline,
                "sweep": _cmd_sweep, "render": _cmd_render}
    try:
        return handlers[args.command](args)
    except ParticleCoverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
