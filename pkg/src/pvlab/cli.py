"""Command-line front end: curve sweeps, peak tables, benchmarks, single runs.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import gmpp_table, run_bench, write_bench_csv, write_gmpp_csv, write_meta
from .config import ConfigError, load_config, make_module, make_sim_config, resolve_scenario, scenario_names
from .model import CalibrationError, SolverError, StringModel
from .simloop import run

_TABLE_CONTROLLERS = ["po", "flc", "dzflc", "dsa-pso", "hybrid"]


def _split(value: str) -> list[str]:
    items = [v.strip() for v in value.split(",") if v.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvlab",
                                     description="PV string MPPT simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_default=None):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default="pvlab_out", help="output directory")
        p.add_argument("--scenario", "--scenarios", dest="scenarios", type=_split,
                       default=scenario_default, help="scenario name(s), comma-separated")

    p_curve = sub.add_parser("curve", help="I-V and P-V sweep for one scenario")
    common(p_curve, scenario_default=["NoShading"])
    p_curve.add_argument("--points", type=int, default=2000)

    p_gmpp = sub.add_parser("gmpp", help="global-peak table over scenarios")
    common(p_gmpp)

    p_bench = sub.add_parser("bench", help="full controller benchmark matrix")
    common(p_bench)
    p_bench.add_argument("--controllers", "--controller", dest="controllers",
                         type=_split, default=list(_TABLE_CONTROLLERS))
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--repetitions", type=int, default=1)
    p_bench.add_argument("--workers", type=int, default=None)

    p_sim = sub.add_parser("simulate", help="one controller on one scenario")
    common(p_sim, scenario_default=["NoShading"])
    p_sim.add_argument("--controllers", "--controller", dest="controllers",
                       type=_split, default=["hybrid"])
    p_sim.add_argument("--seed", type=int, default=None)
    return parser


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_curve(args, cfg) -> int:
    from .plots import curve_figure, save_svg

    out = _outdir(args)
    module = make_module(cfg)
    for name in args.scenarios:
        sc = resolve_scenario(cfg, name)
        curve = StringModel(module, sc.steps[0].g).curve(args.points)
        curve.to_csv(out / f"curve_{sc.name}.csv")
        save_svg(curve_figure(curve, sc.name), out / f"curve_{sc.name}.svg")
        print(f"wrote curve_{sc.name}.csv and curve_{sc.name}.svg to {out}")
    return 0


def _cmd_gmpp(args, cfg) -> int:
    out = _outdir(args)
    names = args.scenarios if args.scenarios else scenario_names(cfg)
    scenarios = [resolve_scenario(cfg, n) for n in names]
    rows = gmpp_table(make_module(cfg), scenarios)
    write_gmpp_csv(rows, out / "gmpp.csv")
    print(f"wrote gmpp.csv ({len(rows)} scenarios) to {out}")
    return 0


def _cmd_bench(args, cfg) -> int:
    from .plots import bench_figure, save_svg

    out = _outdir(args)
    names = args.scenarios if args.scenarios else scenario_names(cfg)
    report, overlays = run_bench(cfg, args.controllers, names, seed=args.seed,
                                 repetitions=args.repetitions, workers=args.workers)
    write_gmpp_csv(report.gmpp_rows, out / "gmpp.csv")
    write_bench_csv(report.bench_rows, out / "bench.csv")
    write_meta(report, out / "meta.json", controllers=args.controllers, scenarios=names)
    oracle = {r.scenario: r.p_opt for r in report.gmpp_rows}
    for name, runs in overlays.items():
        save_svg(bench_figure(name, runs, oracle.get(name)), out / f"bench_{name}.svg")
    print(f"wrote bench.csv, gmpp.csv, meta.json, and {len(overlays)} SVGs to {out}")
    return 0


def _cmd_simulate(args, cfg) -> int:
    from .plots import save_svg, trace_figure

    out = _outdir(args)
    module = make_module(cfg)
    for name in args.scenarios:
        sc = resolve_scenario(cfg, name)
        for ctrl in args.controllers:
            trace = run(make_sim_config(cfg, sc, ctrl, seed=args.seed, module=module))
            stem = f"trace_{sc.name}_{ctrl}"
            trace.to_csv(out / f"{stem}.csv")
            save_svg(trace_figure(trace), out / f"{stem}.svg")
            print(f"wrote {stem}.csv and {stem}.svg to {out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "curve":
            return _cmd_curve(args, cfg)
        if args.command == "gmpp":
            return _cmd_gmpp(args, cfg)
        if args.command == "bench":
            return _cmd_bench(args, cfg)
        return _cmd_simulate(args, cfg)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, CalibrationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
