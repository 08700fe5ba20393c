"""Benchmark matrix runner and report writers.

Runs scenario x controller simulations on a bounded process pool, assembles
rows in a fixed order regardless of completion order, and writes schema-stable
CSV tables plus a metadata record carrying the seed and config hash.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import config_hash, make_module, make_sim_config, resolve_scenario
from .model import ModuleParams, StringModel, gmpp_oracle
from .simloop import Metrics, SimConfig, metrics, run

GMPP_HEADER = "scenario,i_opt,v_opt,p_opt,eta"
BENCH_HEADER = ("scenario,controller,settle_time_s,p_final_w,"
                "tracking_efficiency,oscillation_w,reached_gmpp")


@dataclass(frozen=True)
class GmppRow:
    scenario: str
    i_opt: float
    v_opt: float
    p_opt: float
    eta: float


@dataclass(frozen=True)
class BenchRow:
    scenario: str
    controller: str
    settle_time_s: float
    p_final_w: float
    tracking_efficiency: float
    oscillation_w: float
    reached_gmpp: bool


@dataclass(frozen=True)
class BenchReport:
    gmpp_rows: tuple[GmppRow, ...]
    bench_rows: tuple[BenchRow, ...]
    seed: int
    config_sha256: str
    version: str
    repetitions: int


def gmpp_table(module: ModuleParams, scenarios, n_points: int = 2000) -> tuple[GmppRow, ...]:
    """Global peak per scenario; eta is percent of the unshaded global peak."""
    rows = []
    rated = None
    for sc in scenarios:
        g = sc.steps[0].g
        if rated is None:
            rated = gmpp_oracle(StringModel(module, (1.0,) * len(g)).curve(n_points)).p
        op = gmpp_oracle(StringModel(module, g).curve(n_points))
        rows.append(GmppRow(sc.name, op.i, op.v, op.p, 100.0 * op.p / rated))
    return tuple(rows)


def _bench_job(sim_config: SimConfig) -> tuple[Metrics, np.ndarray, np.ndarray]:
    trace = run(sim_config)
    return metrics(trace), trace.t, trace.p_pv


def run_bench(cfg: dict, controllers: list[str], scenario_ids: list[str],
              *, seed: int | None = None, repetitions: int = 1,
              workers: int | None = None):
    """Full matrix run. Returns (BenchReport, overlay traces per scenario).

    Repetition r of a pair runs at seed + r; metrics are averaged over
    repetitions and reached_gmpp is the conjunction. Overlay traces come from
    the first repetition.
    """
    if not controllers or not scenario_ids:
        raise ValueError("need at least one controller and one scenario")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    module = make_module(cfg)
    base_seed = cfg["sim"]["seed"] if seed is None else seed
    scenarios = [resolve_scenario(cfg, sid) for sid in scenario_ids]

    jobs: list[tuple[tuple, SimConfig]] = []
    for sc in scenarios:
        for ctrl in controllers:
            for rep in range(repetitions):
                sim_cfg = make_sim_config(cfg, sc, ctrl, seed=base_seed + rep,
                                          module=module)
                jobs.append(((sc.name, ctrl, rep), sim_cfg))

    max_workers = workers if workers is not None else min(4, os.cpu_count() or 1)
    results: dict[tuple, tuple] = {}
    if max_workers <= 1 or len(jobs) == 1:
        for key, sim_cfg in jobs:
            results[key] = _bench_job(sim_cfg)
    else:
        with ProcessPoolExecutor(max_workers=min(max_workers, len(jobs))) as pool:
            for (key, _), out in zip(jobs, pool.map(_bench_job, [j[1] for j in jobs])):
                results[key] = out

    bench_rows = []
    overlays: dict[str, list[tuple[str, np.ndarray, np.ndarray]]] = {sc.name: [] for sc in scenarios}
    for sc in scenarios:
        for ctrl in controllers:
            reps = [results[(sc.name, ctrl, r)][0] for r in range(repetitions)]
            bench_rows.append(BenchRow(
                scenario=sc.name, controller=ctrl,
                settle_time_s=float(np.mean([m.settle_time_s for m in reps])),
                p_final_w=float(np.mean([m.p_final_w for m in reps])),
                tracking_efficiency=float(np.mean([m.tracking_efficiency for m in reps])),
                oscillation_w=float(np.mean([m.oscillation_w for m in reps])),
                reached_gmpp=all(m.reached_gmpp for m in reps)))
            _, t, p = results[(sc.name, ctrl, 0)]
            overlays[sc.name].append((ctrl, t, p))

    report = BenchReport(gmpp_rows=gmpp_table(module, scenarios),
                         bench_rows=tuple(bench_rows), seed=base_seed,
                         config_sha256=config_hash(cfg), version=__version__,
                         repetitions=repetitions)
    return report, overlays


def write_gmpp_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(GMPP_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.scenario},{r.i_opt:.6g},{r.v_opt:.6g},"
                     f"{r.p_opt:.6g},{r.eta:.6g}\n")


def write_bench_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(BENCH_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.scenario},{r.controller},{r.settle_time_s:.6g},"
                     f"{r.p_final_w:.6g},{r.tracking_efficiency:.6g},"
                     f"{r.oscillation_w:.6g},{str(r.reached_gmpp).lower()}\n")


def write_meta(report: BenchReport, path, *, controllers=None, scenarios=None) -> None:
    meta = {
        "version": report.version,
        "seed": report.seed,
        "repetitions": report.repetitions,
        "config_sha256": report.config_sha256,
    }
    if controllers is not None:
        meta["controllers"] = list(controllers)
    if scenarios is not None:
        meta["scenarios"] = list(scenarios)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
