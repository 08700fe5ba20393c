"""Closed-loop simulation: PV string, boost converter, and one MPPT controller.

The PV side is quasi-static: each control period the string operating point is
the intersection of its I-V curve with the converter's duty-dependent input
resistance. The converter state then advances through the period with that PV
voltage as its source. Duty decisions take effect one period later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .converter import BoostParams, BoostState, equilibrium, input_resistance, step_averaged
from .model import ModuleParams, StringModel, calibrate, gmpp_oracle
from .mppt import Controller, ControllerInput, DutyLimits, ZoneEstimator, make_controller
from .shading import ShadingScenario, ShadingZone, scenario_at


@dataclass(frozen=True)
class SimConfig:
    scenario: ShadingScenario
    controller: str = "po"
    hyper: dict | None = None
    module: ModuleParams | None = None
    boost: BoostParams = BoostParams(r_load=1500.0)
    seed: int = 42
    duration: float = 1.5
    control_period: float = 1e-3
    converter_dt: float = 20e-6
    initial_duty: float = 0.1
    limits: DutyLimits = DutyLimits()
    rated_power: float | None = None

    def __post_init__(self):
        if self.duration <= 0 or self.control_period <= 0:
            raise ValueError("duration and control_period must be positive")
        if self.control_period > self.duration:
            raise ValueError("control_period cannot exceed duration")
        if not 0 < self.converter_dt <= 50e-6:
            raise ValueError("converter_dt must be in (0, 50e-6] seconds")
        if not self.limits.lo <= self.initial_duty <= self.limits.hi:
            raise ValueError("initial_duty must lie within the duty limits")


@dataclass
class SimTrace:
    """Per-control-period record of one closed-loop run."""

    scenario: str
    controller: str
    t: np.ndarray
    duty: np.ndarray
    v_pv: np.ndarray
    i_pv: np.ndarray
    p_pv: np.ndarray
    p_out: np.ndarray
    iL: np.ndarray
    vC: np.ndarray
    zone: np.ndarray
    phase: list[str]
    p_oracle: np.ndarray

    CSV_HEADER = "t_s,duty,v_pv,i_pv,p_pv,p_out,zone,phase"

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for k in range(len(self.t)):
                fh.write(f"{self.t[k]:.6f},{self.duty[k]:.6g},{self.v_pv[k]:.6g},"
                         f"{self.i_pv[k]:.6g},{self.p_pv[k]:.6g},{self.p_out[k]:.6g},"
                         f"{int(self.zone[k])},{self.phase[k]}\n")


@dataclass(frozen=True)
class Metrics:
    settle_time_s: float
    p_final_w: float
    tracking_efficiency: float
    oscillation_w: float
    reached_gmpp: bool


class _CurveBank:
    """Caches per-irradiance string models, their global peaks, and warm hints."""

    def __init__(self, module: ModuleParams, boost: BoostParams, limits: DutyLimits,
                 t_cell: float = 25.0):
        self._module = module
        self._boost = boost
        self._limits = limits
        self._t_cell = t_cell
        self._bank: dict[tuple, tuple] = {}
        self._hints: dict[tuple, float] = {}

    def entry(self, g: tuple) -> tuple[StringModel, float, float]:
        """Returns (model, gmpp power, gmpp duty) for one irradiance vector."""
        hit = self._bank.get(g)
        if hit is None:
            model = StringModel(self._module, g, self._t_cell)
            op = gmpp_oracle(model.curve(2000))
            if op.p > 0 and op.i > 0:
                d_opt = 1.0 - math.sqrt((op.v / op.i) / self._boost.r_load)
            else:
                d_opt = self._limits.lo
            hit = (model, op.p, self._limits.clamp(d_opt))
            self._bank[g] = hit
        return hit

    def operating_point(self, g: tuple, duty: float):
        model, _, _ = self.entry(g)
        op = model.intersect(input_resistance(duty, self._boost),
                             i_hint=self._hints.get(g))
        if op.i > 0:
            self._hints[g] = op.i
        return op


class _OracleFollower(Controller):
    """Reference tracker that pins the duty at the known global-peak load line."""

    phase_tag = "oracle"

    def __init__(self, bank: _CurveBank, scenario: ShadingScenario):
        self._bank = bank
        self._scenario = scenario

    def step(self, inp: ControllerInput, measured_power: float) -> float:
        g = scenario_at(self._scenario, inp.t)
        return self._bank.entry(g)[2]


def run(config: SimConfig) -> SimTrace:
    """Simulates one controller on one scenario; fully deterministic per config."""
    module = config.module if config.module is not None else calibrate()
    n_modules = len(config.scenario.steps[0].g)
    bank = _CurveBank(module, config.boost, config.limits)
    rated = config.rated_power
    if rated is None:
        rated = bank.entry((1.0,) * n_modules)[1]
    estimator = ZoneEstimator(rated)

    if config.controller == "oracle":
        controller: Controller = _OracleFollower(bank, config.scenario)
    else:
        controller = make_controller(config.controller, initial_duty=config.initial_duty,
                                     seed=config.seed, hyper=config.hyper,
                                     limits=config.limits)

    n_periods = max(1, round(config.duration / config.control_period))
    n_sub = max(1, round(config.control_period / config.converter_dt))
    sub_dt = config.control_period / n_sub

    t_arr = np.empty(n_periods)
    duty_arr = np.empty(n_periods)
    v_arr = np.empty(n_periods)
    i_arr = np.empty(n_periods)
    p_arr = np.empty(n_periods)
    pout_arr = np.empty(n_periods)
    il_arr = np.empty(n_periods)
    vc_arr = np.empty(n_periods)
    zone_arr = np.empty(n_periods, dtype=np.int64)
    oracle_arr = np.empty(n_periods)
    phases: list[str] = []

    duty = config.limits.clamp(config.initial_duty)
    state: BoostState | None = None

    for k in range(n_periods):
        t = k * config.control_period
        g = scenario_at(config.scenario, t)
        op = bank.operating_point(g, duty)
        if state is None:
            state = equilibrium(config.boost, op.v, duty)
        zone = estimator.estimate(op.v, op.i)
        next_duty = controller.step(ControllerInput(op.v, op.i, t, zone), op.p)

        for _ in range(n_sub):
            state = step_averaged(state, op.v, duty, sub_dt, config.boost)

        t_arr[k] = t
        duty_arr[k] = duty
        v_arr[k] = op.v
        i_arr[k] = op.i
        p_arr[k] = op.p
        pout_arr[k] = state.vC * state.vC / config.boost.r_load
        il_arr[k] = state.iL
        vc_arr[k] = state.vC
        zone_arr[k] = int(zone)
        oracle_arr[k] = bank.entry(g)[1]
        phases.append(controller.phase_tag)

        duty = config.limits.clamp(next_duty)

    return SimTrace(scenario=config.scenario.name, controller=config.controller,
                    t=t_arr, duty=duty_arr, v_pv=v_arr, i_pv=i_arr, p_pv=p_arr,
                    p_out=pout_arr, iL=il_arr, vC=vc_arr, zone=zone_arr,
                    phase=phases, p_oracle=oracle_arr)


def metrics(trace: SimTrace, *, band: float = 0.02, tail_fraction: float = 0.10,
            gmpp_fraction: float = 0.98) -> Metrics:
    """Summary statistics over one trace.

    p_final is the mean PV power over the trailing tail_fraction of the run;
    settle time is the first instant after which PV power stays inside
    band * p_final of it (inf when the trace never settles).
    """
    n = len(trace.t)
    tail = max(1, int(round(n * tail_fraction)))
    p_final = float(np.mean(trace.p_pv[-tail:]))
    tol = band * abs(p_final) if p_final != 0.0 else band

    outside = np.abs(trace.p_pv - p_final) > tol
    if outside[-1]:
        settle = math.inf
    else:
        idx = np.nonzero(outside)[0]
        settle = float(trace.t[idx[-1] + 1]) if len(idx) else float(trace.t[0])

    denom = float(np.sum(trace.p_oracle))
    eff = float(np.sum(trace.p_pv)) / denom if denom > 0 else 0.0
    osc = float(np.max(trace.p_pv[-tail:]) - np.min(trace.p_pv[-tail:]))
    reached = p_final >= gmpp_fraction * float(trace.p_oracle[-1])
    return Metrics(settle_time_s=settle, p_final_w=p_final, tracking_efficiency=eff,
                   oscillation_w=osc, reached_gmpp=reached)
