"""Five MPPT strategies behind one step-wise controller interface.

Controllers receive the measured PV operating point once per control period and
return the duty cycle to apply next period. Each instance owns its state and
random stream; distinct simulation runs never share a controller.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from .fuzzy import RuleBase, mppt_rule_base
from .shading import ShadingZone


@dataclass(frozen=True)
class DutyLimits:
    lo: float = 0.05
    hi: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.lo < self.hi < 1.0:
            raise ValueError("duty limits must satisfy 0 <= lo < hi < 1")

    def clamp(self, d: float) -> float:
        return min(max(d, self.lo), self.hi)


@dataclass(frozen=True)
class ControllerInput:
    v_pv: float
    i_pv: float
    t: float
    zone_hint: ShadingZone = ShadingZone.Zone0

    def __post_init__(self):
        if self.v_pv < 0 or self.i_pv < 0:
            raise ValueError("PV voltage and current must be non-negative")


class Controller:
    """Step-wise MPPT interface: one duty decision per control period."""

    phase_tag: str = "track"

    def step(self, inp: ControllerInput, measured_power: float) -> float:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# hill climbers

@dataclass(frozen=True)
class PoConfig:
    step: float = 0.005


class PoController(Controller):
    """Perturb and observe: keep the direction while power rises, else reverse."""

    phase_tag = "perturb"

    def __init__(self, initial_duty: float, config: PoConfig = PoConfig(),
                 limits: DutyLimits = DutyLimits()):
        self._cfg = config
        self._limits = limits
        self._d = limits.clamp(initial_duty)
        self._direction = 1.0
        self._prev_p: float | None = None

    @property
    def duty(self) -> float:
        return self._d

    def step(self, inp: ControllerInput, measured_power: float) -> float:
        if self._prev_p is not None and not measured_power - self._prev_p > 0.0:
            self._direction = -self._direction
        self._prev_p = measured_power
        self._d = self._limits.clamp(self._d + self._direction * self._cfg.step)
        return self._d


@dataclass(frozen=True)
class FlcConfig:
    e_divisor: float = 100.0
    ce_divisor: float = 50.0
    out_span: float = 0.02
    bootstrap_step: float = 0.005
    dv_epsilon: float = 1e-6


class FlcController(Controller):
    """Fuzzy duty stepping on the power-slope proxy E = dP/dV and its change."""

    phase_tag = "track"

    def __init__(self, initial_duty: float, config: FlcConfig = FlcConfig(),
                 limits: DutyLimits = DutyLimits(), rule_base: RuleBase | None = None):
        self._cfg = config
        self._limits = limits
        self._rb = rule_base if rule_base is not None else mppt_rule_base(
            1.0, 1.0, config.out_span)
        self._d = limits.clamp(initial_duty)
        self._prev: tuple[float, float] | None = None
        self._prev_e = 0.0

    @property
    def duty(self) -> float:
        return self._d

    def output_gain(self, inp: ControllerInput) -> float:
        return 1.0

    def step(self, inp: ControllerInput, measured_power: float) -> float:
        if self._prev is None:
            # First period carries no slope information; probe once so the
            # next period does.
            self._prev = (inp.v_pv, measured_power)
            self._d = self._limits.clamp(self._d + self._cfg.bootstrap_step)
            return self._d
        prev_v, prev_p = self._prev
        dv = inp.v_pv - prev_v
        e = 0.0 if abs(dv) < self._cfg.dv_epsilon else (measured_power - prev_p) / dv
        ce = e - self._prev_e
        dd = self._rb.infer(e / self._cfg.e_divisor, ce / self._cfg.ce_divisor)
        dd *= self.output_gain(inp)
        self._prev = (inp.v_pv, measured_power)
        self._prev_e = e
        self._d = self._limits.clamp(self._d + dd)
        return self._d


@dataclass(frozen=True)
class DzFlcConfig(FlcConfig):
    zone_gains: tuple[float, float, float, float] = (0.5, 1.0, 1.5, 2.0)


class DzFlcController(FlcController):
    """FLC whose output aggressiveness follows the shading-severity zone."""

    def __init__(self, initial_duty: float, config: DzFlcConfig = DzFlcConfig(),
                 limits: DutyLimits = DutyLimits(), rule_base: RuleBase | None = None,
                 zone_override: ShadingZone | None = None):
        super().__init__(initial_duty, config, limits, rule_base)
        self._zone_override = zone_override

    def output_gain(self, inp: ControllerInput) -> float:
        zone = self._zone_override if self._zone_override is not None else inp.zone_hint
        return self._cfg.zone_gains[int(zone)]


# ---------------------------------------------------------------------------
# swarms

@dataclass
class SwarmState:
    positions: list[float]
    velocities: list[float]
    pbest_d: list[float]
    pbest_p: list[float]
    gbest_d: float
    gbest_p: float
    eval_index: int = 0
    iteration: int = 0
    converged: bool = False
    gbest_history: list[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.positions)


def init_swarm(n: int, d_range: tuple[float, float]) -> SwarmState:
    """Particles evenly spaced over the duty range, at rest."""
    lo, hi = d_range
    if not lo < hi:
        raise ValueError("duty range must satisfy lo < hi")
    if n < 1:
        raise ValueError("swarm needs at least one particle")
    if n == 1:
        positions = [0.5 * (lo + hi)]
    else:
        positions = [lo + (hi - lo) * k / (n - 1) for k in range(n)]
    return SwarmState(positions=positions, velocities=[0.0] * n,
                      pbest_d=list(positions), pbest_p=[-math.inf] * n,
                      gbest_d=positions[0], gbest_p=-math.inf)


def pso_velocity_update(state: SwarmState, w: float, c1: float, c2: float,
                        v_max: float, bounds: tuple[float, float],
                        rng: random.Random) -> None:
    """Standard constricted velocity/position update, in place."""
    lo, hi = bounds
    for k in range(state.n):
        r1, r2 = rng.random(), rng.random()
        v = (w * state.velocities[k]
             + c1 * r1 * (state.pbest_d[k] - state.positions[k])
             + c2 * r2 * (state.gbest_d - state.positions[k]))
        v = min(max(v, -v_max), v_max)
        x = min(max(state.positions[k] + v, lo), hi)
        state.velocities[k] = v
        state.positions[k] = x
    state.iteration += 1


@dataclass(frozen=True)
class PsoConfig:
    n_particles: int = 6
    w: float = 0.6
    c1: float = 1.8
    c2: float = 1.8
    v_max: float = 0.1
    convergence_eps: float = 0.005
    reinit_threshold: float = 0.10
    reinit_periods: int = 3


@dataclass(frozen=True)
class DsaPsoConfig:
    n_particles: int = 6
    w_schedule: tuple[float, float, float, float] = (0.40, 0.50, 0.60, 0.70)
    c_schedule: tuple[float, float, float, float] = (1.5, 1.5, 2.0, 2.0)
    init_ranges: tuple[tuple[float, float], ...] = (
        (0.45, 0.75), (0.40, 0.80), (0.30, 0.90), (0.10, 0.95))
    v_max: float = 0.1
    convergence_eps: float = 0.005
    reinit_threshold: float = 0.10
    reinit_periods: int = 3


class ReinitDetector:
    """Flags a sustained relative power deviation from a settled reference."""

    def __init__(self, threshold: float = 0.10, periods: int = 3, ref_alpha: float = 0.05):
        self.threshold = threshold
        self.periods = periods
        self.ref_alpha = ref_alpha
        self._ref: float | None = None
        self._count = 0

    @property
    def armed(self) -> bool:
        return self._ref is not None

    @property
    def reference(self) -> float | None:
        return self._ref

    def arm(self, p_ref: float) -> None:
        self._ref = p_ref
        self._count = 0

    def disarm(self) -> None:
        self._ref = None
        self._count = 0

    def update(self, p_now: float) -> bool:
        if self._ref is None:
            return False
        if abs(p_now - self._ref) / max(self._ref, 1.0) > self.threshold:
            self._count += 1
            if self._count >= self.periods:
                self.disarm()
                return True
        else:
            self._count = 0
            # Track slow drift so gentle ramps never accumulate into a trigger.
            self._ref += self.ref_alpha * (p_now - self._ref)
        return False


class _SwarmController(Controller):
    """Sequential-evaluation PSO: one particle measured per control period."""

    def __init__(self, seed: int | random.Random, limits: DutyLimits,
                 bounds: tuple[float, float] | None = None, reinit_enabled: bool = True):
        self._limits = limits
        self._bounds = bounds if bounds is not None else (limits.lo, limits.hi)
        self._rng = seed if isinstance(seed, random.Random) else random.Random(seed)
        self._reinit_enabled = reinit_enabled
        self._detector = ReinitDetector(self._reinit_threshold(), self._reinit_periods())
        self.state: SwarmState | None = None
        self._pending: int | None = None

    # subclass hooks ------------------------------------------------------
    def _n_particles(self) -> int:
        raise NotImplementedError

    def _coefficients(self, zone: ShadingZone) -> tuple[float, float, float]:
        raise NotImplementedError

    def _init_range(self, zone: ShadingZone) -> tuple[float, float]:
        return self._bounds

    def _v_max(self) -> float:
        raise NotImplementedError

    def _convergence_eps(self) -> float:
        raise NotImplementedError

    def _reinit_threshold(self) -> float:
        return 0.10

    def _reinit_periods(self) -> int:
        return 3

    # ----------------------------------------------------------------------
    @property
    def phase_tag(self) -> str:
        return "converged" if self.state is not None and self.state.converged else "search"

    @property
    def converged(self) -> bool:
        return self.state is not None and self.state.converged

    def _spawn(self, zone: ShadingZone) -> None:
        lo, hi = self._init_range(zone)
        lo = max(lo, self._bounds[0])
        hi = min(hi, self._bounds[1])
        if not lo < hi:
            lo, hi = self._bounds
        self.state = init_swarm(self._n_particles(), (lo, hi))
        self._pending = None
        self._detector.disarm()

    def _record(self, index: int, power: float) -> None:
        s = self.state
        if power > s.pbest_p[index]:
            s.pbest_p[index] = power
            s.pbest_d[index] = s.positions[index]
        if power > s.gbest_p:
            s.gbest_p = power
            s.gbest_d = s.positions[index]

    def step(self, inp: ControllerInput, measured_power: float) -> float:
        if self.state is None:
            self._spawn(inp.zone_hint)
            self._pending = 0
            return self._limits.clamp(self.state.positions[0])
        s = self.state
        if s.converged:
            if self._reinit_enabled and self._detector.update(measured_power):
                self._spawn(inp.zone_hint)
                self._pending = 0
                return self._limits.clamp(self.state.positions[0])
            return self._limits.clamp(s.gbest_d)
        if self._pending is not None:
            self._record(self._pending, measured_power)
            if self._pending == s.n - 1:
                s.gbest_history.append(s.gbest_p)
                w, c1, c2 = self._coefficients(inp.zone_hint)
                pso_velocity_update(s, w, c1, c2, self._v_max(), self._bounds, self._rng)
                if max(abs(x - s.gbest_d) for x in s.positions) < self._convergence_eps():
                    s.converged = True
                    self._pending = None
                    if self._reinit_enabled:
                        self._detector.arm(s.gbest_p)
                    return self._limits.clamp(s.gbest_d)
                s.eval_index = 0
            else:
                s.eval_index = self._pending + 1
        self._pending = s.eval_index
        return self._limits.clamp(s.positions[s.eval_index])


class PsoController(_SwarmController):
    """Baseline PSO with fixed coefficients over the full duty range."""

    def __init__(self, seed: int | random.Random, config: PsoConfig = PsoConfig(),
                 limits: DutyLimits = DutyLimits(),
                 bounds: tuple[float, float] | None = None, reinit_enabled: bool = True):
        self._cfg = config
        super().__init__(seed, limits, bounds, reinit_enabled)

    def _n_particles(self) -> int:
        return self._cfg.n_particles

    def _coefficients(self, zone: ShadingZone) -> tuple[float, float, float]:
        return self._cfg.w, self._cfg.c1, self._cfg.c2

    def _v_max(self) -> float:
        return self._cfg.v_max

    def _convergence_eps(self) -> float:
        return self._cfg.convergence_eps

    def _reinit_threshold(self) -> float:
        return self._cfg.reinit_threshold

    def _reinit_periods(self) -> int:
        return self._cfg.reinit_periods


class DsaPsoController(_SwarmController):
    """PSO whose inertia, acceleration, and initialization follow the shading zone."""

    def __init__(self, seed: int | random.Random, config: DsaPsoConfig = DsaPsoConfig(),
                 limits: DutyLimits = DutyLimits(),
                 bounds: tuple[float, float] | None = None, reinit_enabled: bool = True):
        self._cfg = config
        super().__init__(seed, limits, bounds, reinit_enabled)

    def _n_particles(self) -> int:
        return self._cfg.n_particles

    def _coefficients(self, zone: ShadingZone) -> tuple[float, float, float]:
        w = self._cfg.w_schedule[int(zone)]
        c = self._cfg.c_schedule[int(zone)]
        return w, c, c

    def _init_range(self, zone: ShadingZone) -> tuple[float, float]:
        return self._cfg.init_ranges[int(zone)]

    def _v_max(self) -> float:
        return self._cfg.v_max

    def _convergence_eps(self) -> float:
        return self._cfg.convergence_eps

    def _reinit_threshold(self) -> float:
        return self._cfg.reinit_threshold

    def _reinit_periods(self) -> int:
        return self._cfg.reinit_periods


# ---------------------------------------------------------------------------
# hybrid phase machine

@dataclass(frozen=True)
class HybridConfig:
    coarse_exit_step: float = 0.002
    coarse_exit_periods: int = 5
    window_halfwidth: tuple[float, float, float, float] = (0.10, 0.10, 0.20, 0.20)
    reinit_threshold: float = 0.10
    reinit_periods: int = 3


PHASE_FLC_COARSE = "FlcCoarse"
PHASE_PSO_SEARCH = "PsoSearch"
PHASE_FLC_FINE = "FlcFine"


class HybridController(Controller):
    """Coarse fuzzy descent, windowed zone-aware swarm search, fine fuzzy polish.

    Phases advance FlcCoarse -> PsoSearch -> FlcFine only; a sustained power
    deviation in the fine phase resets the machine to FlcCoarse.
    """

    def __init__(self, initial_duty: float, seed: int,
                 config: HybridConfig = HybridConfig(),
                 flc_config: DzFlcConfig = DzFlcConfig(),
                 pso_config: DsaPsoConfig = DsaPsoConfig(),
                 limits: DutyLimits = DutyLimits()):
        self._cfg = config
        self._flc_cfg = flc_config
        self._pso_cfg = pso_config
        self._limits = limits
        self._rng = random.Random(seed)
        self._detector = ReinitDetector(config.reinit_threshold, config.reinit_periods)
        self._phase = PHASE_FLC_COARSE
        self._coarse = DzFlcController(initial_duty, flc_config, limits)
        self._swarm: DsaPsoController | None = None
        self._fine: DzFlcController | None = None
        self._still = 0
        self._d = limits.clamp(initial_duty)

    @property
    def phase_tag(self) -> str:
        return self._phase

    @property
    def search_window(self) -> tuple[float, float] | None:
        return self._swarm._bounds if self._swarm is not None else None

    def _reset(self, duty: float) -> None:
        self._phase = PHASE_FLC_COARSE
        self._coarse = DzFlcController(duty, self._flc_cfg, self._limits)
        self._swarm = None
        self._fine = None
        self._still = 0
        self._detector.disarm()

    def step(self, inp: ControllerInput, measured_power: float) -> float:
        if self._phase == PHASE_FLC_COARSE:
            prev = self._coarse.duty
            self._d = self._coarse.step(inp, measured_power)
            self._still = self._still + 1 if abs(self._d - prev) < self._cfg.coarse_exit_step else 0
            if self._still >= self._cfg.coarse_exit_periods:
                w = self._cfg.window_halfwidth[int(inp.zone_hint)]
                lo = max(self._limits.lo, self._d - w)
                hi = min(self._limits.hi, self._d + w)
                self._swarm = DsaPsoController(self._rng, self._pso_cfg, self._limits,
                                               bounds=(lo, hi), reinit_enabled=False)
                self._phase = PHASE_PSO_SEARCH
            return self._d
        if self._phase == PHASE_PSO_SEARCH:
            self._d = self._swarm.step(inp, measured_power)
            if self._swarm.converged:
                state = self._swarm.state
                self._fine = DzFlcController(state.gbest_d, self._flc_cfg, self._limits,
                                             zone_override=ShadingZone.Zone0)
                self._detector.arm(state.gbest_p)
                self._phase = PHASE_FLC_FINE
            return self._d
        if self._detector.update(measured_power):
            self._reset(self._d)
            return self.step(inp, measured_power)
        self._d = self._fine.step(inp, measured_power)
        return self._d


# ---------------------------------------------------------------------------
# zone estimation and registry

class ZoneEstimator:
    """Infers the shading zone from measured power near power peaks.

    The irradiance fraction is estimated as measured power over rated power,
    held at its last confident value whenever the local P-V slope is large
    (mid-transient readings carry no irradiance information).
    """

    def __init__(self, rated_power: float, slope_tolerance: float = 5.0,
                 dp_tolerance: float = 0.5):
        if rated_power <= 0:
            raise ValueError("rated_power must be positive")
        self.rated_power = rated_power
        self.slope_tolerance = slope_tolerance
        self.dp_tolerance = dp_tolerance
        self._g_est = 0.0
        self._prev: tuple[float, float] | None = None

    @property
    def g_estimate(self) -> float:
        return self._g_est

    def estimate(self, v_pv: float, i_pv: float) -> ShadingZone:
        from .shading import classify_zone

        p = v_pv * i_pv
        if self._prev is not None:
            prev_v, prev_p = self._prev
            dv = v_pv - prev_v
            if abs(dv) < 1e-6:
                confident = abs(p - prev_p) < self.dp_tolerance
            else:
                confident = abs((p - prev_p) / dv) < self.slope_tolerance
            if confident:
                self._g_est = min(max(p / self.rated_power, 0.0), 1.0)
        self._prev = (v_pv, p)
        return classify_zone([self._g_est])


CONTROLLER_IDS = ("po", "flc", "dzflc", "pso", "dsa-pso", "hybrid")


def _merged(config_cls, overrides: dict | None):
    base = config_cls()
    if not overrides:
        return base
    fields = {f for f in base.__dataclass_fields__}
    unknown = set(overrides) - fields
    if unknown:
        raise ValueError(f"unknown {config_cls.__name__} keys: {sorted(unknown)}")
    coerced = {}
    for key, value in overrides.items():
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        coerced[key] = value
    return replace(base, **coerced)


def make_controller(controller_id: str, *, initial_duty: float, seed: int,
                    hyper: dict | None = None,
                    limits: DutyLimits = DutyLimits()) -> Controller:
    """Build a controller by registry id with optional hyperparameter overrides."""
    if controller_id == "po":
        return PoController(initial_duty, _merged(PoConfig, hyper), limits)
    if controller_id == "flc":
        return FlcController(initial_duty, _merged(FlcConfig, hyper), limits)
    if controller_id == "dzflc":
        return DzFlcController(initial_duty, _merged(DzFlcConfig, hyper), limits)
    if controller_id == "pso":
        return PsoController(seed, _merged(PsoConfig, hyper), limits)
    if controller_id == "dsa-pso":
        return DsaPsoController(seed, _merged(DsaPsoConfig, hyper), limits)
    if controller_id == "hybrid":
        hyper = dict(hyper or {})
        flc_over = hyper.pop("flc", None)
        pso_over = hyper.pop("pso", None)
        return HybridController(initial_duty, seed, _merged(HybridConfig, hyper),
                                _merged(DzFlcConfig, flc_over),
                                _merged(DsaPsoConfig, pso_over), limits)
    raise ValueError(f"unknown controller id {controller_id!r}; "
                     f"known: {', '.join(CONTROLLER_IDS)}")
