"""Averaged boost converter model: steady-state relations and RK4 state stepping.

The averaged (duty-continuous) model captures control-period dynamics without
switching ripple; the switching frequency is kept only for the ripple estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoostParams:
    inductance: float = 4.7e-3
    capacitance: float = 470e-6
    r_load: float = 10.0
    fs: float = 25e3

    def __post_init__(self):
        for name in ("inductance", "capacitance", "r_load", "fs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class BoostState:
    iL: float = 0.0
    vC: float = 0.0

    def __post_init__(self):
        if self.iL < 0 or self.vC < 0:
            raise ValueError("inductor current and capacitor voltage must be non-negative")


def steady_gain(d: float) -> float:
    """Ideal boost voltage ratio 1/(1 - d)."""
    if not 0.0 <= d < 1.0:
        raise ValueError("duty cycle must lie in [0, 1)")
    return 1.0 / (1.0 - d)


def input_resistance(d: float, params: BoostParams) -> float:
    """Load resistance reflected to the converter input: R*(1 - d)^2."""
    if not 0.0 <= d < 1.0:
        raise ValueError("duty cycle must lie in [0, 1)")
    return params.r_load * (1.0 - d) ** 2


def equilibrium(params: BoostParams, vin: float, d: float) -> BoostState:
    """Fixed point of the averaged dynamics for a constant input voltage and duty."""
    gain = steady_gain(d)
    return BoostState(iL=vin * gain * gain / params.r_load, vC=vin * gain)


def ripple_estimate(vin: float, d: float, params: BoostParams) -> float:
    """Peak-to-peak inductor current ripple of the underlying switched converter."""
    return vin * d / (params.inductance * params.fs)


def _derivatives(iL: float, vC: float, vin: float, d: float,
                 params: BoostParams) -> tuple[float, float]:
    di = (vin - (1.0 - d) * vC) / params.inductance
    dv = ((1.0 - d) * iL - vC / params.r_load) / params.capacitance
    return di, dv


def step_averaged(state: BoostState, vin: float, d: float, dt: float,
                  params: BoostParams) -> BoostState:
    """One explicit RK4 step of the averaged dynamics, then iL clamped at zero.

    The clamp is the discontinuous-conduction approximation: the diode blocks
    reverse inductor current.
    """
    if not 0.0 <= d < 1.0:
        raise ValueError("duty cycle must lie in [0, 1)")
    if not 0.0 < dt <= 50e-6:
        raise ValueError("dt must lie in (0, 50e-6] for integration accuracy")
    iL, vC = state.iL, state.vC
    k1 = _derivatives(iL, vC, vin, d, params)
    k2 = _derivatives(iL + 0.5 * dt * k1[0], vC + 0.5 * dt * k1[1], vin, d, params)
    k3 = _derivatives(iL + 0.5 * dt * k2[0], vC + 0.5 * dt * k2[1], vin, d, params)
    k4 = _derivatives(iL + dt * k3[0], vC + dt * k3[1], vin, d, params)
    iL += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    vC += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return BoostState(iL=max(iL, 0.0), vC=max(vC, 0.0))


def step_response(params: BoostParams, vin: float, d: float, duration: float,
                  dt: float = 20e-6,
                  state: BoostState = BoostState()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate from the given state at constant input; returns (t, iL, vC) arrays."""
    steps = max(int(round(duration / dt)), 1)
    t = np.empty(steps + 1)
    iL = np.empty(steps + 1)
    vC = np.empty(steps + 1)
    t[0], iL[0], vC[0] = 0.0, state.iL, state.vC
    s = state
    for k in range(1, steps + 1):
        s = step_averaged(s, vin, d, dt, params)
        t[k], iL[k], vC[k] = k * dt, s.iL, s.vC
    return t, iL, vC


@dataclass(frozen=True)
class StepMetrics:
    final: float
    overshoot_pct: float
    rise_time_s: float


def _first_crossing(t: np.ndarray, v: np.ndarray, level: float) -> float:
    idx = int(np.argmax(v >= level))
    if v[idx] < level:
        return math.nan
    if idx == 0:
        return float(t[0])
    t0, t1, v0, v1 = t[idx - 1], t[idx], v[idx - 1], v[idx]
    return float(t0 + (level - v0) * (t1 - t0) / (v1 - v0))


def step_metrics(t: np.ndarray, v: np.ndarray) -> StepMetrics:
    """Final value, percent overshoot, and 10-90% rise time of a step trace."""
    final = float(v[-1])
    if final <= 0:
        raise ValueError("trace must settle to a positive value")
    overshoot = max(0.0, 100.0 * (float(v.max()) - final) / final)
    t10 = _first_crossing(t, v, 0.1 * final)
    t90 = _first_crossing(t, v, 0.9 * final)
    return StepMetrics(final=final, overshoot_pct=overshoot, rise_time_s=t90 - t10)
