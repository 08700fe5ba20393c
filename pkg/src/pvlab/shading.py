"""Shading scenarios (six built-in presets plus time-stepped profiles) and zone classing."""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence


class ShadingZone(IntEnum):
    """Shading severity class; ordering follows severity (Zone0 healthiest)."""

    Zone0 = 0
    Zone1 = 1
    Zone2 = 2
    Zone3 = 3


# Half-open mean-irradiance bands: Zone0 [0.90, 1], Zone1 [0.65, 0.90),
# Zone2 [0.40, 0.65), Zone3 [0, 0.40).
_ZONE_EDGES = (0.90, 0.65, 0.40)


def classify_zone(g_vector: Sequence[float]) -> ShadingZone:
    """Zone of the mean irradiance fraction of a module irradiance vector."""
    g = list(g_vector)
    if not g:
        raise ValueError("g_vector must be non-empty")
    mean = sum(g) / len(g)
    if mean >= _ZONE_EDGES[0]:
        return ShadingZone.Zone0
    if mean >= _ZONE_EDGES[1]:
        return ShadingZone.Zone1
    if mean >= _ZONE_EDGES[2]:
        return ShadingZone.Zone2
    return ShadingZone.Zone3


@dataclass(frozen=True)
class ScenarioStep:
    t: float
    g: tuple[float, ...]

    def __post_init__(self):
        if not self.g:
            raise ValueError("step irradiance vector must be non-empty")


@dataclass(frozen=True)
class ShadingScenario:
    """Named, piecewise-constant irradiance profile for a module string."""

    name: str
    steps: tuple[ScenarioStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("scenario needs at least one step")
        if self.steps[0].t != 0.0:
            raise ValueError("first step must start at t = 0")
        times = [s.t for s in self.steps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("step start times must be strictly increasing")
        for step in self.steps:
            for g in step.g:
                if not 0.0 <= g <= 1.0:
                    raise ValueError("irradiance fractions must lie in [0, 1]")

    @staticmethod
    def constant(name: str, g: Sequence[float]) -> "ShadingScenario":
        return ShadingScenario(name, (ScenarioStep(0.0, tuple(float(x) for x in g)),))

    def to_dict(self) -> dict:
        return {"name": self.name, "steps": [{"t": s.t, "g": list(s.g)} for s in self.steps]}

    @staticmethod
    def from_dict(data: dict) -> "ShadingScenario":
        try:
            steps = tuple(ScenarioStep(float(s["t"]), tuple(float(x) for x in s["g"]))
                          for s in data["steps"])
            return ShadingScenario(str(data["name"]), steps)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed scenario: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @staticmethod
    def from_json(text: str) -> "ShadingScenario":
        return ShadingScenario.from_dict(json.loads(text))


def scenario_at(scenario: ShadingScenario, t: float) -> tuple[float, ...]:
    """Irradiance vector of the last step whose start time is <= t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    times = [s.t for s in scenario.steps]
    return scenario.steps[bisect_right(times, t) - 1].g


_PRESETS = (
    ("NoShading", (1.0, 1.0, 1.0, 1.0, 1.0)),
    ("Case1", (0.6, 0.4, 1.0, 1.0, 1.0)),
    ("Case2", (0.6, 0.4, 0.2, 1.0, 1.0)),
    ("Case3", (1.0, 1.0, 0.4, 0.2, 1.0)),
    ("Case4", (0.6, 0.4, 0.2, 0.6, 0.4)),
    ("FullShading", (0.2, 0.2, 0.2, 0.2, 0.2)),
)


def builtin_scenarios() -> list[ShadingScenario]:
    """The six built-in constant scenarios, healthy through fully shaded."""
    return [ShadingScenario.constant(name, g) for name, g in _PRESETS]


def builtin_scenario(name: str) -> ShadingScenario:
    for preset, g in _PRESETS:
        if preset == name:
            return ShadingScenario.constant(preset, g)
    known = ", ".join(p for p, _ in _PRESETS)
    raise KeyError(f"unknown scenario {name!r}; built-ins: {known}")
