"""Single-file JSON configuration: defaults, deep merge, hashing, factories.

One config dict drives every entry point. Sections: module (calibration
targets and fixed cell constants), converter, controllers (hyperparameter
overrides keyed by registry id), scenarios (extra named scenarios), sim
(loop timing, seed, duty limits).
"""

from __future__ import annotations

import copy
import hashlib
import json
import os

from .converter import BoostParams
from .model import CalibrationTargets, ModuleParams, calibrate
from .mppt import DutyLimits
from .shading import ShadingScenario, builtin_scenario, builtin_scenarios
from .simloop import SimConfig


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG: dict = {
    "module": {
        "targets": {"vmp": 26.346, "imp": 7.59, "voc": 32.4509, "isc": 8.2162},
        "n": 1.3,
        "rsh": 300.0,
        "ns_cells": 54,
        "bypass_drop": 0.5,
    },
    "converter": {
        "inductance": 4.7e-3,
        "capacitance": 470e-6,
        "r_load": 1500.0,
        "fs": 25000.0,
    },
    "controllers": {
        "po": {},
        "flc": {},
        "dzflc": {},
        "pso": {},
        "dsa-pso": {},
        "hybrid": {},
    },
    "scenarios": {},
    "sim": {
        "seed": 42,
        "duration": 1.5,
        "control_period": 0.001,
        "converter_dt": 2e-05,
        "initial_duty": 0.1,
        "d_min": 0.05,
        "d_max": 0.95,
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None = None) -> dict:
    """Defaults overlaid with the user's JSON file, validated section-wise."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            user = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(user) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for key, value in user.items():
        if not isinstance(value, dict):
            raise ConfigError(f"config section {key!r} must be an object")
    return _deep_merge(DEFAULT_CONFIG, user)


def config_hash(cfg: dict) -> str:
    """sha256 over the canonical JSON encoding; any edit changes it."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def make_module(cfg: dict) -> ModuleParams:
    section = cfg["module"]
    try:
        targets = CalibrationTargets(**section["targets"])
        return calibrate(targets, n=section["n"], rsh=section["rsh"],
                         ns_cells=section["ns_cells"],
                         bypass_drop=section["bypass_drop"])
    except TypeError as exc:
        raise ConfigError(f"bad module section: {exc}") from exc


def make_boost(cfg: dict) -> BoostParams:
    try:
        return BoostParams(**cfg["converter"])
    except TypeError as exc:
        raise ConfigError(f"bad converter section: {exc}") from exc


def make_limits(cfg: dict) -> DutyLimits:
    sim = cfg["sim"]
    return DutyLimits(sim["d_min"], sim["d_max"])


def scenario_names(cfg: dict) -> list[str]:
    names = [sc.name for sc in builtin_scenarios()]
    names.extend(n for n in cfg["scenarios"] if n not in names)
    return names


def resolve_scenario(cfg: dict, name: str) -> ShadingScenario:
    """Config-defined scenarios shadow built-ins; a readable path wins over both."""
    if os.path.exists(name):
        with open(name, "r", encoding="utf-8") as fh:
            return ShadingScenario.from_json(fh.read())
    defined = cfg["scenarios"].get(name)
    if defined is not None:
        data = dict(defined)
        data.setdefault("name", name)
        return ShadingScenario.from_dict(data)
    try:
        return builtin_scenario(name)
    except KeyError:
        known = ", ".join(scenario_names(cfg))
        raise ConfigError(f"unknown scenario {name!r}; known: {known}") from None


def make_sim_config(cfg: dict, scenario: ShadingScenario, controller: str,
                    *, seed: int | None = None,
                    module: ModuleParams | None = None) -> SimConfig:
    sim = cfg["sim"]
    hyper = cfg["controllers"].get(controller) or None
    return SimConfig(scenario=scenario, controller=controller, hyper=hyper,
                     module=module if module is not None else make_module(cfg),
                     boost=make_boost(cfg),
                     seed=sim["seed"] if seed is None else seed,
                     duration=sim["duration"], control_period=sim["control_period"],
                     converter_dt=sim["converter_dt"], initial_duty=sim["initial_duty"],
                     limits=make_limits(cfg))
