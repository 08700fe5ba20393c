"""pvlab: deterministic PV string simulation and MPPT controller benchmarking."""

from .model import (
    CalibrationError,
    CalibrationTargets,
    DEFAULT_TARGETS,
    EnvInput,
    ModuleParams,
    OperatingPoint,
    PvCurve,
    SolverError,
    StringModel,
    calibrate,
    gmpp_oracle,
    local_maxima,
    module_voltage_at_current,
    solve_module_current,
    string_curve,
)
from .shading import (
    ShadingScenario,
    ShadingZone,
    builtin_scenario,
    builtin_scenarios,
    classify_zone,
    scenario_at,
)
from .fuzzy import LinguisticVariable, MembershipFunction, RuleBase, infer, mppt_rule_base
from .converter import (
    BoostParams,
    BoostState,
    equilibrium,
    input_resistance,
    steady_gain,
    step_averaged,
    step_metrics,
    step_response,
)
from .mppt import (
    CONTROLLER_IDS,
    ControllerInput,
    DutyLimits,
    DsaPsoController,
    DzFlcController,
    FlcController,
    HybridController,
    PoController,
    PsoController,
    ReinitDetector,
    ZoneEstimator,
    make_controller,
)
from .simloop import Metrics, SimConfig, SimTrace, metrics, run

__version__ = "0.1.0"
