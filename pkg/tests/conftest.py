import pytest

try:
    from hypothesis import HealthCheck, settings

    settings.register_profile("suite", max_examples=150, deadline=None,
                              derandomize=True,
                              suppress_health_check=[HealthCheck.too_slow])
    settings.load_profile("suite")
except ImportError:
    pass

# criterion number -> (passed, one line detail), filled by test_acceptance
_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance_log():
    def _record(number: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (bool(passed), detail)
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number:02d} {status}: {detail}")


@pytest.fixture(scope="session")
def module_params():
    from pvlab import calibrate

    return calibrate()


@pytest.fixture(scope="session")
def bench_matrix(module_params):
    """All six controllers on all six presets at seed 42, shared session-wide."""
    from pvlab.mppt import CONTROLLER_IDS
    from pvlab.shading import builtin_scenarios
    from pvlab.simloop import SimConfig, metrics, run

    out = {}
    for scenario in builtin_scenarios():
        for controller in CONTROLLER_IDS:
            trace = run(SimConfig(scenario=scenario, controller=controller,
                                  seed=42, module=module_params))
            out[(scenario.name, controller)] = (trace, metrics(trace))
    return out


@pytest.fixture(scope="session")
def gmpp_by_scenario(module_params):
    from pvlab.model import StringModel, gmpp_oracle
    from pvlab.shading import builtin_scenarios

    out = {}
    for scenario in builtin_scenarios():
        curve = StringModel(module_params, scenario.steps[0].g).curve(2000)
        out[scenario.name] = gmpp_oracle(curve)
    return out
