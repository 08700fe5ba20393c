import math
import random
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pvlab.mppt import (
    CONTROLLER_IDS,
    ControllerInput,
    DsaPsoConfig,
    DsaPsoController,
    DutyLimits,
    DzFlcConfig,
    DzFlcController,
    FlcController,
    HybridController,
    PoController,
    PsoController,
    ReinitDetector,
    SwarmState,
    ZoneEstimator,
    init_swarm,
    make_controller,
    pso_velocity_update,
)
from pvlab.shading import ShadingZone

LIMITS = DutyLimits()


def inp(v=100.0, i=3.0, t=0.0, zone=ShadingZone.Zone0):
    return ControllerInput(v_pv=v, i_pv=i, t=t, zone_hint=zone)


def drive(controller, p_of_d, v_of_d, n, d0=0.1, zone=ShadingZone.Zone0):
    """Scripted plant: power and voltage respond to last period's duty."""
    d_applied = d0
    duties, phases = [], []
    for k in range(n):
        v = v_of_d(d_applied)
        p = p_of_d(d_applied)
        d_applied = controller.step(inp(v=v, i=p / v, t=k * 1e-3, zone=zone), p)
        duties.append(d_applied)
        phases.append(controller.phase_tag)
    return duties, phases


# ---------------------------------------------------------------------------
# limits and inputs

def test_duty_limits():
    assert LIMITS.clamp(0.5) == 0.5
    assert LIMITS.clamp(0.01) == 0.05
    assert LIMITS.clamp(0.99) == 0.95
    with pytest.raises(ValueError):
        DutyLimits(0.5, 0.5)
    with pytest.raises(ValueError):
        DutyLimits(-0.1, 0.5)


def test_controller_input_validation():
    with pytest.raises(ValueError):
        ControllerInput(v_pv=-1.0, i_pv=0.0, t=0.0)
    with pytest.raises(ValueError):
        ControllerInput(v_pv=1.0, i_pv=-0.1, t=0.0)


# ---------------------------------------------------------------------------
# P&O

def test_po_keeps_direction_while_power_rises():
    po = PoController(0.5)
    d1 = po.step(inp(), 100.0)
    assert d1 == pytest.approx(0.505)
    d2 = po.step(inp(), 110.0)          # rose: keep climbing
    assert d2 == pytest.approx(0.510)
    d3 = po.step(inp(), 105.0)          # fell: reverse
    assert d3 == pytest.approx(0.505)
    d4 = po.step(inp(), 103.0)          # fell again: reverse again
    assert d4 == pytest.approx(0.510)


def test_po_oscillates_at_peak():
    # quadratic plant peaked at d = 0.6
    po = PoController(0.4)
    duties, _ = drive(po, lambda d: 500 - 4000 * (d - 0.6) ** 2,
                      lambda d: 150 * (1 - d) + 10, 400, d0=0.4)
    tail = duties[-20:]
    assert max(tail) - min(tail) <= 0.0101
    assert abs(sum(tail) / len(tail) - 0.6) < 0.02


def test_po_respects_limits():
    po = PoController(0.94)
    for _ in range(50):
        d = po.step(inp(), 1000.0)  # power "always rising": would run away
        assert 0.05 <= d <= 0.95


# ---------------------------------------------------------------------------
# FLC and DZ-FLC

def test_flc_first_step_probes():
    flc = FlcController(0.3)
    assert flc.step(inp(), 100.0) == pytest.approx(0.305)


def test_flc_stationary_point_is_fixed():
    flc = FlcController(0.3)
    flc.step(inp(v=100.0), 400.0)
    flc.step(inp(v=100.0), 400.0)   # dv under epsilon: E forced to 0
    d_before = flc.duty
    for _ in range(5):
        assert flc.step(inp(v=100.0), 400.0) == pytest.approx(d_before)


def test_flc_sign_convention():
    # power rising with voltage: peak is at higher voltage, duty must fall
    flc = FlcController(0.5)
    flc.step(inp(v=100.0), 500.0)   # duty is 0.505 after the probe step
    d = flc.step(inp(v=102.0), 520.0)
    assert d < 0.505
    neg = FlcController(0.5)
    neg.step(inp(v=100.0), 500.0)
    d2 = neg.step(inp(v=102.0), 480.0)  # power falling with voltage
    assert d2 > 0.505


def test_flc_converges_on_quadratic_plant():
    flc = FlcController(0.3)
    duties, _ = drive(flc, lambda d: 500 - 3000 * (d - 0.6) ** 2,
                      lambda d: 150 * (1 - d) + 10, 1500, d0=0.3)
    assert duties[-1] == pytest.approx(0.6, abs=0.01)
    assert abs(duties[-1] - duties[-2]) < 1e-3


def test_dzflc_zone_gain_scales_output():
    base = DzFlcConfig()
    outs = {}
    for zone in ShadingZone:
        flc = DzFlcController(0.5, base)
        flc.step(inp(v=100.0, zone=zone), 500.0)
        d = flc.step(inp(v=102.0, zone=zone), 520.0)
        outs[zone] = d - flc._cfg.bootstrap_step - 0.5
    assert outs[ShadingZone.Zone3] == pytest.approx(4.0 * outs[ShadingZone.Zone0], rel=1e-9)
    assert outs[ShadingZone.Zone2] == pytest.approx(3.0 * outs[ShadingZone.Zone0], rel=1e-9)
    assert outs[ShadingZone.Zone1] == pytest.approx(2.0 * outs[ShadingZone.Zone0], rel=1e-9)


def test_dzflc_gain_monotone_in_zone():
    for e, ce in [(0.3, 0.1), (-0.5, 0.2), (0.8, -0.4), (-0.2, -0.6)]:
        mags = []
        for zone in ShadingZone:
            flc = DzFlcController(0.5)
            flc.step(inp(v=100.0, zone=zone), 500.0)
            dv, dp = 2.0, e * 100.0 * 2.0
            d = flc.step(inp(v=102.0, zone=zone), 500.0 + dp)
            mags.append(abs(d - 0.505))
        assert all(a <= b + 1e-12 for a, b in zip(mags, mags[1:]))


def test_dzflc_zone_override():
    a = DzFlcController(0.5, zone_override=ShadingZone.Zone0)
    b = DzFlcController(0.5)
    for c in (a, b):
        c.step(inp(v=100.0, zone=ShadingZone.Zone3), 500.0)
    da = a.step(inp(v=102.0, zone=ShadingZone.Zone3), 520.0)
    db = b.step(inp(v=102.0, zone=ShadingZone.Zone3), 520.0)
    assert abs(da - 0.505) == pytest.approx(abs(db - 0.505) / 4.0, rel=1e-9)


# ---------------------------------------------------------------------------
# swarm mechanics

def test_init_swarm_layout():
    s = init_swarm(6, (0.1, 0.6))
    assert s.positions[0] == pytest.approx(0.1)
    assert s.positions[-1] == pytest.approx(0.6)
    assert all(v == 0.0 for v in s.velocities)
    assert all(p == -math.inf for p in s.pbest_p)
    assert init_swarm(1, (0.2, 0.4)).positions == [pytest.approx(0.3)]
    with pytest.raises(ValueError):
        init_swarm(3, (0.5, 0.5))
    with pytest.raises(ValueError):
        init_swarm(0, (0.1, 0.9))


class _ZeroRng:
    def random(self):
        return 0.0


def test_velocity_update_advances_by_old_velocity():
    s = init_swarm(3, (0.1, 0.9))
    s.velocities = [0.01, -0.02, 0.03]
    before = list(s.positions)
    pso_velocity_update(s, w=1.0, c1=1.8, c2=1.8, v_max=0.1,
                        bounds=(0.0, 1.0), rng=_ZeroRng())
    for x0, v, x1 in zip(before, [0.01, -0.02, 0.03], s.positions):
        assert x1 == pytest.approx(x0 + v)


def test_single_particle_without_attraction_never_moves():
    pso = PsoController(seed=1, config=__import__("pvlab.mppt", fromlist=["PsoConfig"]).PsoConfig(
        n_particles=1, c1=0.0, c2=0.0))
    duties, _ = drive(pso, lambda d: 100.0, lambda d: 50.0, 30)
    assert len(set(round(d, 12) for d in duties)) == 1


def test_velocity_clamped():
    s = init_swarm(2, (0.1, 0.9))
    s.pbest_d = [0.9, 0.1]
    s.pbest_p = [1.0, 1.0]
    s.gbest_d, s.gbest_p = 0.9, 1.0

    class _OneRng:
        def random(self):
            return 1.0

    pso_velocity_update(s, w=0.6, c1=2.0, c2=2.0, v_max=0.1,
                        bounds=(0.0, 1.0), rng=_OneRng())
    assert all(abs(v) <= 0.1 + 1e-12 for v in s.velocities)


def _parabola(d):
    return max(800.0 - 3000.0 * (d - 0.62) ** 2, 1.0)


def test_pso_sequential_protocol_and_convergence():
    pso = PsoController(seed=42)
    duties, phases = drive(pso, _parabola, lambda d: 150 * (1 - d) + 10, 400)
    state = pso.state
    assert state.converged
    assert phases[-1] == "converged"
    assert duties[-1] == pytest.approx(state.gbest_d)
    assert state.gbest_d == pytest.approx(0.62, abs=0.02)
    # during search, the first 6 emitted duties are the 6 initial particles
    assert duties[0] == pytest.approx(0.05)
    assert duties[5] == pytest.approx(0.95)


def test_gbest_history_monotone():
    def bimodal(d):
        return max(600.0 - 9000.0 * (d - 0.25) ** 2, 800.0 - 5000.0 * (d - 0.7) ** 2, 1.0)

    pso = PsoController(seed=7)
    drive(pso, bimodal, lambda d: 150 * (1 - d) + 10, 500)
    h = pso.state.gbest_history
    assert len(h) >= 2
    assert all(a <= b + 1e-12 for a, b in zip(h, h[1:]))
    assert pso.state.gbest_d == pytest.approx(0.7, abs=0.02)


def test_pso_reinit_on_sustained_power_loss():
    pso = PsoController(seed=42)
    drive(pso, _parabola, lambda d: 150 * (1 - d) + 10, 400)
    assert pso.state.converged
    gbest_before = pso.state.gbest_d
    # plant collapses: >10% deviation sustained three periods
    shifted = lambda d: 0.5 * _parabola(d)
    for k in range(3):
        pso.step(inp(t=k * 1e-3), shifted(gbest_before))
    assert not pso.state.converged  # respawned
    duties, _ = drive(pso, shifted, lambda d: 150 * (1 - d) + 10, 400)
    assert pso.state.converged
    assert pso.state.gbest_d == pytest.approx(0.62, abs=0.02)


def test_pso_small_ripple_never_reinits():
    pso = PsoController(seed=42)
    drive(pso, _parabola, lambda d: 150 * (1 - d) + 10, 400)
    p0 = pso.state.gbest_p
    for k in range(200):
        ripple = 1.0 + 0.05 * math.sin(k / 3.0)
        pso.step(inp(t=k * 1e-3), p0 * ripple)
    assert pso.state.converged


def test_dsa_zone_schedules():
    cfg = DsaPsoConfig()
    for zone, (w, c, rng) in {
        ShadingZone.Zone0: (0.40, 1.5, (0.45, 0.75)),
        ShadingZone.Zone1: (0.50, 1.5, (0.40, 0.80)),
        ShadingZone.Zone2: (0.60, 2.0, (0.30, 0.90)),
        ShadingZone.Zone3: (0.70, 2.0, (0.10, 0.95)),
    }.items():
        assert cfg.w_schedule[int(zone)] == pytest.approx(w)
        assert cfg.c_schedule[int(zone)] == pytest.approx(c)
        assert cfg.init_ranges[int(zone)] == rng


def test_dsa_initializes_from_zone_hint():
    dsa = DsaPsoController(seed=1)
    dsa.step(inp(zone=ShadingZone.Zone0), 100.0)
    lo, hi = min(dsa.state.positions), max(dsa.state.positions)
    assert lo == pytest.approx(0.45) and hi == pytest.approx(0.75)
    dsa3 = DsaPsoController(seed=1)
    dsa3.step(inp(zone=ShadingZone.Zone3), 100.0)
    assert min(dsa3.state.positions) == pytest.approx(0.10)
    assert max(dsa3.state.positions) == pytest.approx(0.95)


def test_dsa_zone_changes_trajectory():
    a = DsaPsoController(seed=5)
    b = DsaPsoController(seed=5)
    da, _ = drive(a, _parabola, lambda d: 150 * (1 - d) + 10, 60,
                  zone=ShadingZone.Zone0)
    db, _ = drive(b, _parabola, lambda d: 150 * (1 - d) + 10, 60,
                  zone=ShadingZone.Zone3)
    assert da != db


# ---------------------------------------------------------------------------
# hybrid

def test_hybrid_phase_progression_synthetic():
    hy = HybridController(0.2, seed=42)
    duties, phases = drive(hy, _parabola, lambda d: 150 * (1 - d) + 10, 900)
    assert re.fullmatch(r"C+S+F*", "".join(
        {"FlcCoarse": "C", "PsoSearch": "S", "FlcFine": "F"}[p] for p in phases))
    assert "PsoSearch" in phases and "FlcFine" in phases
    assert duties[-1] == pytest.approx(0.62, abs=0.02)


def test_hybrid_window_confines_search():
    hy = HybridController(0.2, seed=42)
    duties, phases = drive(hy, _parabola, lambda d: 150 * (1 - d) + 10, 900)
    win = hy.search_window
    assert win is not None
    lo, hi = win
    assert hi - lo <= 0.2 + 1e-9
    for d, ph in zip(duties, phases):
        if ph == "PsoSearch":
            assert lo - 1e-9 <= d <= hi + 1e-9


def test_hybrid_reinit_returns_to_coarse():
    hy = HybridController(0.2, seed=42)
    drive(hy, _parabola, lambda d: 150 * (1 - d) + 10, 900)
    assert hy.phase_tag == "FlcFine"
    d_now = hy._d
    for k in range(4):
        hy.step(inp(t=k * 1e-3), 0.3 * _parabola(d_now))
    assert hy.phase_tag == "FlcCoarse"


# ---------------------------------------------------------------------------
# detector and zone estimator

def test_reinit_detector_basics():
    det = ReinitDetector()
    assert not det.update(500.0)        # unarmed: never fires
    det.arm(500.0)
    assert not det.update(510.0)
    assert not det.update(430.0)        # one big deviation
    assert not det.update(430.0)        # two
    assert det.update(430.0)            # three: fire and auto-disarm
    assert not det.armed


def test_reinit_detector_resets_on_recovery():
    det = ReinitDetector()
    det.arm(500.0)
    det.update(430.0)
    det.update(430.0)
    det.update(500.0)                   # back inside: streak resets
    assert not det.update(430.0)
    assert not det.update(430.0)
    assert det.update(430.0)


def test_reinit_detector_tracks_slow_drift():
    det = ReinitDetector()
    det.arm(500.0)
    p = 500.0
    for _ in range(300):
        p *= 0.998                       # 0.2% per period: gentle ramp
        assert not det.update(p)
    assert det.reference == pytest.approx(p, rel=0.06)


def test_zone_estimator_sequence():
    z = ZoneEstimator(rated_power=1000.0)
    assert z.estimate(160.0, 0.5) is ShadingZone.Zone3   # no history yet
    # flat pair of readings at 950 W: confident, mean irradiance ~0.95
    z2 = ZoneEstimator(rated_power=1000.0)
    z2.estimate(100.0, 9.5)
    assert z2.estimate(100.0, 9.5) is ShadingZone.Zone0
    # steep slope: keep previous estimate
    assert z2.estimate(140.0, 1.0) is ShadingZone.Zone0
    assert z2.g_estimate == pytest.approx(0.95)


def test_zone_estimator_clamps():
    z = ZoneEstimator(rated_power=100.0)
    z.estimate(50.0, 4.0)
    z.estimate(50.0, 4.0)               # 200 W on a 100 W rating
    assert z.g_estimate == 1.0
    with pytest.raises(ValueError):
        ZoneEstimator(rated_power=0.0)


# ---------------------------------------------------------------------------
# registry

def test_registry_ids_and_errors():
    for cid in CONTROLLER_IDS:
        c = make_controller(cid, initial_duty=0.1, seed=3)
        assert hasattr(c, "step")
    with pytest.raises(ValueError):
        make_controller("nosuch", initial_duty=0.1, seed=3)
    with pytest.raises(ValueError):
        make_controller("po", initial_duty=0.1, seed=3, hyper={"bogus": 1})


def test_registry_hyper_overrides():
    po = make_controller("po", initial_duty=0.5, seed=0, hyper={"step": 0.02})
    assert po.step(inp(), 100.0) == pytest.approx(0.52)
    hy = make_controller("hybrid", initial_duty=0.1, seed=0,
                         hyper={"coarse_exit_periods": 3,
                                "flc": {"bootstrap_step": 0.01},
                                "pso": {"n_particles": 4}})
    assert hy._cfg.coarse_exit_periods == 3
    assert hy._flc_cfg.bootstrap_step == 0.01
    assert hy._pso_cfg.n_particles == 4


@pytest.mark.parametrize("cid", CONTROLLER_IDS)
def test_duty_always_within_limits(cid):
    ctrl = make_controller(cid, initial_duty=0.1, seed=11)
    rng = random.Random(13)
    for k in range(300):
        p = rng.uniform(0.0, 1200.0)
        v = rng.uniform(1.0, 170.0)
        d = ctrl.step(inp(v=v, i=p / v, t=k * 1e-3,
                          zone=ShadingZone(rng.randrange(4))), p)
        assert 0.05 <= d <= 0.95


@pytest.mark.parametrize("cid", ["po", "pso", "dsa-pso", "hybrid"])
def test_controllers_deterministic(cid):
    def run_once():
        ctrl = make_controller(cid, initial_duty=0.1, seed=21)
        duties, _ = drive(ctrl, _parabola, lambda d: 150 * (1 - d) + 10, 300)
        return duties
    assert run_once() == run_once()
