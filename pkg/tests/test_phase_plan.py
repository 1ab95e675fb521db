"""One-walking-step planning tests.

Switch-state expectations were derived by hand from the orbital-energy
equality and cross-checked by verifying both tangent coordinates vanish.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locoplan.phase_plan import (
    Behavior,
    DegeneratePlanError,
    InfeasibleStepError,
    KeyframeLevel,
    Level,
    LevelTable,
    _scan_intersections,
    contact_switch,
    level_to_keyframe,
    orbit_speed_squared,
    plan_ows,
)
from locoplan.templates import (
    ComState,
    Keyframe,
    ModeKind,
    TemplateParams,
    keyframe_state,
    rk4_step,
    tangent_sigma,
)


def pipm(omega, contact):
    return TemplateParams(ModeKind.PIPM, omega, contact)


class TestContactSwitch:
    def test_case_pair_hand_value(self):
        # 9x^2 + 0.25 = 9(x-0.5)^2 + 0.36  ->  x = 2.36/9
        s = contact_switch(pipm(3, 0.0), Keyframe(0.0, 0.5), pipm(3, 0.5), Keyframe(0.5, 0.6))
        assert s.x == pytest.approx(0.26222, abs=1e-5)
        assert s.vx == pytest.approx(0.93212, abs=1e-5)
        assert abs(tangent_sigma(pipm(3, 0.0), s, Keyframe(0.0, 0.5))) < 1e-10
        assert abs(tangent_sigma(pipm(3, 0.5), s, Keyframe(0.5, 0.6))) < 1e-10

    def test_symmetric_pair_meets_at_midpoint(self):
        s = contact_switch(pipm(3, 0.0), Keyframe(0.0, 0.5), pipm(3, 0.4), Keyframe(0.4, 0.5))
        assert s.x == pytest.approx(0.2, abs=1e-12)

    def test_intersection_outside_contacts_is_infeasible(self):
        # Energy equality solves to x = 2.13, far beyond the 0.1 m gap.
        with pytest.raises(InfeasibleStepError):
            contact_switch(pipm(3, 0.0), Keyframe(0.0, 0.5), pipm(3, 0.1), Keyframe(0.1, 2.0))

    def test_disjoint_orbits_are_infeasible(self):
        # A PPM orbit entirely below the PIPM orbit: no real crossing.
        ppm = TemplateParams(ModeKind.PPM, 3.0, 0.3)
        with pytest.raises(InfeasibleStepError):
            contact_switch(pipm(3, 0.0), Keyframe(0.0, 0.5), ppm, Keyframe(0.3, 0.4))

    def test_backward_step_rejected(self):
        with pytest.raises(InfeasibleStepError):
            contact_switch(pipm(3, 0.5), Keyframe(0.5, 0.5), pipm(3, 0.0), Keyframe(0.0, 0.5))

    def test_closed_form_matches_root_scan(self):
        p1, p2 = pipm(3, 0.0), pipm(3.5, 0.5)
        kf1, kf2 = Keyframe(0.0, 0.5), Keyframe(0.5, 0.6)
        closed = contact_switch(p1, kf1, p2, kf2)
        scanned = min(
            _scan_intersections(p1, kf1, p2, kf2, 0.0, 0.5), key=lambda s: s.x
        )
        assert closed.x == pytest.approx(scanned.x, abs=1e-9)
        assert closed.vx == pytest.approx(scanned.vx, abs=1e-9)

    def test_pipm_to_ppm_takes_earliest_crossing(self):
        # Hyperbola and ellipse cross twice; the early hand-off wins.
        ppm = TemplateParams(ModeKind.PPM, 3.0, 0.6)
        s = contact_switch(pipm(3, 0.0), Keyframe(0.0, 0.5), ppm, Keyframe(0.6, 1.7))
        assert s.x == pytest.approx(0.061943, abs=1e-5)
        assert abs(tangent_sigma(ppm, s, Keyframe(0.6, 1.7))) < 1e-9

    def test_pipm_to_decelerating_mcm(self):
        mcm = TemplateParams(ModeKind.MCM, -2.0, 0.7)
        s = contact_switch(pipm(3, 0.0), Keyframe(0.0, 0.4), mcm, Keyframe(0.7, 0.4))
        assert 0.0 < s.x < 0.7
        assert abs(tangent_sigma(mcm, s, Keyframe(0.7, 0.4))) < 1e-9


class TestPlanOws:
    def test_nominal_plan_integrates_through_switch(self):
        plan = plan_ows(
            Keyframe(0.0, 0.5), Keyframe(0.5, 0.6), pipm(3, 0.0), pipm(3, 0.5)
        )
        # First semi-step replays onto the switch state.
        s = keyframe_state(plan.kf_initial)
        remaining = plan.zeta_switch
        while remaining > 1e-12:
            dt = min(0.002, remaining)
            s = rk4_step(plan.params1, s, dt)
            remaining -= dt
        assert s.x == pytest.approx(plan.switch_state.x, abs=1e-4)
        assert s.vx == pytest.approx(plan.switch_state.vx, abs=1e-4)
        # Second semi-step lands on the final keyframe.
        while s.x < plan.kf_final.contact_x:
            s = rk4_step(plan.params2, s, 0.001)
        assert abs(s.vx - plan.kf_final.apex_vx) < 1e-4

    def test_degenerate_plan_rejected(self):
        with pytest.raises(DegeneratePlanError):
            plan_ows(Keyframe(0.0, 0.5), Keyframe(0.0, 0.5), pipm(3, 0.0), pipm(3, 0.0))

    def test_ballistic_step_switches_at_midpoint(self):
        hm = TemplateParams(ModeKind.HM)
        plan = plan_ows(Keyframe(0.2, 0.8), Keyframe(0.8, 0.8), hm, hm)
        assert plan.switch_state.x == pytest.approx(0.5, abs=1e-9)
        assert plan.zeta_switch == pytest.approx(0.3 / 0.8, abs=1e-5)


@settings(max_examples=40, deadline=None)
@given(
    a1=st.floats(0.3, 0.9),
    a2=st.floats(0.3, 0.9),
    gap=st.floats(0.2, 0.7),
    w1=st.floats(2.0, 4.0),
    w2=st.floats(2.0, 4.0),
)
def test_feasible_pipm_pairs_roundtrip(a1, a2, gap, w1, w2):
    """Whenever a plan exists its switch state sits on both orbits and the
    nominal replay reaches it (independent integration oracle)."""
    kf1, kf2 = Keyframe(0.0, a1), Keyframe(gap, a2)
    p1, p2 = pipm(w1, 0.0), pipm(w2, gap)
    try:
        plan = plan_ows(kf1, kf2, p1, p2)
    except InfeasibleStepError:
        return
    v2 = orbit_speed_squared(p1, kf1, plan.switch_state.x)
    assert plan.switch_state.vx == pytest.approx(math.sqrt(v2), rel=1e-9)
    s = keyframe_state(kf1)
    remaining = plan.zeta_switch
    while remaining > 1e-12:
        dt = min(0.002, remaining)
        s = rk4_step(p1, s, dt)
        remaining -= dt
    assert s.x == pytest.approx(plan.switch_state.x, abs=1e-4)


class TestLevelTable:
    def test_walk_levels(self):
        t = LevelTable()
        kf = level_to_keyframe(
            KeyframeLevel(Behavior.walk, Level.S, Level.M), t, 0.0
        )
        assert kf == Keyframe(0.6, 0.4)
        kf = level_to_keyframe(
            KeyframeLevel(Behavior.walk, Level.L, Level.L), t, 1.0
        )
        assert kf == Keyframe(pytest.approx(1.7), pytest.approx(0.8))

    def test_stop_has_zero_apex(self):
        t = LevelTable()
        kf = level_to_keyframe(KeyframeLevel(Behavior.stop, Level.M), t, 0.5)
        assert kf.apex_vx == 0.0
        assert kf.contact_x == pytest.approx(1.1)

    def test_brachiation_commands_the_swing_column(self):
        t = LevelTable()
        kf = level_to_keyframe(
            KeyframeLevel(Behavior.brachiation, Level.S, Level.S), t, 0.0
        )
        assert kf == Keyframe(pytest.approx(0.6), pytest.approx(1.7))

    def test_ladder_must_increase(self):
        with pytest.raises(ValueError):
            LevelTable(velocity_values=(0.0, 0.6, 0.4, 0.8, 1.7))

    def test_special_levels_take_single_index(self):
        with pytest.raises(ValueError):
            KeyframeLevel(Behavior.stop, Level.S, Level.M)
        with pytest.raises(ValueError):
            KeyframeLevel(Behavior.walk, Level.S)
