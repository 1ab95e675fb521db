"""Nominal one-walking-step (OWS) planning between two keyframes.

A walking step is two semi-step trajectories joined at a contact switch:
the state leaves the first keyframe's nominal orbit exactly where that
orbit intersects the next keyframe's orbit.  This module computes the
switch state, the nominal switch phase, and the discrete keyframe-level
lookup used by the task planner to produce concrete keyframes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from locoplan.templates import (
    ComState,
    Keyframe,
    ModeKind,
    TemplateParams,
    CONSTANT_ACCEL_MODES,
    keyframe_state,
    rk4_step,
    tangent_sigma,
)


class PlanError(ValueError):
    """Base class for nominal planning failures."""


class InfeasibleStepError(PlanError):
    """The two nominal orbits do not intersect with a valid forward state."""


class DegeneratePlanError(PlanError):
    """Initial and final keyframes coincide."""


def orbit_speed_squared(params: TemplateParams, kf: Keyframe, x: float) -> float:
    """Squared velocity at position ``x`` on the nominal orbit through ``kf``."""
    a2 = kf.apex_vx * kf.apex_vx
    m = params.mode
    if m is ModeKind.PIPM:
        d = x - params.contact_x
        return a2 + params.omega**2 * d * d
    if m is ModeKind.PPM:
        d = x - params.contact_x
        return a2 - params.omega**2 * d * d
    if m in CONSTANT_ACCEL_MODES:
        return a2 + 2.0 * params.omega * (x - kf.contact_x)
    return a2  # HM: constant velocity


def _valid_switch(
    params1: TemplateParams,
    kf1: Keyframe,
    x: float,
    lo: float,
    hi: float,
) -> Optional[ComState]:
    v2 = orbit_speed_squared(params1, kf1, x)
    if v2 <= 1e-12:
        return None
    if not (lo < x < hi):
        return None
    return ComState(x, math.sqrt(v2))


def contact_switch(
    params1: TemplateParams,
    kf1: Keyframe,
    params2: TemplateParams,
    kf2: Keyframe,
) -> ComState:
    """Intersection of two adjacent nominal orbits (the contact transition).

    Equal-slope pendular pairs admit a closed form via the orbital-energy
    equality; every other pairing is solved by a bracketed scan plus
    bisection on x.  When the orbits cross more than once the earliest
    crossing along the forward motion is returned.
    """
    if kf2.contact_x <= kf1.contact_x:
        raise InfeasibleStepError(
            f"forward step requires kf2.contact_x > kf1.contact_x "
            f"({kf2.contact_x} <= {kf1.contact_x})"
        )
    lo, hi = kf1.contact_x, kf2.contact_x

    if _orbits_coincide(params1, kf1, params2, kf2, lo, hi):
        # Flat/identical orbits (e.g. two equal-velocity ballistic
        # segments): the transition is taken at the central position.
        mid = 0.5 * (lo + hi)
        v2 = orbit_speed_squared(params1, kf1, mid)
        if v2 <= 1e-12:
            raise InfeasibleStepError("coincident orbits with no forward velocity")
        return ComState(mid, math.sqrt(v2))

    candidates: List[ComState] = []
    if params1.mode is ModeKind.PIPM and params2.mode is ModeKind.PIPM:
        # a1^2 + w1^2 (x-c1)^2 = a2^2 + w2^2 (x-c2)^2
        w1, w2 = params1.omega**2, params2.omega**2
        c1, c2 = params1.contact_x, params2.contact_x
        A = w1 - w2
        B = -2.0 * (w1 * c1 - w2 * c2)
        C = (
            kf1.apex_vx**2
            - kf2.apex_vx**2
            + w1 * c1 * c1
            - w2 * c2 * c2
        )
        if abs(A) < 1e-12:
            if abs(B) < 1e-12:
                raise InfeasibleStepError("coincident orbits have no unique crossing")
            roots = [-C / B]
        else:
            disc = B * B - 4.0 * A * C
            if disc < 0.0:
                raise InfeasibleStepError("orbits do not intersect")
            sq = math.sqrt(disc)
            roots = [(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)]
        for x in roots:
            s = _valid_switch(params1, kf1, x, lo, hi)
            if s is not None:
                candidates.append(s)
    else:
        candidates = _scan_intersections(params1, kf1, params2, kf2, lo, hi)

    if not candidates:
        raise InfeasibleStepError(
            f"no contact switch between {kf1} ({params1.mode.name}) "
            f"and {kf2} ({params2.mode.name})"
        )
    return min(candidates, key=lambda s: s.x)


def _orbits_coincide(
    params1: TemplateParams,
    kf1: Keyframe,
    params2: TemplateParams,
    kf2: Keyframe,
    lo: float,
    hi: float,
) -> bool:
    for i in range(5):
        x = lo + (hi - lo) * i / 4.0
        d = orbit_speed_squared(params1, kf1, x) - orbit_speed_squared(params2, kf2, x)
        if abs(d) > 1e-12:
            return False
    return True


_SCAN_RESOLUTION = 1e-3


def _scan_intersections(
    params1: TemplateParams,
    kf1: Keyframe,
    params2: TemplateParams,
    kf2: Keyframe,
    lo: float,
    hi: float,
) -> List[ComState]:
    """Bracketed root finding on v1^2(x) - v2^2(x) over [lo, hi]."""

    def g(x: float) -> float:
        return orbit_speed_squared(params1, kf1, x) - orbit_speed_squared(
            params2, kf2, x
        )

    n = max(2, int(math.ceil((hi - lo) / _SCAN_RESOLUTION)))
    xs = [lo + (hi - lo) * i / n for i in range(n + 1)]
    out: List[ComState] = []
    prev_x, prev_g = xs[0], g(xs[0])
    for x in xs[1:]:
        cur_g = g(x)
        if prev_g == 0.0:
            s = _valid_switch(params1, kf1, prev_x, lo, hi)
            if s is not None:
                out.append(s)
        elif prev_g * cur_g < 0.0:
            a, b, ga = prev_x, x, prev_g
            for _ in range(80):
                mid = 0.5 * (a + b)
                gm = g(mid)
                if ga * gm <= 0.0:
                    b = mid
                else:
                    a, ga = mid, gm
            s = _valid_switch(params1, kf1, 0.5 * (a + b), lo, hi)
            if s is not None:
                out.append(s)
        prev_x, prev_g = x, cur_g
    return out


@dataclass(frozen=True)
class OwsPlan:
    """Nominal plan for one walking step.

    ``switch_state`` lies on both nominal orbits; ``zeta_switch`` is the
    phase at which the disturbance-free first semi-step reaches it.
    """

    kf_initial: Keyframe
    kf_final: Keyframe
    params1: TemplateParams
    params2: TemplateParams
    switch_state: ComState
    zeta_switch: float

    def __post_init__(self):
        s1 = tangent_sigma(self.params1, self.switch_state, self.kf_initial)
        s2 = tangent_sigma(self.params2, self.switch_state, self.kf_final)
        if abs(s1) > 1e-8 or abs(s2) > 1e-8:
            raise InfeasibleStepError(
                f"switch state off the nominal orbits (sigma1={s1}, sigma2={s2})"
            )


def plan_ows(
    kf1: Keyframe,
    kf2: Keyframe,
    params1: TemplateParams,
    params2: TemplateParams,
    step: float = 0.02,
    max_phase: float = 20.0,
) -> OwsPlan:
    """Plan one walking step between two keyframes.

    The switch phase is found by integrating the nominal first semi-step
    until the switch position is crossed, then bisecting the crossing
    interval down to 1e-6 s.
    """
    if kf1 == kf2:
        raise DegeneratePlanError(f"identical keyframes {kf1}")
    switch = contact_switch(params1, kf1, params2, kf2)

    s = keyframe_state(kf1)
    target_x = switch.x
    zeta = 0.0
    crossed = False
    while zeta < max_phase:
        nxt = rk4_step(params1, s, step)
        if (s.x - target_x) * (nxt.x - target_x) <= 0.0 and nxt.x != s.x:
            crossed = True
            break
        s, zeta = nxt, zeta + step
    if not crossed:
        raise InfeasibleStepError(
            f"first semi-step never reaches the switch position {target_x}"
        )
    lo_t, hi_t = 0.0, step
    for _ in range(60):
        mid = 0.5 * (lo_t + hi_t)
        sm = rk4_step(params1, s, mid)
        if (s.x - target_x) * (sm.x - target_x) <= 0.0:
            hi_t = mid
        else:
            lo_t = mid
        if hi_t - lo_t < 1e-6:
            break
    zeta_switch = zeta + 0.5 * (lo_t + hi_t)
    return OwsPlan(kf1, kf2, params1, params2, switch, zeta_switch)


class Behavior(enum.IntEnum):
    walk = 0
    brachiation = 1
    stop = 2
    hop = 3
    slide = 4


ORDINARY_BEHAVIORS = (Behavior.walk, Behavior.brachiation)
SPECIAL_BEHAVIORS = (Behavior.stop, Behavior.hop, Behavior.slide)


class Level(enum.IntEnum):
    S = 0
    M = 1
    L = 2


@dataclass(frozen=True)
class KeyframeLevel:
    """Discrete keyframe label: behavior plus one or two S/M/L indices.

    Ordinary behaviors (walk, brachiation) carry a velocity level and a
    step level; special behaviors carry a single level.
    """

    behavior: Behavior
    velocity_level: Level
    step_level: Optional[Level] = None

    def __post_init__(self):
        ordinary = self.behavior in ORDINARY_BEHAVIORS
        if ordinary and self.step_level is None:
            raise ValueError(f"{self.behavior.name} keyframes need a step level")
        if not ordinary and self.step_level is not None:
            raise ValueError(f"{self.behavior.name} keyframes carry a single level")


#: Plot-axis value tables: indices 0..4 are stop, S, M, L, swing.
DEFAULT_VELOCITY_VALUES = (0.0, 0.4, 0.6, 0.8, 1.7)
DEFAULT_STEP_VALUES = (0.15, 0.5, 0.6, 0.7, 0.6)


@dataclass(frozen=True)
class LevelTable:
    """Concrete apex-velocity and step-length values for the level indices.

    Each list has five entries: index 0 is the stop value, 1..3 are the
    S/M/L ladder, index 4 is the swing value used by brachiation.  Only
    the S/M/L ladder is required to be strictly increasing (the printed
    swing entries break global monotonicity).
    """

    velocity_values: Tuple[float, ...] = DEFAULT_VELOCITY_VALUES
    step_values: Tuple[float, ...] = DEFAULT_STEP_VALUES

    def __post_init__(self):
        for name, vals in (("velocity", self.velocity_values), ("step", self.step_values)):
            if len(vals) != 5:
                raise ValueError(f"{name}_values needs 5 entries, got {len(vals)}")
            ladder = vals[1:4]
            if not all(a < b for a, b in zip(ladder, ladder[1:])):
                raise ValueError(f"{name} S/M/L ladder must be strictly increasing")


def level_to_keyframe(
    level: KeyframeLevel, table: LevelTable, current_contact_x: float
) -> Keyframe:
    """Concrete next keyframe for a discrete level at the current contact.

    Walk levels read the S/M/L ladder; brachiation always commands the
    swing column; stop pins the apex velocity to zero while keeping a
    level-dependent step length; slide reads the ladder with its single
    level on both axes.  Hops read the ladder one velocity level up: a
    ballistic orbit is flat in the phase plane, so the take-off speed must
    strictly exceed the stance apex it launches from.
    """
    vv, sv = table.velocity_values, table.step_values
    b = level.behavior
    if b is Behavior.walk:
        vel = vv[1 + level.velocity_level]
        step = sv[1 + level.step_level]
    elif b is Behavior.brachiation:
        vel, step = vv[4], sv[4]
    elif b is Behavior.stop:
        vel, step = vv[0], sv[1 + level.velocity_level]
    elif b is Behavior.hop:
        vel = vv[min(2 + level.velocity_level, 4)]
        step = sv[1 + level.velocity_level]
    else:  # slide
        vel = vv[1 + level.velocity_level]
        step = sv[1 + level.velocity_level]
    return Keyframe(current_contact_x + step, vel)
