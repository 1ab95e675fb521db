"""Closed-form locomotion template dynamics and phase-space manifolds.

Six sagittal center-of-mass templates are supported.  Two are pendular
(``PIPM`` repels from a stance foot, ``PPM`` attracts toward an overhead
hand contact) and four are constant-acceleration segments (``SLM`` stop /
launch, ``MCM`` multi-contact, ``HM`` ballistic hop, ``SM`` ground slide).

Each template carries a pair of phase-space manifolds used everywhere
above this module:

* the tangent coordinate ``sigma`` measures deviation from the nominal
  orbit through a keyframe (``sigma == 0`` on the nominal orbit), and
* the cotangent coordinate ``zeta`` measures progression along the orbit
  relative to a reference state.

All functions here are pure; they are safe to call concurrently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Tuple, Union


class ModeKind(enum.IntEnum):
    """Locomotion template identifiers, in the stable export order 0..5."""

    PIPM = 0
    PPM = 1
    SLM = 2
    MCM = 3
    HM = 4
    SM = 5


#: Modes whose sagittal acceleration is constant (= omega).
CONSTANT_ACCEL_MODES = frozenset({ModeKind.SLM, ModeKind.MCM, ModeKind.SM})


class TemplateError(ValueError):
    """Base class for template-dynamics errors."""


class InvalidStateError(TemplateError):
    """A state or parameter contains non-finite values."""


class SingularReferenceError(TemplateError):
    """The cotangent reference coincides with the contact point (or omega == 0)."""


class DomainError(TemplateError):
    """A manifold formula was evaluated outside its domain (e.g. vx <= 0)."""


class DivergenceError(TemplateError):
    """Numerical integration produced a non-finite state."""


class ComState(NamedTuple):
    """Sagittal center-of-mass state (position m, velocity m/s)."""

    x: float
    vx: float


class Keyframe(NamedTuple):
    """Apex of one walking step: contact position and apex velocity."""

    contact_x: float
    apex_vx: float


class RiemCoord(NamedTuple):
    """Riemannian image of a state: progression ``zeta``, deviation ``sigma``."""

    zeta: float
    sigma: float


Disturbance = Union[float, Tuple[float, float]]


def _as_pair(d: Disturbance) -> Tuple[float, float]:
    if isinstance(d, (int, float)):
        return (0.0, float(d))
    return (float(d[0]), float(d[1]))


@dataclass(frozen=True)
class TemplateParams:
    """One template's parameters.

    ``omega`` is the phase-space asymptote slope (rad/s) for PIPM/PPM and
    the constant sagittal acceleration (m/s^2, signed) for SLM/MCM/SM.
    ``HM`` ignores both ``omega`` and ``contact_x``.
    """

    mode: ModeKind
    omega: float = 0.0
    contact_x: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.omega) and math.isfinite(self.contact_x)):
            raise InvalidStateError(f"non-finite template parameters: {self}")
        if self.mode in (ModeKind.PIPM, ModeKind.PPM) and self.omega <= 0.0:
            raise SingularReferenceError(
                f"{self.mode.name} requires omega > 0, got {self.omega}"
            )

    def with_omega(self, omega: float) -> "TemplateParams":
        return TemplateParams(self.mode, omega, self.contact_x)


def keyframe_state(kf: Keyframe) -> ComState:
    """The keyframe as a continuous state (apex sits at the contact anchor)."""
    return ComState(kf.contact_x, kf.apex_vx)


def accel(params: TemplateParams, x: float, omega: Optional[float] = None) -> float:
    """Nominal sagittal acceleration of ``params`` at position ``x``.

    ``omega`` overrides the stored parameter (this is how the synthesized
    controller varies the template within one semi-step).
    """
    w = params.omega if omega is None else omega
    m = params.mode
    if m is ModeKind.PIPM:
        return w * w * (x - params.contact_x)
    if m is ModeKind.PPM:
        return -w * w * (x - params.contact_x)
    if m in CONSTANT_ACCEL_MODES:
        return w
    return 0.0  # HM: ballistic, no sagittal force


def vector_field(
    params: TemplateParams, s: ComState, d: Disturbance = 0.0
) -> Tuple[float, float]:
    """Disturbed state derivative ``(dx, dvx)``.

    The disturbance splits additively from the nominal field; a scalar
    ``d`` is shorthand for ``(0, d)`` acting on the acceleration channel.
    """
    if not (math.isfinite(s.x) and math.isfinite(s.vx)):
        raise InvalidStateError(f"non-finite state {s}")
    dx, dv = _as_pair(d)
    return (s.vx + dx, accel(params, s.x) + dv)


def tangent_sigma(params: TemplateParams, s: ComState, kf: Keyframe) -> float:
    """Deviation of ``s`` from the nominal orbit through keyframe ``kf``.

    PIPM orbits are hyperbolas and PPM orbits ellipses in the phase plane;
    the constant-acceleration modes share a single parabolic form.  For HM
    the orbit is a horizontal line, so the deviation is just the velocity
    offset.
    """
    m = params.mode
    a = kf.apex_vx
    if m is ModeKind.PIPM or m is ModeKind.PPM:
        if params.omega == 0.0:
            raise SingularReferenceError("omega == 0 makes the tangent manifold singular")
        w2 = params.omega * params.omega
        dx = s.x - params.contact_x
        if m is ModeKind.PIPM:
            return (a * a / w2) * (s.vx * s.vx - a * a - w2 * dx * dx)
        return (a * a / -w2) * (s.vx * s.vx - a * a + w2 * dx * dx)
    if m in CONSTANT_ACCEL_MODES:
        # Parabolic orbit anchored at the apex (kf.contact_x, kf.apex_vx).
        return 2.0 * params.omega * (s.x - kf.contact_x) - (s.vx * s.vx - a * a)
    return s.vx - a  # HM


def cotangent_zeta(
    params: TemplateParams, s: ComState, ref: ComState, zeta0: float = 1.0
) -> float:
    """Progression of ``s`` along the orbit, scaled against reference ``ref``.

    For the pendular modes ``ref`` must differ from the contact anchor in x
    and carry a positive velocity.  The constant-acceleration modes use the
    keyframe state itself as the natural reference; a zero-velocity
    reference (stop keyframes) degrades to plain position progression.
    """
    m = params.mode
    if m is ModeKind.PIPM or m is ModeKind.PPM:
        if ref.x == params.contact_x:
            raise SingularReferenceError(
                "cotangent reference must differ from the contact point"
            )
        if ref.vx <= 0.0:
            raise DomainError("cotangent reference velocity must be positive")
        if s.vx <= 0.0:
            raise DomainError(f"velocity {s.vx} not in the cotangent domain")
        w2 = params.omega * params.omega
        expo = w2 if m is ModeKind.PIPM else -w2
        ratio = s.vx / ref.vx
        return (
            zeta0
            * math.pow(ratio, expo)
            * (s.x - params.contact_x)
            / (ref.x - params.contact_x)
        )
    if m in CONSTANT_ACCEL_MODES:
        if ref.vx == 0.0:
            return s.x - ref.x  # stop keyframe: position progression
        if s.vx <= 0.0 or ref.vx < 0.0:
            raise DomainError(f"velocity {s.vx} not in the cotangent domain")
        return params.omega * math.log(s.vx / ref.vx) - (s.x - ref.x)
    return s.x - ref.x  # HM


def default_zeta_reference(
    params: TemplateParams, kf: Keyframe, step: float = 0.02
) -> ComState:
    """A usable cotangent reference derived from the keyframe alone.

    The pendular keyframe sits exactly on the contact anchor, which is the
    one singular point of the cotangent formula, so we step the nominal
    flow forward once.  Margin-set construction normally overrides this
    with the contact-switch state of the walking step.
    """
    if params.mode in (ModeKind.PIPM, ModeKind.PPM):
        return rk4_step(params, keyframe_state(kf), step)
    return keyframe_state(kf)


def riem_map(
    params: TemplateParams,
    kf: Keyframe,
    s: ComState,
    ref: Optional[ComState] = None,
) -> RiemCoord:
    """Euclidean-to-Riemannian map: ``s -> (zeta, sigma)`` for one template.

    The keyframe itself maps to ``(0, 0)`` for every mode under the
    conventions used here.
    """
    if ref is None:
        ref = default_zeta_reference(params, kf)
    return RiemCoord(
        cotangent_zeta(params, s, ref),
        tangent_sigma(params, s, kf),
    )


def rk4_step(
    params: TemplateParams,
    s: ComState,
    dt: float,
    d: Disturbance = 0.0,
    omega: Optional[float] = None,
) -> ComState:
    """One fixed-step RK4 update with the disturbance held constant."""
    dx, dv = _as_pair(d)

    def f(x: float, v: float) -> Tuple[float, float]:
        return (v + dx, accel(params, x, omega) + dv)

    k1 = f(s.x, s.vx)
    k2 = f(s.x + 0.5 * dt * k1[0], s.vx + 0.5 * dt * k1[1])
    k3 = f(s.x + 0.5 * dt * k2[0], s.vx + 0.5 * dt * k2[1])
    k4 = f(s.x + dt * k3[0], s.vx + dt * k3[1])
    x = s.x + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    vx = s.vx + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    if not (math.isfinite(x) and math.isfinite(vx)):
        raise DivergenceError(f"integration diverged from {s}")
    return ComState(x, vx)


DisturbanceSampler = Callable[[], Disturbance]


def integrate(
    params: TemplateParams,
    s0: ComState,
    dzeta: float,
    d: Optional[DisturbanceSampler] = None,
    step: float = 0.02,
) -> ComState:
    """Integrate the template flow over a phase interval ``dzeta``.

    The disturbance sampler is drawn once per internal step and held
    constant across that step, matching the zero-order-hold control model
    used by the synthesized controllers.
    """
    if dzeta <= 0.0:
        raise ValueError(f"dzeta must be positive, got {dzeta}")
    s = s0
    remaining = dzeta
    while remaining > 1e-15:
        dt = min(step, remaining)
        dist = d() if d is not None else 0.0
        s = rk4_step(params, s, dt, dist)
        remaining -= dt
    return s
