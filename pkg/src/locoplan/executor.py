"""Closed-loop execution of walking steps with mid-step recovery.

One walking step runs as a sequence of control holds.  At every hold the
executor locates the state's grid cell, checks it is still inside the
active policy's winning set, and applies the stored control (or switches
modes when the policy says so).  Disturbances can push the state out of
the active winning set; the executor then searches the policy store for
an alternative winning set covering the state and switches controllers,
and only if none exists does it hand the step back for replanning.  A
mid-step environment change before the contact switch likewise aborts the
step so the task planner can re-decide.

The outer reactive loop drives the strategy automaton step by step,
realizes each discrete keyframe decision through the nominal planner,
picks the matching stored controller, and executes it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from locoplan.phase_plan import (
    InfeasibleStepError,
    LevelTable,
    OwsPlan,
    level_to_keyframe,
    plan_ows,
)
from locoplan.rfts import Margin, MarginSet, margin_set_for
from locoplan.reach_synth import SWITCH, OwsPolicy, PolicyStore
from locoplan.task_game import (
    AssumptionViolation,
    EnvAction,
    GameModel,
    StrategyAutomaton,
    SysAction,
    keyframe_level,
    strategy_step,
)
from locoplan.templates import ComState, Keyframe, ModeKind, TemplateParams, rk4_step


# -- disturbance samplers ----------------------------------------------------


class UniformDisturbance:
    """Independent uniform disturbance per dimension, drawn once per hold."""

    def __init__(self, bound: Tuple[float, float], rng: np.random.Generator):
        self.bound = np.asarray(bound, dtype=float)
        self.rng = rng

    def __call__(self) -> Tuple[float, float]:
        d = self.rng.uniform(-self.bound, self.bound)
        return (float(d[0]), float(d[1]))


class WorstCaseDisturbance:
    """Constant extreme disturbance, for stress tests."""

    def __init__(self, bound: Tuple[float, float], sign: Tuple[int, int] = (1, 1)):
        self.d = (bound[0] * sign[0], bound[1] * sign[1])

    def __call__(self) -> Tuple[float, float]:
        return self.d


@dataclass
class VelocityKick:
    """Instantaneous state jump injected during a given step and phase."""

    step: int
    at_zeta: float  # local phase within the step
    dx: float = 0.0
    dv: float = 0.0
    fired: bool = False


@dataclass
class ExecConfig:
    dzeta: float = 0.02
    r_sim: Tuple[float, float] = (0.0, 0.0)
    seed: int = 0
    max_phase: float = 8.0  # per-step horizon
    sampler: str = "uniform"  # or "worst"

    def make_sampler(self, rng: np.random.Generator):
        if self.sampler == "worst":
            return WorstCaseDisturbance(self.r_sim)
        return UniformDisturbance(self.r_sim, rng)


@dataclass
class LogRecord:
    step: int
    zeta: float
    x: float
    vx: float
    mode: str
    contact: str
    control: float
    dist_x: float
    dist_v: float
    sigma: float
    zeta_riem: float
    event: str = ""


CSV_COLUMNS = [
    "step", "zeta", "x", "vx", "mode", "contact", "control",
    "dist_x", "dist_v", "sigma", "zeta_riem", "event",
]


@dataclass
class ExecutionLog:
    records: List[LogRecord] = field(default_factory=list)
    events: List[dict] = field(default_factory=list)

    def add(self, rec: LogRecord) -> None:
        self.records.append(rec)

    def note(self, step: int, zeta: float, kind: str, detail: str = "") -> None:
        self.events.append({"step": step, "zeta": zeta, "kind": kind, "detail": detail})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow(
                [
                    r.step,
                    f"{r.zeta:.6f}",
                    f"{r.x:.10g}",
                    f"{r.vx:.10g}",
                    r.mode,
                    r.contact,
                    f"{r.control:.10g}",
                    f"{r.dist_x:.10g}",
                    f"{r.dist_v:.10g}",
                    f"{r.sigma:.10g}",
                    f"{r.zeta_riem:.10g}",
                    r.event,
                ]
            )
        return buf.getvalue()

    def to_json_dict(self) -> dict:
        steps: Dict[int, List[dict]] = {}
        for r in self.records:
            steps.setdefault(r.step, []).append(
                {
                    "zeta": r.zeta, "x": r.x, "vx": r.vx, "mode": r.mode,
                    "contact": r.contact, "control": r.control,
                    "dist": [r.dist_x, r.dist_v],
                    "sigma": r.sigma, "zeta_riem": r.zeta_riem, "event": r.event,
                }
            )
        return {
            "format": "locoplan-execution-log/1",
            "columns": CSV_COLUMNS,
            "steps": [{"step": k, "samples": v} for k, v in sorted(steps.items())],
            "events": self.events,
        }


#: Step outcome kinds.
REACHED_GOAL = "reached_goal"
REPLANNED = "replanned"
FAILED = "failed"

#: Replanning reasons.
OUT_OF_WINNING_SET = "out_of_winning_set"
ENV_ABRUPT_CHANGE = "environment_abrupt_change"


@dataclass
class StepOutcome:
    kind: str
    reason: str = ""
    final_state: ComState = ComState(0.0, 0.0)
    policy_switches: int = 0
    new_env: Optional[EnvAction] = None  # for environment-abrupt-change replans
    holds: int = 0


def _alternative_policy(
    store: Optional[PolicyStore],
    s: ComState,
    phase: int,
    current: OwsPolicy,
) -> Optional[OwsPolicy]:
    """Another stored controller for the same step whose winning set covers
    the state (the control-library fallback)."""
    if store is None:
        return None
    best: Optional[OwsPolicy] = None
    for handle, hit_phase in store.lookup_state(s, phase=phase):
        pol = store.get(handle)
        if pol is current:
            continue
        if (pol.params1, pol.params2, pol.s1, pol.s2) != (
            current.params1, current.params2, current.s1, current.s2,
        ):
            continue
        if best is None or pol.handle() < best.handle():
            best = pol
    return best


def execute_ows(
    policy: OwsPolicy,
    xi_init: ComState,
    cfg: ExecConfig,
    rng: np.random.Generator,
    log: ExecutionLog,
    step_index: int = 0,
    store: Optional[PolicyStore] = None,
    env_change: Optional[Callable[[], Optional[EnvAction]]] = None,
    kicks: Sequence[VelocityKick] = (),
    zeta_offset: float = 0.0,
) -> StepOutcome:
    """Run one walking step under the synthesized controller.

    Implements the three-phase execution: drive within the first mode's
    winning set, switch modes inside the intermediate set when the policy
    commands it, then drive within the second mode's winning set until
    the state enters the final margin box.  A state outside the active
    winning set triggers the alternative-controller search; a mid-step
    environment change before the switch aborts for replanning.
    """
    if abs(policy.dzeta - cfg.dzeta) > 1e-12:
        raise ValueError(
            f"hold step {cfg.dzeta} does not match the policy's {policy.dzeta}"
        )
    sampler = cfg.make_sampler(rng)
    s = xi_init
    phase = 1
    zeta = 0.0
    switches = 0
    holds = 0
    mode_params = {1: policy.params1, 2: policy.params2}
    contact = {1: policy.s1, 2: policy.s2}
    pol = policy

    def record(control: float, dist: Tuple[float, float], event: str = "") -> None:
        mset = pol.initial_set if phase == 1 else pol.final_set
        try:
            z, sg = mset.riem(s)
        except Exception:
            z, sg = float("nan"), float("nan")
        p = mode_params[phase]
        log.add(
            LogRecord(
                step=step_index,
                zeta=zeta_offset + zeta,
                x=s.x,
                vx=s.vx,
                mode=p.mode.name,
                contact=SysAction(contact[phase]).name,
                control=control,
                dist_x=dist[0],
                dist_v=dist[1],
                sigma=sg,
                zeta_riem=z,
                event=event,
            )
        )

    record(float("nan"), (0.0, 0.0), "step-start")
    while zeta < cfg.max_phase:
        if phase == 2 and pol.final_set.contains(s):
            log.note(step_index, zeta_offset + zeta, "reached-goal", pol.handle())
            return StepOutcome(REACHED_GOAL, "", s, switches, holds=holds)

        if env_change is not None and phase == 1:
            new_env = env_change()
            if new_env is not None:
                log.note(step_index, zeta_offset + zeta, "env-abrupt-change", new_env.name)
                return StepOutcome(
                    REPLANNED, ENV_ABRUPT_CHANGE, s, switches, new_env=new_env,
                    holds=holds,
                )

        cell = pol.cell_of(s)
        in_win = cell >= 0 and bool((pol.win1 if phase == 1 else pol.win2)[cell])
        if not in_win:
            alt = _alternative_policy(store, s, phase, pol)
            if alt is not None:
                switches += 1
                log.note(step_index, zeta_offset + zeta, "policy-switch", alt.handle())
                pol = alt
                mode_params = {1: pol.params1, 2: pol.params2}
                contact = {1: pol.s1, 2: pol.s2}
                continue
            log.note(step_index, zeta_offset + zeta, "out-of-winning-set", f"phase{phase}")
            return StepOutcome(REPLANNED, OUT_OF_WINNING_SET, s, switches, holds=holds)

        if phase == 1:
            k = pol.chosen1[cell]
            if k == SWITCH:
                phase = 2
                log.note(step_index, zeta_offset + zeta, "mode-switch", f"cell={cell}")
                record(float("nan"), (0.0, 0.0), "mode-switch")
                continue
            u = float(pol.controls1[k])
        else:
            u = float(pol.controls2[pol.chosen2[cell]])

        d = sampler()
        params = mode_params[phase]
        run = params if params.mode is ModeKind.HM else params.with_omega(u)
        s = rk4_step(run, s, cfg.dzeta, d)
        zeta += cfg.dzeta
        holds += 1
        event = ""
        for kick in kicks:
            if not kick.fired and kick.step == step_index and zeta >= kick.at_zeta:
                s = ComState(s.x + kick.dx, s.vx + kick.dv)
                kick.fired = True
                event = "kick"
                log.note(step_index, zeta_offset + zeta, "kick", f"dv={kick.dv}")
        record(u, d, event)

    log.note(step_index, zeta_offset + zeta, "horizon-exceeded", "")
    return StepOutcome(FAILED, "horizon_exceeded", s, switches, holds=holds)


def execute_ows_nominal(
    plan: OwsPlan,
    final_set: MarginSet,
    xi_init: ComState,
    cfg: ExecConfig,
    log: ExecutionLog,
    step_index: int = 0,
    s1: int = 0,
    s2: int = 0,
    zeta_offset: float = 0.0,
    domain: Optional[Tuple[float, float, float, float]] = None,
    env_change: Optional[Callable[[], Optional[EnvAction]]] = None,
) -> StepOutcome:
    """Disturbance-free reference execution (no synthesized controller):
    ride the first nominal orbit to the switch, then the second into the
    final margin box."""
    s = xi_init
    zeta = 0.0
    phase = 1
    holds = 0
    while zeta < cfg.max_phase:
        if phase == 2 and final_set.contains(s):
            return StepOutcome(REACHED_GOAL, "", s, holds=holds)
        if env_change is not None and phase == 1:
            new_env = env_change()
            if new_env is not None:
                log.note(step_index, zeta_offset + zeta, "env-abrupt-change", new_env.name)
                return StepOutcome(
                    REPLANNED, ENV_ABRUPT_CHANGE, s, new_env=new_env, holds=holds
                )
        if domain is not None and not (
            domain[0] <= s.x <= domain[1] and domain[2] <= s.vx <= domain[3]
        ):
            return StepOutcome(FAILED, "left_state_space", s, holds=holds)
        params = plan.params1 if phase == 1 else plan.params2
        if phase == 1 and s.x >= plan.switch_state.x:
            phase = 2
            log.note(step_index, zeta_offset + zeta, "mode-switch", "nominal")
            continue
        nxt = rk4_step(params, s, cfg.dzeta)
        if phase == 1 and nxt.x > plan.switch_state.x:
            # Split the hold at the crossing so the second mode takes over
            # exactly on the switch point (a full-hold overshoot can leave
            # the tighter orbit bands).
            lo_t, hi_t = 0.0, cfg.dzeta
            for _ in range(30):
                mid = 0.5 * (lo_t + hi_t)
                if rk4_step(params, s, mid).x >= plan.switch_state.x:
                    hi_t = mid
                else:
                    lo_t = mid
            s = rk4_step(params, s, hi_t)
            if hi_t < cfg.dzeta:
                s = rk4_step(plan.params2, s, cfg.dzeta - hi_t)
            phase = 2
            log.note(step_index, zeta_offset + zeta, "mode-switch", "nominal")
        else:
            s = nxt
        zeta += cfg.dzeta
        holds += 1
        try:
            z, sg = final_set.riem(s)
        except Exception:
            z, sg = float("nan"), float("nan")
        log.add(
            LogRecord(
                step=step_index, zeta=zeta_offset + zeta, x=s.x, vx=s.vx,
                mode=params.mode.name, contact=SysAction(s1 if phase == 1 else s2).name,
                control=params.omega, dist_x=0.0, dist_v=0.0,
                sigma=sg, zeta_riem=z,
            )
        )
    return StepOutcome(FAILED, "horizon_exceeded", s, holds=holds)


# -- outer reactive loop -----------------------------------------------------


@dataclass
class EnvEvent:
    """One scripted environment step, optionally changing its mind mid-step."""

    action: EnvAction
    abrupt_change_to: Optional[EnvAction] = None
    abrupt_after_holds: int = 4


@dataclass
class ModeRoleConfig:
    """Template parameters per mode, split by role within a walking step.

    ``omega_in`` anchors the orbit that arrives at a keyframe of this mode
    (the second semi-step); ``omega_out`` the orbit that departs from it.
    Constant-acceleration climbs typically decelerate in and accelerate
    out, hence the split.
    """

    omega_in: float
    omega_out: float
    control_in: Tuple[float, float]
    control_out: Tuple[float, float]


DEFAULT_MODE_CONFIG: Dict[ModeKind, ModeRoleConfig] = {
    ModeKind.PIPM: ModeRoleConfig(3.0, 3.0, (2.0, 4.0), (2.0, 4.0)),
    ModeKind.PPM: ModeRoleConfig(3.0, 3.0, (2.0, 4.0), (2.0, 4.0)),
    ModeKind.MCM: ModeRoleConfig(-2.0, 2.0, (-3.0, -1.0), (1.0, 3.0)),
    ModeKind.SLM: ModeRoleConfig(-1.5, 1.5, (-2.5, -0.5), (0.5, 2.5)),
    ModeKind.HM: ModeRoleConfig(0.0, 0.0, (0.0, 0.0), (0.0, 0.0)),
    ModeKind.SM: ModeRoleConfig(-1.0, 1.0, (-2.0, -0.5), (0.5, 2.0)),
}


@dataclass
class ReactiveRun:
    log: ExecutionLog
    trace: List[Tuple[int, EnvAction, SysAction, ModeKind]]
    outcomes: List[StepOutcome]
    rejected: List[Tuple[int, EnvAction, str]]
    keyframes: List[Keyframe]


def execute_reactive_planner(
    automaton: StrategyAutomaton,
    model: GameModel,
    store: Optional[PolicyStore],
    env_source: Iterable[EnvEvent],
    cfg: ExecConfig,
    table: Optional[LevelTable] = None,
    mode_config: Optional[Dict[ModeKind, ModeRoleConfig]] = None,
    initial_contact_x: float = 0.0,
    keyframe_overrides: Optional[Dict[int, Keyframe]] = None,
    margins_by_mode: Optional[Dict[ModeKind, Margin]] = None,
    kicks: Sequence[VelocityKick] = (),
    domain: Optional[Tuple[float, float, float, float]] = None,
) -> ReactiveRun:
    """Drive the strategy automaton through scripted environment events.

    Each step queries the automaton for (keyframe, contact, mode), turns
    the keyframe level into a concrete keyframe, plans the nominal step,
    picks a stored controller when one covers the current state, executes,
    and feeds replanning outcomes back into the decision query.
    Inadmissible environment actions are logged and rejected.
    """
    table = table or model.level_table
    mode_config = mode_config or DEFAULT_MODE_CONFIG
    keyframe_overrides = keyframe_overrides or {}
    rng = np.random.default_rng(cfg.seed)
    log = ExecutionLog()
    outcomes: List[StepOutcome] = []
    rejected: List[Tuple[int, EnvAction, str]] = []

    events = list(env_source)
    if not events:
        return ReactiveRun(log, [], [], [], [])

    first = events[0].action
    if first not in automaton.initial:
        raise AssumptionViolation(f"{first.name} is not an admissible initial action")
    node = automaton.initial[first]
    nd = automaton.node(node)
    trace: List[Tuple[int, EnvAction, SysAction, ModeKind]] = [
        (nd.q, nd.e, nd.s, nd.p)
    ]
    if 0 in keyframe_overrides:
        kf_cur = keyframe_overrides[0]
    else:
        kf0 = level_to_keyframe(keyframe_level(nd.q), table, 0.0)
        kf_cur = Keyframe(initial_contact_x, kf0.apex_vx)
    keyframes = [kf_cur]
    mode_cur = nd.p
    s = ComState(kf_cur.contact_x, kf_cur.apex_vx)
    zeta_global = 0.0

    step = 1
    i = 1
    pending: Optional[EnvAction] = None
    while i < len(events) or pending is not None:
        if pending is not None:
            ev = EnvEvent(pending)
            pending = None
        else:
            ev = events[i]
            i += 1
        try:
            dec = strategy_step(automaton, node, ev.action)
        except AssumptionViolation as exc:
            rejected.append((step, ev.action, str(exc)))
            log.note(step, zeta_global, "assumption-violation", ev.action.name)
            continue

        kf_next = keyframe_overrides.get(
            step, level_to_keyframe(keyframe_level(dec.keyframe), table, kf_cur.contact_x)
        )
        mc_out = mode_config[mode_cur]
        mc_in = mode_config[dec.mode]
        params1 = TemplateParams(mode_cur, mc_out.omega_out, kf_cur.contact_x)
        params2 = TemplateParams(dec.mode, mc_in.omega_in, kf_next.contact_x)

        try:
            plan = plan_ows(kf_cur, kf_next, params1, params2)
        except InfeasibleStepError as exc:
            log.note(step, zeta_global, "infeasible-step", str(exc))
            outcomes.append(StepOutcome(FAILED, f"infeasible: {exc}", s))
            break

        env_change_cb = _make_env_change(ev)
        attempts = 0
        while True:
            policy = _select_policy(store, params1, params2, s)
            if policy is not None:
                out = execute_ows(
                    policy, s, cfg, rng, log,
                    step_index=step, store=store, env_change=env_change_cb,
                    kicks=kicks, zeta_offset=zeta_global,
                )
            else:
                margin = Margin(0.05, 0.02)
                if margins_by_mode and dec.mode in margins_by_mode:
                    margin = margins_by_mode[dec.mode]
                final_set = margin_set_for(
                    kf_next, params2, margin, plan.switch_state
                )
                out = execute_ows_nominal(
                    plan, final_set, s, cfg, log,
                    step_index=step, s1=int(dec.sys_action), s2=int(dec.sys_action),
                    zeta_offset=zeta_global, domain=domain, env_change=env_change_cb,
                )
            outcomes.append(out)
            s = out.final_state
            zeta_global += out.holds * cfg.dzeta
            if (
                out.kind == REPLANNED
                and out.reason == OUT_OF_WINNING_SET
                and attempts == 0
            ):
                # One fresh decision from the disturbed state: a different
                # stored goal set may cover it.
                attempts += 1
                log.note(step, zeta_global, "replanning", OUT_OF_WINNING_SET)
                continue
            break

        if out.kind == REPLANNED and out.reason == ENV_ABRUPT_CHANGE:
            # Re-query the automaton with the changed action (same step slot).
            pending = out.new_env
            continue
        if out.kind != REACHED_GOAL:
            break

        node = dec.node
        nd = automaton.node(node)
        trace.append((nd.q, nd.e, nd.s, nd.p))
        kf_cur = kf_next
        keyframes.append(kf_cur)
        mode_cur = dec.mode
        step += 1
    return ReactiveRun(log, trace, outcomes, rejected, keyframes)


def _make_env_change(ev: EnvEvent) -> Optional[Callable[[], Optional[EnvAction]]]:
    if ev.abrupt_change_to is None:
        return None
    counter = {"n": 0}
    changed = ev.abrupt_change_to

    def cb() -> Optional[EnvAction]:
        counter["n"] += 1
        if counter["n"] > ev.abrupt_after_holds:
            return changed
        return None

    return cb


def _select_policy(
    store: Optional[PolicyStore], params1: TemplateParams, params2: TemplateParams,
    s: ComState,
) -> Optional[OwsPolicy]:
    """Stored controller for this mode pair whose first winning set covers
    the current state; the centermost cell pair wins ties."""
    if store is None or len(store) == 0:
        return None
    best: Optional[OwsPolicy] = None

    def rank(p: OwsPolicy) -> tuple:
        ci, cf = p.cell_initial, p.cell_final
        return (abs(ci[0]) + abs(ci[1]), abs(cf[0]) + abs(cf[1]), p.handle())

    for pol in store.policies():
        if (pol.params1, pol.params2) != (params1, params2):
            continue
        c = pol.cell_of(s)
        if c < 0 or not pol.win1[c]:
            continue
        if best is None or rank(pol) < rank(best):
            best = pol
    return best


# -- vectorized Monte-Carlo path ---------------------------------------------


@dataclass
class MonteCarloReport:
    trials: int
    successes: int
    outcomes: List[str]
    holds: List[int]

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


def sample_initial_states(
    policy: OwsPolicy, n: int, rng: np.random.Generator, max_tries: int = 200000
) -> np.ndarray:
    """Uniform samples from the initial margin box intersected with the
    first winning set (rejection sampling over the winning hull)."""
    win_cells = np.flatnonzero(policy.win1)
    if win_cells.size == 0:
        raise ValueError("empty first winning set")
    boxes = policy.grid.cell_boxes()
    xlo, xhi = boxes[0][win_cells].min(), boxes[1][win_cells].max()
    vlo, vhi = boxes[2][win_cells].min(), boxes[3][win_cells].max()
    out = np.empty((n, 2))
    got = 0
    tries = 0
    init = policy.initial_set
    while got < n:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("rejection sampling failed; margin set too thin?")
        m = max(4 * (n - got), 256)
        x = rng.uniform(xlo, xhi, m)
        v = rng.uniform(vlo, vhi, m)
        cells = policy.grid.cell_of_many(x, v)
        ok = (cells >= 0) & policy.win1[np.clip(cells, 0, None)]
        ok &= init.contains_many(x, v)
        take = min(int(ok.sum()), n - got)
        idx = np.flatnonzero(ok)[:take]
        out[got : got + take, 0] = x[idx]
        out[got : got + take, 1] = v[idx]
        got += take
    return out


def _accel_vec(mode: ModeKind, u: np.ndarray, contact: float, x: np.ndarray) -> np.ndarray:
    if mode is ModeKind.PIPM:
        return u * u * (x - contact)
    if mode is ModeKind.PPM:
        return -u * u * (x - contact)
    if mode is ModeKind.HM:
        return np.zeros_like(x)
    return u


def _rk4_vec(
    mode: ModeKind, u: np.ndarray, contact: float,
    x: np.ndarray, v: np.ndarray, dt: float,
    dx: np.ndarray, dv: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    def f(xx, vv):
        return vv + dx, _accel_vec(mode, u, contact, xx) + dv

    k1x, k1v = f(x, v)
    k2x, k2v = f(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
    k3x, k3v = f(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
    k4x, k4v = f(x + dt * k3x, v + dt * k3v)
    return (
        x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
        v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
    )


def monte_carlo_ows(
    policy: OwsPolicy,
    trials: int,
    r_sim: Tuple[float, float],
    seed: int,
    max_phase: float = 8.0,
    open_loop: bool = False,
    nominal_plan: Optional[OwsPlan] = None,
    starts: Optional[np.ndarray] = None,
    sampler: str = "hold_uniform",
) -> MonteCarloReport:
    """Lockstep simulation of many one-step trials under one controller.

    ``sampler`` picks the disturbance realization: ``hold_uniform`` draws
    independently per hold interval; ``trial_constant`` draws one bias per
    trial and holds it for the whole step (a sustained within-bound
    disturbance, much harder for an uncorrected rollout).  ``open_loop``
    replaces the feedback policy by the fixed nominal control with a
    time-scheduled mode switch, as a baseline.  No alternative-controller
    search happens here; a state out of the winning set simply fails the
    trial.
    """
    rng = np.random.default_rng(seed)
    if starts is None:
        starts = sample_initial_states(policy, trials, rng)
    x = starts[:, 0].copy()
    v = starts[:, 1].copy()
    n = len(x)
    phase = np.ones(n, dtype=np.int8)
    active = np.ones(n, dtype=bool)
    outcome = np.full(n, "", dtype=object)
    holds_used = np.zeros(n, dtype=np.int64)
    r = np.asarray(r_sim, dtype=float)
    grid = policy.grid
    dz = policy.dzeta
    n_holds = int(math.ceil(max_phase / dz))

    if open_loop:
        if nominal_plan is None:
            raise ValueError("open-loop baseline needs the nominal plan")
        switch_hold = int(round(nominal_plan.zeta_switch / dz))

    if sampler == "trial_constant":
        dx_bias = rng.uniform(-r[0], r[0], n)
        dv_bias = rng.uniform(-r[1], r[1], n)
    elif sampler != "hold_uniform":
        raise ValueError(f"unknown sampler {sampler!r}")

    for hold in range(n_holds):
        if not active.any():
            break
        # goal test (phase 2 only)
        in_goal = np.zeros(n, dtype=bool)
        p2 = active & (phase == 2)
        if p2.any():
            in_goal[p2] = policy.final_set.contains_many(x[p2], v[p2])
        newly = p2 & in_goal
        outcome[newly] = REACHED_GOAL
        active &= ~newly
        if not active.any():
            break

        cells = grid.cell_of_many(x, v)
        off = active & (cells < 0)
        outcome[off] = "left_state_space"
        active &= ~off
        cells = np.clip(cells, 0, None)

        if open_loop:
            if hold >= switch_hold:
                phase[active] = 2
            u1 = np.full(n, nominal_plan.params1.omega)
            u2 = np.full(n, nominal_plan.params2.omega)
        else:
            # out-of-winning-set fails the trial (no library in this path)
            p1m = active & (phase == 1)
            p2m = active & (phase == 2)
            bad1 = p1m & ~policy.win1[cells]
            bad2 = p2m & ~policy.win2[cells]
            outcome[bad1 | bad2] = OUT_OF_WINNING_SET
            active &= ~(bad1 | bad2)

            # policy-driven mode switches (instantaneous)
            p1m = active & (phase == 1)
            k1 = policy.chosen1[cells]
            to_switch = p1m & (k1 == SWITCH)
            phase[to_switch] = 2
            in_goal2 = np.zeros(n, dtype=bool)
            if to_switch.any():
                in_goal2[to_switch] = policy.final_set.contains_many(
                    x[to_switch], v[to_switch]
                )
                hit = to_switch & in_goal2
                outcome[hit] = REACHED_GOAL
                active &= ~hit

            u1 = np.where(k1 >= 0, policy.controls1[np.clip(k1, 0, None)], 0.0)
            k2 = policy.chosen2[cells]
            u2 = np.where(k2 >= 0, policy.controls2[np.clip(k2, 0, None)], 0.0)

        if sampler == "trial_constant":
            dx, dv = dx_bias, dv_bias
        else:
            dx = rng.uniform(-r[0], r[0], n)
            dv = rng.uniform(-r[1], r[1], n)
        for ph, params, u in ((1, policy.params1, u1), (2, policy.params2, u2)):
            m = active & (phase == ph)
            if not m.any():
                continue
            nx, nv = _rk4_vec(
                params.mode, u[m], params.contact_x, x[m], v[m], dz, dx[m], dv[m]
            )
            x[m], v[m] = nx, nv
            holds_used[m] += 1

    outcome[active] = "horizon_exceeded"
    successes = int((outcome == REACHED_GOAL).sum())
    return MonteCarloReport(
        trials=n,
        successes=successes,
        outcomes=list(outcome),
        holds=holds_used.tolist(),
    )
