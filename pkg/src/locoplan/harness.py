"""Experiment pipelines gluing the layers together.

The harness derives the per-step synthesis problems of a reactive
scenario by dry-running the strategy automaton over the environment
script, builds the per-step controller libraries, runs closed-loop
walks, and produces Monte-Carlo reports.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from locoplan.abstraction import build_abstraction
from locoplan.executor import (
    ENV_ABRUPT_CHANGE,
    EnvEvent,
    ExecConfig,
    ModeRoleConfig,
    MonteCarloReport,
    REACHED_GOAL,
    ReactiveRun,
    VelocityKick,
    execute_reactive_planner,
    monte_carlo_ows,
)
from locoplan.phase_plan import level_to_keyframe, plan_ows
from locoplan.reach_synth import OwsPolicy, PolicyStore, ReachabilityBackend, synthesize_pair
from locoplan.rfts import Margin, RftsOws, build_rfts
from locoplan.scenarios import OwsScenario, ReactiveScenario
from locoplan.task_game import (
    EnvAction,
    GameModel,
    StrategyAutomaton,
    build_locomotion_game,
    keyframe_level,
    solve_locomotion_game,
    strategy_step,
)
from locoplan.templates import ComState, Keyframe, ModeKind, TemplateParams


@dataclass
class StepPlan:
    """One walking step's synthesis problem, derived from the automaton."""

    index: int
    env: EnvAction
    kf_initial: Keyframe
    kf_final: Keyframe
    params1: TemplateParams
    params2: TemplateParams
    s1: int
    s2: int
    margins: Tuple[Margin, Margin]
    state_box: Tuple[float, float, float, float]
    control1: Tuple[float, float]
    control2: Tuple[float, float]


def solve_task_automaton() -> Tuple[GameModel, StrategyAutomaton]:
    model = build_locomotion_game()
    auto = solve_locomotion_game(model)
    if not isinstance(auto, StrategyAutomaton):
        raise RuntimeError("locomotion game unexpectedly unrealizable")
    return model, auto


def plan_reactive_steps(
    scn: ReactiveScenario,
    automaton: StrategyAutomaton,
    model: GameModel,
) -> List[StepPlan]:
    """Dry-run the automaton over the env script and derive each step's
    keyframes, template parameters, and synthesis box."""
    actions = scn.env_actions()
    if not actions:
        return []
    node = automaton.initial[actions[0]]
    nd = automaton.node(node)
    kf0 = level_to_keyframe(keyframe_level(nd.q), scn.level_table, 0.0)
    kf_cur = Keyframe(scn.initial_contact_x, kf0.apex_vx)
    if 0 in scn.keyframe_overrides:
        kf_cur = Keyframe(*scn.keyframe_overrides[0])
    mode_cur = nd.p
    s_cur = nd.s

    plans: List[StepPlan] = []
    prev_switch_x: Optional[float] = None
    for i, act in enumerate(actions[1:], start=1):
        dec = strategy_step(automaton, node, act)
        if i in scn.keyframe_overrides:
            kf_next = Keyframe(*scn.keyframe_overrides[i])
        else:
            kf_next = level_to_keyframe(
                keyframe_level(dec.keyframe), scn.level_table, kf_cur.contact_x
            )
        role_out = scn.mode_role(mode_cur)
        role_in = scn.mode_role(dec.mode)
        params1 = TemplateParams(mode_cur, role_out.omega_out, kf_cur.contact_x)
        params2 = TemplateParams(dec.mode, role_in.omega_in, kf_next.contact_x)
        plan = plan_ows(kf_cur, kf_next, params1, params2)
        v_peak = max(plan.switch_state.vx, kf_cur.apex_vx, kf_next.apex_vx)
        box = scn.local_box(kf_cur, kf_next, v_peak, x_back=prev_switch_x)
        prev_switch_x = plan.switch_state.x
        plans.append(
            StepPlan(
                index=i,
                env=act,
                kf_initial=kf_cur,
                kf_final=kf_next,
                params1=params1,
                params2=params2,
                s1=int(nd.s if i == 1 else s_cur),
                s2=int(dec.sys_action),
                margins=(
                    Margin(*scn.mode_role(mode_cur).margin),
                    Margin(*scn.mode_role(dec.mode).margin),
                ),
                state_box=box,
                control1=role_out.control_out,
                control2=role_in.control_in,
            )
        )
        node = dec.node
        kf_cur = kf_next
        mode_cur = dec.mode
        s_cur = dec.sys_action
    return plans


def build_step_library(
    scn: ReactiveScenario, step: StepPlan, store: PolicyStore
) -> RftsOws:
    """Synthesize the keyframe-cell transition block for one step."""
    backend = ReachabilityBackend(
        state_box=step.state_box,
        control1=step.control1,
        control2=step.control2,
        disturbance=scn.disturbance,
        dzeta=scn.dzeta,
        eta=scn.eta,
        control_step=scn.control_step,
        s1=step.s1,
        s2=step.s2,
    )
    return build_rfts(
        step.kf_initial,
        step.kf_final,
        step.params1,
        step.params2,
        step.s1,
        step.s2,
        step.margins[0],
        step.margins[1],
        None,
        backend,
        store=store,
        cell_block=scn.block_cells(),
    )


def build_scenario_library(
    scn: ReactiveScenario,
    automaton: StrategyAutomaton,
    model: GameModel,
    store: Optional[PolicyStore] = None,
    progress: Optional[callable] = None,
) -> Tuple[PolicyStore, List[RftsOws]]:
    store = store if store is not None else PolicyStore()
    systems = []
    for step in plan_reactive_steps(scn, automaton, model):
        t0 = time.time()
        rfts = build_step_library(scn, step, store)
        systems.append(rfts)
        if progress:
            progress(
                f"step {step.index}: {step.params1.mode.name}->"
                f"{step.params2.mode.name} admitted "
                f"{len(rfts.transitions)} transitions in {time.time() - t0:.1f}s"
            )
    return store, systems


def run_reactive(
    scn: ReactiveScenario,
    automaton: StrategyAutomaton,
    model: GameModel,
    store: Optional[PolicyStore],
    seed: int,
) -> ReactiveRun:
    events = [
        EnvEvent(
            EnvAction[e.action],
            None if e.abrupt_change_to is None else EnvAction[e.abrupt_change_to],
            e.abrupt_after_holds,
        )
        for e in scn.env_script
    ]
    cfg = ExecConfig(
        dzeta=scn.dzeta,
        r_sim=scn.r_sim if scn.r_sim is not None else scn.disturbance,
        seed=seed,
        max_phase=scn.max_phase,
    )
    mode_config = {
        ModeKind[k]: ModeRoleConfig(v.omega_in, v.omega_out, v.control_in, v.control_out)
        for k, v in scn.mode_roles.items()
    }
    margins = {ModeKind[k]: Margin(*v.margin) for k, v in scn.mode_roles.items()}
    kicks = [VelocityKick(**k) for k in scn.kicks]
    overrides = {k: Keyframe(*v) for k, v in scn.keyframe_overrides.items()}
    return execute_reactive_planner(
        automaton,
        model,
        store,
        events,
        cfg,
        table=scn.level_table,
        mode_config=mode_config,
        initial_contact_x=scn.initial_contact_x,
        keyframe_overrides=overrides,
        margins_by_mode=margins,
        kicks=kicks,
        # generous runaway guard: legitimate states (e.g. a stop braking
        # through low velocity) must never trip it
        domain=(
            scn.full_box[0] - 2.0,
            scn.full_box[1] + 2.0,
            scn.full_box[2] - 1.5,
            scn.full_box[3] + 1.0,
        ),
    )


def synthesize_ows_scenario(
    scn: OwsScenario, disturbance: Optional[Tuple[float, float]] = None
) -> Tuple[OwsPolicy, object]:
    """Build and synthesize the center-pair controller of a one-step
    scenario, optionally overriding the modeled disturbance bound."""
    plan, sub = scn.build()
    if disturbance is not None:
        sub.disturbance = tuple(disturbance)
    ab = build_abstraction(sub, eta=scn.eta, control_step=scn.control_step)
    syn = synthesize_pair(ab)
    return syn.as_policy((0, 0), (0, 0)), ab


def monte_carlo_report(
    scn: OwsScenario,
    policy: OwsPolicy,
    trials: Optional[int] = None,
    r_sim: Optional[Tuple[float, float]] = None,
    seed: Optional[int] = None,
    open_loop: bool = False,
) -> MonteCarloReport:
    plan, _ = scn.build()
    return monte_carlo_ows(
        policy,
        trials if trials is not None else scn.trials,
        r_sim if r_sim is not None else (scn.r_sim or scn.disturbance),
        seed if seed is not None else scn.seed,
        max_phase=scn.max_phase,
        open_loop=open_loop,
        nominal_plan=plan,
        sampler=scn.sampler,
    )


def report_to_json_dict(report: MonteCarloReport) -> dict:
    return {
        "format": "locoplan-monte-carlo/1",
        "trials": report.trials,
        "successes": report.successes,
        "success_rate": report.success_rate,
        "outcomes": report.outcomes,
        "holds": report.holds,
    }


def report_to_csv(report: MonteCarloReport) -> str:
    lines = ["trial,outcome,holds"]
    for i, (o, h) in enumerate(zip(report.outcomes, report.holds)):
        lines.append(f"{i},{o},{h}")
    return "\n".join(lines) + "\n"
