"""Interactive session service: a human plays the environment.

The engine owns one session: the strategy automaton node, the continuous
state, and the policy store.  Each environment action the client injects
advances the game by one walking step and returns the robot's decision
plus the executed phase-space trajectory.  Inadmissible actions are
rejected with the violated rule named.  The engine is transport-free;
``make_app`` wraps it in a FastAPI app with a websocket endpoint and a
static file mount for the browser console.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

try:  # service extras are optional; the engine itself is dependency-free
    from fastapi import WebSocket
except ImportError:  # pragma: no cover
    WebSocket = None  # type: ignore[assignment]

from locoplan.executor import (
    ExecConfig,
    ExecutionLog,
    ModeRoleConfig,
    REACHED_GOAL,
    execute_ows,
    execute_ows_nominal,
    _select_policy,
)
from locoplan.harness import solve_task_automaton
from locoplan.phase_plan import InfeasibleStepError, level_to_keyframe, plan_ows
from locoplan.reach_synth import PolicyStore
from locoplan.rfts import Margin, MarginSet, margin_set_for
from locoplan.scenarios import ReactiveScenario, case_interactive
from locoplan.task_game import (
    AssumptionViolation,
    EnvAction,
    StrategyAutomaton,
    env_allowed_next,
    keyframe_level,
    keyframe_name,
    strategy_step,
)
from locoplan.templates import ComState, Keyframe, ModeKind, TemplateParams


@dataclass
class SessionState:
    session_id: int
    node: int
    step: int
    kf: Keyframe
    mode: ModeKind
    state: ComState
    pending: bool = False
    last_activity: float = field(default_factory=time.monotonic)


class SessionEngine:
    """One interactive session over the strategy automaton."""

    def __init__(
        self,
        scenario: Optional[ReactiveScenario] = None,
        store: Optional[PolicyStore] = None,
        idle_timeout: float = 600.0,
        automaton: Optional[StrategyAutomaton] = None,
        model=None,
    ):
        if automaton is None or model is None:
            model, automaton = solve_task_automaton()
        self.model = model
        self.automaton = automaton
        self.store = store
        self.scenario = scenario or case_interactive()
        self.idle_timeout = idle_timeout
        self._session_counter = 0
        self.history: List[dict] = []
        self.session: Optional[SessionState] = None

    # -- lifecycle ----------------------------------------------------------

    def reset(self, first_env: str = "e_md") -> dict:
        env = EnvAction[first_env]
        if env not in self.automaton.initial:
            return self._rejected(f"{first_env} is not an admissible initial action")
        self._session_counter += 1
        node = self.automaton.initial[env]
        nd = self.automaton.node(node)
        kf0 = level_to_keyframe(keyframe_level(nd.q), self.scenario.level_table, 0.0)
        kf = Keyframe(self.scenario.initial_contact_x, kf0.apex_vx)
        self.session = SessionState(
            session_id=self._session_counter,
            node=node,
            step=0,
            kf=kf,
            mode=nd.p,
            state=ComState(kf.contact_x, kf.apex_vx),
        )
        self.history = [
            {"step": 0, "e": nd.e.name, "q": nd.q, "s": int(nd.s), "p": int(nd.p)}
        ]
        return self._state_message(polyline=[], outcome=None)

    @property
    def expired(self) -> bool:
        if self.session is None:
            return False
        return time.monotonic() - self.session.last_activity > self.idle_timeout

    def expire_if_idle(self) -> bool:
        if self.expired:
            self.session = None
            return True
        return False

    # -- message handling -----------------------------------------------------

    def handle(self, message: dict) -> dict:
        kind = message.get("type")
        if kind == "reset":
            return self.reset(message.get("first_env", "e_md"))
        if kind == "env_action":
            return self.env_action(message.get("action", ""))
        return self._rejected(f"unknown message type {kind!r}")

    def env_action(self, action: str) -> dict:
        if self.session is None:
            return self._rejected("no active session; send reset first")
        if self.session.pending:
            return self._rejected("a step is already in progress")
        try:
            env = EnvAction[action]
        except KeyError:
            return self._rejected(f"unknown environment action {action!r}")
        ses = self.session
        ses.last_activity = time.monotonic()
        nd = self.automaton.node(ses.node)
        allowed = env_allowed_next(nd.e)
        if env not in allowed:
            from locoplan.task_game import _ENV_RULE_IDS

            rule = _ENV_RULE_IDS.get(nd.e, "env rules")
            return self._rejected(f"{env.name} after {nd.e.name} violates {rule}")

        ses.pending = True
        try:
            dec = strategy_step(self.automaton, ses.node, env)
            out = self._execute(dec)
        finally:
            ses.pending = False
        return out

    def _execute(self, dec) -> dict:
        ses = self.session
        scn = self.scenario
        kf_next = level_to_keyframe(
            keyframe_level(dec.keyframe), scn.level_table, ses.kf.contact_x
        )
        role_out = scn.mode_role(ses.mode)
        role_in = scn.mode_role(dec.mode)
        params1 = TemplateParams(ses.mode, role_out.omega_out, ses.kf.contact_x)
        params2 = TemplateParams(dec.mode, role_in.omega_in, kf_next.contact_x)
        try:
            plan = plan_ows(ses.kf, kf_next, params1, params2)
        except InfeasibleStepError as exc:
            return self._rejected(f"infeasible step: {exc}")

        cfg = ExecConfig(
            dzeta=scn.dzeta,
            r_sim=scn.r_sim if scn.r_sim is not None else (0.0, 0.0),
            seed=ses.session_id * 1000 + ses.step,
            max_phase=scn.max_phase,
        )
        log = ExecutionLog()
        rng = np.random.default_rng(cfg.seed)
        policy = _select_policy(self.store, params1, params2, ses.state)
        final_margin = Margin(*scn.mode_role(dec.mode).margin)
        if policy is not None:
            outcome = execute_ows(
                policy, ses.state, cfg, rng, log, step_index=ses.step + 1,
                store=self.store,
            )
            win_mask = downsample_mask(policy.grid, policy.win1 | policy.win2)
            margins = {
                "initial": margin_dict(policy.initial_set),
                "final": margin_dict(policy.final_set),
            }
        else:
            final_set = margin_set_for(kf_next, params2, final_margin, plan.switch_state)
            outcome = execute_ows_nominal(
                plan, final_set, ses.state, cfg, log, step_index=ses.step + 1,
                s1=int(dec.sys_action), s2=int(dec.sys_action),
            )
            win_mask = None
            init_set = margin_set_for(
                ses.kf, params1, Margin(*role_out.margin), plan.switch_state
            )
            margins = {
                "initial": margin_dict(init_set),
                "final": margin_dict(final_set),
            }

        ses.state = outcome.final_state
        ses.node = dec.node
        ses.kf = kf_next
        ses.mode = dec.mode
        ses.step += 1
        nd = self.automaton.node(ses.node)
        self.history.append(
            {"step": ses.step, "e": nd.e.name, "q": nd.q, "s": int(nd.s), "p": int(nd.p)}
        )
        polyline = [
            [r.x, r.vx, _clean(r.zeta_riem), _clean(r.sigma)] for r in log.records
        ]
        return self._state_message(polyline, outcome.kind, win_mask, margins)

    # -- message helpers -------------------------------------------------------

    def _state_message(
        self,
        polyline: List[List[float]],
        outcome: Optional[str],
        win_mask: Optional[dict] = None,
        margins: Optional[dict] = None,
    ) -> dict:
        ses = self.session
        nd = self.automaton.node(ses.node)
        return {
            "type": "state",
            "session": ses.session_id,
            "step": ses.step,
            "node": ses.node,
            "q": nd.q,
            "q_name": keyframe_name(nd.q),
            "e": nd.e.name,
            "e_options": [e.name for e in env_allowed_next(nd.e)],
            "p": nd.p.name,
            "s": nd.s.name,
            "keyframe": [ses.kf.contact_x, ses.kf.apex_vx],
            "state": [ses.state.x, ses.state.vx],
            "phase_polyline": polyline,
            "win_mask": win_mask,
            "margins": margins,
            "outcome": outcome,
            "history": self.history,
        }

    def _rejected(self, reason: str) -> dict:
        return {"type": "rejected", "reason": reason}


def _clean(v: float) -> Optional[float]:
    return None if not np.isfinite(v) else float(v)


def margin_dict(ms: MarginSet) -> dict:
    return {
        "d_zeta": ms.margin.d_zeta,
        "d_sigma": ms.margin.d_sigma,
        "offset": list(ms.offset),
        "center": list(ms.center),
        "mode": ms.params.mode.name,
    }


def downsample_mask(grid, bits: np.ndarray, max_side: int = 200) -> dict:
    """Down-sampled winning-set mask small enough to ship to a browser."""
    W = bits.reshape(grid.nx, grid.nv)
    sx = max(1, -(-grid.nx // max_side))
    sv = max(1, -(-grid.nv // max_side))
    small = W[::sx, ::sv]
    packed = np.packbits(small.astype(np.uint8), axis=None)
    return {
        "x0": grid.x0,
        "v0": grid.v0,
        "dx": grid.eta_x * sx,
        "dv": grid.eta_v * sv,
        "nx": int(small.shape[0]),
        "nv": int(small.shape[1]),
        "bits_b64": base64.b64encode(packed.tobytes()).decode(),
    }


def make_app(engine: Optional[SessionEngine] = None, static_dir: Optional[str] = None):
    """FastAPI app exposing the session protocol over a websocket."""
    from fastapi import FastAPI, WebSocketDisconnect
    from fastapi.responses import JSONResponse

    engine = engine or SessionEngine()
    app = FastAPI(title="locoplan session service")
    app.state.engine = engine

    @app.get("/healthz")
    def healthz():
        return JSONResponse({"ok": True, "session": engine.session is not None})

    @app.websocket("/ws")
    async def ws(socket: WebSocket):
        await socket.accept()
        await socket.send_json(engine.reset())
        try:
            while True:
                msg = await socket.receive_json()
                await socket.send_json(engine.handle(msg))
        except WebSocketDisconnect:
            pass

    if static_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = str(candidate) if candidate.is_dir() else None
    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    return app
