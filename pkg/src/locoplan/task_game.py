"""Two-player contact-decision game for the locomotion task planner.

Player 1 (the environment) announces one terrain or emergency action per
walking step; player 2 (the robot) answers with a keyframe, a contact
configuration, and a locomotion mode.  Safety rules constrain both sides:

* environment rules restrict which emergency actions may follow another,
* robot rules tie each environment action to the admissible mode/contact
  responses, and
* keyframe rules restrict how the discrete keyframe may move between
  steps given the upcoming environment action.

Solving the game yields a finite strategy automaton that the execution
layer queries step by step.  A finite-trace checker validates recorded
plays against the same rule set.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from locoplan.gr1 import Gr1Game, Gr1Solution, solve_gr1
from locoplan.phase_plan import Behavior, KeyframeLevel, Level, LevelTable
from locoplan.templates import ModeKind


class EnvAction(enum.IntEnum):
    """Environment actions, in the stable export order 0..7."""

    e_md = 0  # moderately downward terrain
    e_hd = 1  # hugely downward terrain
    e_mu = 2  # moderately upward terrain
    e_hu = 3  # hugely upward terrain
    e_tc_nc = 4  # terrain crack, normal ceiling
    e_tc_hc = 5  # terrain crack, high ceiling
    e_ha = 6  # human appears
    e_np = 7  # narrow passage


TERRAIN_ACTIONS = (EnvAction.e_md, EnvAction.e_hd, EnvAction.e_mu, EnvAction.e_hu)
EMERGENCY_ACTIONS = (EnvAction.e_tc_nc, EnvAction.e_tc_hc, EnvAction.e_ha, EnvAction.e_np)


class SysAction(enum.IntEnum):
    """Leg/arm contact configurations, in the stable export order 0..8."""

    s_lh_an = 0  # leg hind, arm none
    s_lh_ah = 1  # leg hind, arm hind
    s_lh_af = 2  # leg hind, arm fore
    s_ld_ah = 3  # leg dual, arm hind
    s_ld_af = 4  # leg dual, arm fore
    s_ld_ad = 5  # leg dual, arm dual
    s_ld_an = 6  # leg dual, arm none
    s_ln_af = 7  # leg none, arm fore
    s_ln_an = 8  # leg none, arm none


#: Contact configurations a fresh walk may not start from.
_INIT_FORBIDDEN_SYS = frozenset(
    {SysAction.s_ln_af, SysAction.s_ln_an, SysAction.s_ld_ah, SysAction.s_ld_af}
)

N_KEYFRAMES = 27
_LEVEL_NAMES = "sml"


def keyframe_name(q: int) -> str:
    if q < 9:
        return f"walk-{_LEVEL_NAMES[q // 3]}-{_LEVEL_NAMES[q % 3]}"
    if q < 18:
        r = q - 9
        return f"brachiation-{_LEVEL_NAMES[r // 3]}-{_LEVEL_NAMES[r % 3]}"
    r, b = (q - 18) % 3, (q - 18) // 3
    return f"{('stop', 'hop', 'slide')[b]}-{_LEVEL_NAMES[r]}"


KEYFRAME_NAMES = tuple(keyframe_name(q) for q in range(N_KEYFRAMES))
KEYFRAME_IDS = {name: q for q, name in enumerate(KEYFRAME_NAMES)}


def walk_id(vel: int, step: int) -> int:
    return 3 * vel + step


def is_walk(q: int) -> bool:
    return 0 <= q < 9


def keyframe_level(q: int) -> KeyframeLevel:
    """Discrete keyframe id to the level label used by the value table."""
    if q < 9:
        return KeyframeLevel(Behavior.walk, Level(q // 3), Level(q % 3))
    if q < 18:
        r = q - 9
        return KeyframeLevel(Behavior.brachiation, Level(r // 3), Level(r % 3))
    b, r = (q - 18) // 3, (q - 18) % 3
    return KeyframeLevel((Behavior.stop, Behavior.hop, Behavior.slide)[b], Level(r))


#: Consecutive-event restrictions: current env -> forbidden next envs.
ENV_FORBIDDEN_NEXT: Dict[EnvAction, FrozenSet[EnvAction]] = {
    EnvAction.e_tc_hc: frozenset({EnvAction.e_tc_hc, EnvAction.e_ha, EnvAction.e_np}),
    EnvAction.e_tc_nc: frozenset({EnvAction.e_tc_hc, EnvAction.e_ha, EnvAction.e_np}),
    EnvAction.e_np: frozenset({EnvAction.e_tc_hc, EnvAction.e_tc_nc}),
}

_ENV_RULE_IDS = {
    EnvAction.e_tc_hc: "S_e-1",
    EnvAction.e_tc_nc: "S_e-2",
    EnvAction.e_np: "S_e-3",
}


def env_allowed_next(e: EnvAction) -> Tuple[EnvAction, ...]:
    forbidden = ENV_FORBIDDEN_NEXT.get(e, frozenset())
    return tuple(a for a in EnvAction if a not in forbidden)


#: Admissible (mode, contact) responses per environment action.
PS_OPTIONS: Dict[EnvAction, Tuple[Tuple[ModeKind, SysAction], ...]] = {
    EnvAction.e_md: (
        (ModeKind.PIPM, SysAction.s_lh_an),
        (ModeKind.MCM, SysAction.s_lh_ah),
        (ModeKind.MCM, SysAction.s_lh_af),
    ),
    EnvAction.e_mu: (
        (ModeKind.PIPM, SysAction.s_lh_an),
        (ModeKind.MCM, SysAction.s_lh_ah),
        (ModeKind.MCM, SysAction.s_lh_af),
    ),
    EnvAction.e_hu: ((ModeKind.MCM, SysAction.s_lh_ah),),
    EnvAction.e_hd: ((ModeKind.MCM, SysAction.s_lh_af),),
    EnvAction.e_tc_nc: ((ModeKind.PPM, SysAction.s_ln_af),),
    EnvAction.e_tc_hc: ((ModeKind.HM, SysAction.s_ln_an),),
    EnvAction.e_ha: (
        (ModeKind.SLM, SysAction.s_ld_ah),
        (ModeKind.SLM, SysAction.s_ld_af),
        (ModeKind.SLM, SysAction.s_ld_an),
    ),
    EnvAction.e_np: ((ModeKind.SM, SysAction.s_ld_an),),
}

_ROBOT_RULE_IDS = {
    EnvAction.e_md: "S_robot-1",
    EnvAction.e_mu: "S_robot-1",
    EnvAction.e_hu: "S_robot-1",
    EnvAction.e_hd: "S_robot-1",
    EnvAction.e_tc_nc: "S_robot-2",
    EnvAction.e_ha: "S_robot-3",
    EnvAction.e_np: "S_robot-4",
    EnvAction.e_tc_hc: "S_robot-5",
}

#: Modes/contacts reserved for one emergency rule: using them under any
#: other environment action violates that rule's converse direction.
#: (Two maps: IntEnum values collide across the two enums.)
_RESERVED_MODES = {
    ModeKind.PPM: "S_robot-2",
    ModeKind.SLM: "S_robot-3",
    ModeKind.SM: "S_robot-4",
    ModeKind.HM: "S_robot-5",
}
_RESERVED_CONTACTS = {
    SysAction.s_ln_af: "S_robot-2",
    SysAction.s_ld_ah: "S_robot-3",
    SysAction.s_ld_af: "S_robot-3",
    SysAction.s_ln_an: "S_robot-5",
}

_KEYFRAME_RULE_IDS = {
    EnvAction.e_md: "S_q-1",
    EnvAction.e_mu: "S_q-1",
    EnvAction.e_hd: "S_q-2",
    EnvAction.e_hu: "S_q-2",
    EnvAction.e_tc_nc: "S_q-3",
    EnvAction.e_tc_hc: "S_q-4",
    EnvAction.e_ha: "S_q-5",
    EnvAction.e_np: "S_q-6",
}

_WALK_EMERGENCY_REENTRY = (walk_id(0, 1), walk_id(1, 1), walk_id(2, 1))

#: Explicitly listed huge-drop keyframe shifts (velocity level, step level).
_HUGE_LISTED: Dict[Tuple[int, int], Tuple[Tuple[int, int], ...]] = {
    (0, 0): ((1, 0), (0, 1), (2, 0), (0, 2), (1, 1)),
    (0, 1): ((0, 2), (1, 1), (1, 2)),
    (2, 1): ((2, 2),),
    (1, 2): ((2, 2),),
    (2, 2): ((2, 2),),
}


def _moderate_walk_successors(j: int, k: int) -> Tuple[int, ...]:
    out = [walk_id(j, k)]
    if k < 2:
        out.append(walk_id(j, k + 1))
    if j < 2:
        out.append(walk_id(j + 1, k))
    return tuple(sorted(out))


def _huge_walk_successors(j: int, k: int) -> Tuple[int, ...]:
    out = set()
    for dj in range(0, 3):
        for dk in range(0, 3):
            if 1 <= dj + dk <= 2 and j + dj <= 2 and k + dk <= 2:
                out.add(walk_id(j + dj, k + dk))
    return tuple(sorted(out)) if out else (walk_id(2, 2),)


def _build_keyframe_rules() -> Dict[Tuple[int, EnvAction], Tuple[Tuple[int, ...], str]]:
    rules: Dict[Tuple[int, EnvAction], Tuple[Tuple[int, ...], str]] = {}
    bra_diag = tuple(9 + 3 * i + i for i in range(3))
    stops = tuple(range(18, 21))
    hops = tuple(range(21, 24))
    slides = tuple(range(24, 27))
    for q in range(N_KEYFRAMES):
        for e in EnvAction:
            if e in (EnvAction.e_md, EnvAction.e_mu):
                if is_walk(q):
                    succ = _moderate_walk_successors(q // 3, q % 3)
                    origin = "paper" if e is EnvAction.e_md else "pattern"
                else:
                    succ = _WALK_EMERGENCY_REENTRY
                    bra_or_stop = 9 <= q < 21
                    origin = (
                        "paper" if (e is EnvAction.e_md and bra_or_stop) else "pattern"
                    )
            elif e in (EnvAction.e_hd, EnvAction.e_hu):
                if is_walk(q):
                    jk = (q // 3, q % 3)
                    if jk in _HUGE_LISTED:
                        succ = tuple(sorted(walk_id(*t) for t in _HUGE_LISTED[jk]))
                        origin = "paper" if e is EnvAction.e_hd else "pattern"
                    else:
                        succ = _huge_walk_successors(*jk)
                        origin = "pattern"
                else:
                    succ = _WALK_EMERGENCY_REENTRY
                    bra_or_stop = 9 <= q < 21
                    origin = (
                        "paper" if (e is EnvAction.e_hd and bra_or_stop) else "pattern"
                    )
            elif e is EnvAction.e_tc_nc:
                succ, origin = bra_diag, "paper"
            elif e is EnvAction.e_tc_hc:
                succ, origin = hops, "paper"
            elif e is EnvAction.e_ha:
                succ, origin = stops, "paper"
            else:  # e_np
                succ, origin = slides, "paper"
            rules[(q, e)] = (succ, origin)
    return rules


_KEYFRAME_RULES = _build_keyframe_rules()


def keyframe_successors(q: int, next_env: EnvAction) -> Tuple[int, ...]:
    return _KEYFRAME_RULES[(q, next_env)][0]


def rule_origin(q: int, next_env: EnvAction) -> str:
    """Whether the (q, next_env) keyframe rule is as printed or pattern-filled."""
    return _KEYFRAME_RULES[(q, next_env)][1]


GameState = Tuple[int, EnvAction, SysAction, ModeKind]


class AssumptionViolation(RuntimeError):
    """The environment played an action its own rules forbid."""


@dataclass
class GameModel:
    """Enumerated game over (keyframe, env, contact, mode) states."""

    states: List[GameState]
    index: Dict[GameState, int]
    gr1: Gr1Game
    level_table: LevelTable
    env_justice_names: List[str]
    sys_justice_names: List[str]
    injected_contradiction: bool = False

    def state_of(self, idx: int) -> GameState:
        return self.states[idx]

    def order_key(self, idx: int) -> tuple:
        q, e, s, p = self.states[idx]
        return (q, int(s), int(p))

    def admissible_initial_env(self) -> Tuple[EnvAction, ...]:
        return TERRAIN_ACTIONS

    def initial_candidates(self, e: EnvAction) -> List[int]:
        out = []
        for q in range(9):  # initial keyframes are walk states
            for p, s in self._ps_options(e):
                if s in _INIT_FORBIDDEN_SYS:
                    continue
                out.append(self.index[(q, e, s, p)])
        return sorted(out, key=self.order_key)

    def _ps_options(self, e: EnvAction) -> Tuple[Tuple[ModeKind, SysAction], ...]:
        if self.injected_contradiction and e is EnvAction.e_hu:
            return tuple()
        return PS_OPTIONS[e]


def build_locomotion_game(
    table: Optional[LevelTable] = None, inject_contradiction: bool = False
) -> GameModel:
    """Enumerate the locomotion game and wire up its justice goals.

    ``inject_contradiction`` removes every admissible response to the
    hugely-upward terrain action, producing an unrealizable game (used to
    exercise the unrealizability path end to end).
    """
    table = table or LevelTable()

    def ps_options(e: EnvAction):
        if inject_contradiction and e is EnvAction.e_hu:
            return tuple()
        return PS_OPTIONS[e]

    states: List[GameState] = []
    for q in range(N_KEYFRAMES):
        for e in EnvAction:
            for p, s in PS_OPTIONS[e]:
                states.append((q, e, s, p))
    states.sort(key=lambda t: (t[0], int(t[1]), int(t[2]), int(t[3])))
    index = {st: i for i, st in enumerate(states)}
    n = len(states)

    env_moves: List[List[int]] = []
    sys_succ: List[List[List[int]]] = []
    for q, e, s, p in states:
        moves, succ = [], []
        for e2 in env_allowed_next(e):
            moves.append(int(e2))
            succ.append(
                [
                    index[(q2, e2, s2, p2)]
                    for q2 in keyframe_successors(q, e2)
                    for p2, s2 in ps_options(e2)
                ]
            )
        env_moves.append(moves)
        sys_succ.append(succ)

    env_states = np.array([int(e) for _, e, _, _ in states])
    sys_s = np.array([int(s) for _, _, s, _ in states])
    sys_p = np.array([int(p) for _, _, _, p in states])

    env_justice = [env_states == int(e) for e in EnvAction]
    env_justice_names = [e.name for e in EnvAction]
    env_justice.append(env_states != int(EnvAction.e_ha))
    env_justice_names.append("not_" + EnvAction.e_ha.name)
    env_justice.append(env_states != int(EnvAction.e_np))
    env_justice_names.append("not_" + EnvAction.e_np.name)

    sys_justice = [
        sys_p == int(ModeKind.PIPM),
        sys_s == int(SysAction.s_ld_ah),
        sys_s == int(SysAction.s_ld_af),
        sys_s == int(SysAction.s_ld_an),
    ]
    sys_justice_names = ["p_PIPM", "s_ld_ah", "s_ld_af", "s_ld_an"]

    gr1 = Gr1Game(
        n_states=n,
        env_moves=env_moves,
        sys_succ=sys_succ,
        env_justice=env_justice,
        sys_justice=sys_justice,
    )
    return GameModel(
        states=states,
        index=index,
        gr1=gr1,
        level_table=table,
        env_justice_names=env_justice_names,
        sys_justice_names=sys_justice_names,
        injected_contradiction=inject_contradiction,
    )


@dataclass
class Unrealizable:
    """Negative synthesis result with the losing initial environment moves."""

    losing_initial_env: List[EnvAction]
    losing_states: List[GameState]


@dataclass
class AutomatonNode:
    id: int
    q: int
    e: EnvAction
    s: SysAction
    p: ModeKind
    goal_index: int


@dataclass
class StrategyAutomaton:
    """Deterministic winning strategy: nodes keyed by (state, goal memory)."""

    nodes: List[AutomatonNode]
    edges: Dict[Tuple[int, EnvAction], int]
    initial: Dict[EnvAction, int]

    def node(self, node_id: int) -> AutomatonNode:
        return self.nodes[node_id]

    def allowed_env(self, node_id: int) -> Tuple[EnvAction, ...]:
        return env_allowed_next(self.nodes[node_id].e)

    def to_json_dict(self) -> dict:
        return {
            "format": "locoplan-strategy-automaton/1",
            "indexing": {
                "env": [e.name for e in EnvAction],
                "sys": [s.name for s in SysAction],
                "modes": [m.name for m in ModeKind],
                "keyframes": list(KEYFRAME_NAMES),
            },
            "nodes": [
                {
                    "id": nd.id,
                    "q": nd.q,
                    "e": int(nd.e),
                    "s": int(nd.s),
                    "p": int(nd.p),
                    "goal_index": nd.goal_index,
                }
                for nd in self.nodes
            ],
            "edges": [
                {"from": src, "env": int(e), "to": dst}
                for (src, e), dst in sorted(self.edges.items())
            ],
            "initial": {e.name: nid for e, nid in sorted(self.initial.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "StrategyAutomaton":
        nodes = [
            AutomatonNode(
                id=nd["id"],
                q=nd["q"],
                e=EnvAction(nd["e"]),
                s=SysAction(nd["s"]),
                p=ModeKind(nd["p"]),
                goal_index=nd["goal_index"],
            )
            for nd in sorted(doc["nodes"], key=lambda d: d["id"])
        ]
        edges = {
            (ed["from"], EnvAction(ed["env"])): ed["to"] for ed in doc["edges"]
        }
        initial = {EnvAction[k]: v for k, v in doc["initial"].items()}
        return cls(nodes=nodes, edges=edges, initial=initial)

    @classmethod
    def from_json(cls, text: str) -> "StrategyAutomaton":
        return cls.from_json_dict(json.loads(text))


def solve_locomotion_game(
    model: GameModel,
) -> Union[StrategyAutomaton, Unrealizable]:
    """Solve the game and extract the deterministic strategy automaton."""
    solution = solve_gr1(model.gr1)

    losing_env: List[EnvAction] = []
    losing_states: List[GameState] = []
    initial_choice: Dict[EnvAction, int] = {}
    for e in model.admissible_initial_env():
        cands = model.initial_candidates(e)
        winning = [v for v in cands if solution.winning[v]]
        if not winning:
            losing_env.append(e)
            losing_states.extend(model.state_of(v) for v in cands)
        else:
            initial_choice[e] = winning[0]  # candidates pre-sorted by order_key
    if losing_env:
        return Unrealizable(losing_env, losing_states)

    return _extract_automaton(model, solution, initial_choice)


def _extract_automaton(
    model: GameModel, solution: Gr1Solution, initial_choice: Dict[EnvAction, int]
) -> StrategyAutomaton:
    nodes: List[AutomatonNode] = []
    node_ids: Dict[Tuple[int, int], int] = {}
    edges: Dict[Tuple[int, EnvAction], int] = {}

    def intern(v: int, goal: int) -> int:
        key = (v, goal)
        if key not in node_ids:
            q, e, s, p = model.state_of(v)
            node_ids[key] = len(nodes)
            nodes.append(AutomatonNode(len(nodes), q, e, s, p, goal))
        return node_ids[key]

    initial = {e: intern(v, 0) for e, v in sorted(initial_choice.items())}
    queue = list(initial.values())
    seen = set(queue)
    while queue:
        nid = queue.pop(0)
        nd = nodes[nid]
        v = model.index[(nd.q, nd.e, nd.s, nd.p)]
        moves = model.gr1.env_moves[v]
        for k, e2_int in enumerate(moves):
            e2 = EnvAction(e2_int)
            w, goal2 = solution.choose(v, nd.goal_index, k, model.order_key)
            nid2 = intern(w, goal2)
            edges[(nid, e2)] = nid2
            if nid2 not in seen:
                seen.add(nid2)
                queue.append(nid2)
    return StrategyAutomaton(nodes=nodes, edges=edges, initial=initial)


@dataclass
class StepDecision:
    node: int
    keyframe: int
    sys_action: SysAction
    mode: ModeKind


def strategy_step(
    auto: StrategyAutomaton, node_id: int, next_env: EnvAction
) -> StepDecision:
    """Deterministic successor decision for one environment move."""
    nd = auto.node(node_id)
    if next_env not in env_allowed_next(nd.e):
        raise AssumptionViolation(
            f"environment action {next_env.name} is forbidden after {nd.e.name}"
        )
    nxt = auto.edges[(node_id, next_env)]
    out = auto.node(nxt)
    return StepDecision(node=nxt, keyframe=out.q, sys_action=out.s, mode=out.p)


@dataclass
class Violation:
    index: int
    formula_id: str
    message: str


@dataclass
class TraceReport:
    violations: List[Violation]
    warnings: List[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_trace(
    trace: Sequence[GameState], model: Optional[GameModel] = None
) -> TraceReport:
    """Validate a finite (q, e, s, p) play against every transition rule.

    Justice goals a finite trace never visits are reported as warnings
    only, since no finite prefix can refute them.
    """
    violations: List[Violation] = []
    warnings: List[str] = []
    if not trace:
        return TraceReport(violations, warnings)

    q0, e0, s0, p0 = trace[0]
    if e0 in EMERGENCY_ACTIONS:
        violations.append(
            Violation(0, "init-env", f"emergency action {e0.name} at the initial step")
        )
    if s0 in _INIT_FORBIDDEN_SYS:
        violations.append(
            Violation(0, "init-sys", f"contact {s0.name} forbidden initially")
        )

    for i, (q, e, s, p) in enumerate(trace):
        if (p, s) not in PS_OPTIONS[e]:
            rid = (
                _RESERVED_MODES.get(p)
                or _RESERVED_CONTACTS.get(s)
                or _ROBOT_RULE_IDS[e]
            )
            violations.append(
                Violation(
                    i,
                    rid,
                    f"({p.name}, {s.name}) is not an admissible response to {e.name}",
                )
            )

    for i in range(len(trace) - 1):
        q, e, s, p = trace[i]
        q2, e2, s2, p2 = trace[i + 1]
        if e2 in ENV_FORBIDDEN_NEXT.get(e, frozenset()):
            violations.append(
                Violation(
                    i + 1,
                    _ENV_RULE_IDS[e],
                    f"{e2.name} may not follow {e.name}",
                )
            )
        if q2 not in keyframe_successors(q, e2):
            violations.append(
                Violation(
                    i + 1,
                    _KEYFRAME_RULE_IDS[e2],
                    f"{keyframe_name(q2)} is not an allowed successor of "
                    f"{keyframe_name(q)} under {e2.name}",
                )
            )

    envs_seen = {e for _, e, _, _ in trace}
    for e in EnvAction:
        if e not in envs_seen:
            warnings.append(f"justice goal {e.name} never visited in this trace")
    sys_goals = {
        "p_PIPM": any(p is ModeKind.PIPM for _, _, _, p in trace),
        "s_ld_ah": any(s is SysAction.s_ld_ah for _, _, s, _ in trace),
        "s_ld_af": any(s is SysAction.s_ld_af for _, _, s, _ in trace),
        "s_ld_an": any(s is SysAction.s_ld_an for _, _, s, _ in trace),
    }
    for name, seen in sys_goals.items():
        if not seen:
            warnings.append(f"justice goal {name} never visited in this trace")
    return TraceReport(violations, warnings)


def random_admissible_env(
    rng: np.random.Generator, length: int, start: Optional[EnvAction] = None
) -> List[EnvAction]:
    """A random environment action sequence respecting its own rules."""
    seq: List[EnvAction] = []
    current = start
    for _ in range(length):
        if current is None:
            options: Tuple[EnvAction, ...] = TERRAIN_ACTIONS
        else:
            options = env_allowed_next(current)
        current = options[int(rng.integers(len(options)))]
        seq.append(current)
    return seq


def cycling_fair_env(length: int, start_offset: int = 0) -> List[EnvAction]:
    """A deterministic fair schedule over all 8 actions.

    Actions wait in an aging queue; each step the longest-waiting action
    that the environment rules currently admit is played and sent to the
    back.  Deferred actions keep their place, so every action recurs
    within a bounded window.
    """
    seq: List[EnvAction] = []
    queue = list(EnvAction)
    queue = queue[start_offset % 8 :] + queue[: start_offset % 8]
    current: Optional[EnvAction] = None
    for _ in range(length):
        allowed = (
            set(TERRAIN_ACTIONS) if current is None else set(env_allowed_next(current))
        )
        pick = next(i for i, cand in enumerate(queue) if cand in allowed)
        current = queue.pop(pick)
        queue.append(current)
        seq.append(current)
    return seq
