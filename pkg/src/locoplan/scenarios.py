"""Scenario definitions: every experiment parameter lives here.

A scenario file pins the keyframes, template parameters, margins, grids,
disturbance bounds, and seeds of one experiment; the command line only
selects file paths, seeds, and trial counts.  Built-in scenarios cover
the single-step robustness studies, the synthesis-disturbance sweep, and
the six-step composed walk.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from locoplan.phase_plan import LevelTable, plan_ows
from locoplan.rfts import Margin, MarginSet, margin_set_for
from locoplan.templates import ComState, Keyframe, ModeKind, TemplateParams

Box = Tuple[float, float, float, float]


def snap_box(box: Box, eta: Tuple[float, float]) -> Box:
    """Expand a box outward so each side is an integer number of cells."""
    xlo, xhi, vlo, vhi = box
    ex, ev = eta
    nx = max(1, math.ceil((xhi - xlo) / ex - 1e-9))
    nv = max(1, math.ceil((vhi - vlo) / ev - 1e-9))
    return (xlo, xlo + nx * ex, vlo, vlo + nv * ev)


@dataclass
class ModeSpec:
    kind: str
    omega: float
    control: Tuple[float, float]

    def params(self, contact_x: float) -> TemplateParams:
        return TemplateParams(ModeKind[self.kind], self.omega, contact_x)


@dataclass
class OwsScenario:
    """One-walking-step synthesis/simulation experiment."""

    name: str
    kf_initial: Tuple[float, float]
    kf_final: Tuple[float, float]
    mode1: ModeSpec
    mode2: ModeSpec
    state_box: Box
    margins_initial: Tuple[float, float]  # (d_zeta, d_sigma)
    margins_final: Tuple[float, float]
    disturbance: Tuple[float, float]
    eta: Tuple[float, float] = (0.005, 0.005)
    control_step: float = 0.02
    dzeta: float = 0.02
    r_sim: Optional[Tuple[float, float]] = None
    trials: int = 50
    seed: int = 0
    sampler: str = "hold_uniform"
    max_phase: float = 8.0

    def keyframes(self) -> Tuple[Keyframe, Keyframe]:
        return Keyframe(*self.kf_initial), Keyframe(*self.kf_final)

    def build(self):
        """Plan the step and assemble the continuous subsystem."""
        from locoplan.abstraction import OwsSubsystem

        kf1, kf2 = self.keyframes()
        p1 = self.mode1.params(kf1.contact_x)
        p2 = self.mode2.params(kf2.contact_x)
        plan = plan_ows(kf1, kf2, p1, p2)
        init_set = margin_set_for(kf1, p1, Margin(*self.margins_initial), plan.switch_state)
        final_set = margin_set_for(kf2, p2, Margin(*self.margins_final), plan.switch_state)
        box = snap_box(self.state_box, self.eta)
        sub = OwsSubsystem(
            plan=plan,
            initial_set=init_set,
            final_set=final_set,
            state_box1=box,
            state_box2=box,
            control1=self.mode1.control,
            control2=self.mode2.control,
            disturbance=self.disturbance,
            dzeta=self.dzeta,
        )
        return plan, sub


@dataclass
class EnvStep:
    action: str
    abrupt_change_to: Optional[str] = None
    abrupt_after_holds: int = 4


@dataclass
class ModeRoleSpec:
    omega_in: float
    omega_out: float
    control_in: Tuple[float, float]
    control_out: Tuple[float, float]
    margin: Tuple[float, float]  # (d_zeta, d_sigma) around keyframes of this mode


DEFAULT_MODE_ROLES: Dict[str, ModeRoleSpec] = {
    "PIPM": ModeRoleSpec(3.0, 3.0, (2.0, 4.0), (2.0, 4.0), (0.05, 0.002)),
    "PPM": ModeRoleSpec(3.0, 3.0, (2.0, 4.0), (2.0, 4.0), (0.05, 0.04)),
    "MCM": ModeRoleSpec(-2.0, 2.0, (-3.0, -1.0), (1.0, 3.0), (0.09, 0.15)),
    "SLM": ModeRoleSpec(-1.5, 1.5, (-2.5, -0.5), (0.5, 2.5), (0.005, 0.15)),
    "HM": ModeRoleSpec(0.0, 0.0, (0.0, 0.0), (0.0, 0.0), (0.05, 0.05)),
    "SM": ModeRoleSpec(-1.0, 1.0, (-2.0, -0.5), (0.5, 2.0), (0.09, 0.15)),
}


@dataclass
class ReactiveScenario:
    """Multi-step reactive walk driven through the strategy automaton."""

    name: str
    env_script: List[EnvStep]
    initial_contact_x: float = 0.0
    full_box: Box = (-0.2, 3.8, 0.2, 1.9)
    eta: Tuple[float, float] = (0.003, 0.003)
    control_step: float = 0.1
    dzeta: float = 0.02
    disturbance: Tuple[float, float] = (0.05, 0.1)
    r_sim: Optional[Tuple[float, float]] = None
    mode_roles: Dict[str, ModeRoleSpec] = field(
        default_factory=lambda: dict(DEFAULT_MODE_ROLES)
    )
    level_table: LevelTable = field(default_factory=LevelTable)
    cell_block: str = "cross"  # "cross" (5 cells) | "full" (3x3) | "center"
    box_pad_x: float = 0.45
    box_pad_v: float = 0.35
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    trials: int = 1
    kicks: List[dict] = field(default_factory=list)
    max_phase: float = 8.0
    keyframe_overrides: Dict[int, Tuple[float, float]] = field(default_factory=dict)

    def env_actions(self) -> List:
        from locoplan.task_game import EnvAction

        return [EnvAction[s.action] for s in self.env_script]

    def block_cells(self) -> Optional[List[Tuple[int, int]]]:
        if self.cell_block == "cross":
            return [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
        if self.cell_block == "center":
            return [(0, 0)]
        return None  # full neighbour block

    def mode_role(self, kind: ModeKind) -> ModeRoleSpec:
        return self.mode_roles[kind.name]

    def local_box(
        self, kf1: Keyframe, kf2: Keyframe, v_peak: float, x_back: Optional[float] = None
    ) -> Box:
        """Per-step synthesis box.

        ``x_back`` extends the box backward to cover the hand-off region
        of the previous step (its goal margin box reaches back toward its
        contact switch, and the new step must be able to pick the state
        up anywhere inside it).
        """
        lo_anchor = kf1.contact_x if x_back is None else min(kf1.contact_x, x_back)
        xlo = max(self.full_box[0], lo_anchor - self.box_pad_x)
        xhi = min(self.full_box[1], kf2.contact_x + self.box_pad_x)
        vlo = max(self.full_box[2], min(kf1.apex_vx, kf2.apex_vx) - self.box_pad_v)
        vhi = min(self.full_box[3], v_peak + self.box_pad_v)
        return snap_box((xlo, xhi, vlo, vhi), self.eta)


# -- built-in scenarios ------------------------------------------------------


def case_single_step_walk() -> OwsScenario:
    """Single PIPM-to-PIPM walking step robustness study."""
    return OwsScenario(
        name="single_step_walk",
        kf_initial=(0.0, 0.5),
        kf_final=(0.5, 0.6),
        mode1=ModeSpec("PIPM", 3.0, (2.0, 4.0)),
        mode2=ModeSpec("PIPM", 3.0, (2.0, 4.0)),
        state_box=(-0.1, 0.7, 0.1, 1.2),
        margins_initial=(0.05, 0.002),
        margins_final=(0.05, 0.006),
        disturbance=(0.05, 0.1),
        eta=(0.005, 0.005),
        control_step=0.02,
        dzeta=0.02,
        trials=50,
        seed=17,
    )


#: Disturbance levels for the winning-set shrink study (same walk step).
SHRINK_LEVELS: Tuple[Tuple[float, float], ...] = (
    (0.0, 0.0),
    (0.025, 0.05),
    (0.05, 0.1),
    (0.1, 0.2),
)


def case_swing_transfer() -> OwsScenario:
    """Stance-to-swing hand-off (pendular to hanging-pendulum step)."""
    return OwsScenario(
        name="swing_transfer",
        kf_initial=(0.0, 0.5),
        kf_final=(0.6, 1.7),
        mode1=ModeSpec("PIPM", 3.0, (2.0, 4.0)),
        mode2=ModeSpec("PPM", 3.0, (2.0, 4.0)),
        state_box=(-0.1, 0.7, 0.1, 1.8),
        margins_initial=(0.05, 0.002),
        margins_final=(0.005, 0.06),
        disturbance=(0.15, 0.3),
        eta=(0.005, 0.005),
        control_step=0.02,
        dzeta=0.02,
        trials=50,
        seed=29,
    )


#: Modeled-disturbance ladder for the success-rate curve.
CURVE_LEVELS: Tuple[Tuple[float, float], ...] = (
    (0.0, 0.0),
    (0.025, 0.05),
    (0.05, 0.1),
    (0.075, 0.15),
    (0.1, 0.2),
)


def case_success_curve() -> OwsScenario:
    """Success-rate sweep: synthesize at each CURVE_LEVELS bound, simulate
    all at (0.1, 0.2) with a per-trial-constant bias realization."""
    scn = case_single_step_walk()
    scn.name = "success_curve"
    scn.r_sim = (0.1, 0.2)
    scn.trials = 1000
    scn.sampler = "trial_constant"
    scn.seed = 101
    return scn


def case_composed_walk() -> ReactiveScenario:
    """Six-step composed walk: stance, swing, multi-contact climb, stance.

    The environment script steers the strategy automaton through the mode
    sequence PIPM, PIPM, PPM, PIPM, MCM, PIPM, PIPM using only admissible
    actions; keyframes then follow from the level table.
    """
    return ReactiveScenario(
        name="composed_walk",
        env_script=[
            EnvStep("e_md"),
            EnvStep("e_md"),
            EnvStep("e_tc_nc"),
            EnvStep("e_md"),
            EnvStep("e_hu"),
            EnvStep("e_md"),
            EnvStep("e_md"),
        ],
        initial_contact_x=-0.1,
        full_box=(-0.2, 3.8, 0.2, 1.9),
        eta=(0.003, 0.003),
        control_step=0.1,
        dzeta=0.02,
        disturbance=(0.05, 0.1),
        seeds=(0, 1, 2, 3, 4, 5),
    )


def case_composed_walk_kicked() -> ReactiveScenario:
    """Composed walk with a velocity jump beyond the modeled bound,
    injected after the multi-contact step's mode switch."""
    scn = case_composed_walk()
    scn.name = "composed_walk_kicked"
    scn.seeds = (11,)
    scn.kicks = [{"step": 4, "at_zeta": 0.8, "dx": 0.0, "dv": 0.2}]
    return scn


def case_replan_in_flight() -> ReactiveScenario:
    """Ballistic hop interrupted by a terrain-crack announcement mid-step.

    A flat ballistic orbit only intersects the stance orbit when the
    robot runs up to the take-off speed first, which the hop keyframe
    ladder guarantees.
    """
    return ReactiveScenario(
        name="replan_in_flight",
        env_script=[
            EnvStep("e_md"),
            EnvStep("e_tc_hc"),
            EnvStep("e_md", abrupt_change_to="e_tc_nc"),
            EnvStep("e_md"),
        ],
        initial_contact_x=0.0,
    )


def case_interactive() -> ReactiveScenario:
    return ReactiveScenario(
        name="interactive",
        env_script=[],
        initial_contact_x=0.0,
    )


BUILTIN_SCENARIOS = {
    "single_step_walk": case_single_step_walk,
    "swing_transfer": case_swing_transfer,
    "success_curve": case_success_curve,
    "composed_walk": case_composed_walk,
    "composed_walk_kicked": case_composed_walk_kicked,
    "replan_in_flight": case_replan_in_flight,
    "interactive": case_interactive,
}


# -- JSON round-trip ---------------------------------------------------------


def scenario_to_json(scn) -> str:
    doc = asdict(scn)
    doc["type"] = type(scn).__name__
    if isinstance(scn, ReactiveScenario):
        doc["level_table"] = {
            "velocity_values": list(scn.level_table.velocity_values),
            "step_values": list(scn.level_table.step_values),
        }
        doc["keyframe_overrides"] = {
            str(k): list(v) for k, v in scn.keyframe_overrides.items()
        }
    return json.dumps(doc, indent=2, sort_keys=True)


def scenario_from_json(text: str):
    doc = json.loads(text)
    kind = doc.pop("type")
    if kind == "OwsScenario":
        doc["mode1"] = ModeSpec(**_tup(doc["mode1"], "control"))
        doc["mode2"] = ModeSpec(**_tup(doc["mode2"], "control"))
        for key in (
            "kf_initial", "kf_final", "state_box", "margins_initial",
            "margins_final", "disturbance", "eta",
        ):
            doc[key] = tuple(doc[key])
        if doc.get("r_sim"):
            doc["r_sim"] = tuple(doc["r_sim"])
        return OwsScenario(**doc)
    if kind == "ReactiveScenario":
        doc["env_script"] = [EnvStep(**e) for e in doc["env_script"]]
        doc["mode_roles"] = {
            k: ModeRoleSpec(
                v["omega_in"], v["omega_out"],
                tuple(v["control_in"]), tuple(v["control_out"]), tuple(v["margin"]),
            )
            for k, v in doc["mode_roles"].items()
        }
        doc["level_table"] = LevelTable(
            tuple(doc["level_table"]["velocity_values"]),
            tuple(doc["level_table"]["step_values"]),
        )
        doc["keyframe_overrides"] = {
            int(k): tuple(v) for k, v in doc.get("keyframe_overrides", {}).items()
        }
        for key in ("full_box", "eta", "disturbance"):
            doc[key] = tuple(doc[key])
        if doc.get("r_sim"):
            doc["r_sim"] = tuple(doc["r_sim"])
        doc["seeds"] = tuple(doc["seeds"])
        return ReactiveScenario(**doc)
    raise ValueError(f"unknown scenario type {kind}")


def _tup(d: dict, *keys) -> dict:
    out = dict(d)
    for k in keys:
        out[k] = tuple(out[k])
    return out


def load_scenario(path_or_name: str):
    """Load a scenario file, or a built-in by name."""
    if path_or_name in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[path_or_name]()
    return scenario_from_json(Path(path_or_name).read_text())
