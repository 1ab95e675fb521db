"""Backward reachability controller synthesis and the policy store.

Two interchangeable engines compute the same least fixpoint

    WIN = G  union  { q : exists action a with  {} != succ(q, a) subset WIN }

* :func:`reachability_control` is the queue-based algorithm over an
  explicit transition system: a FIFO queue seeded with the goal cells;
  whenever a popped cell completes some (cell, action) whose successors
  all lie in WIN, that cell joins WIN once and the action is marked in
  the boolean matrix K.
* :func:`synthesize_ows` is a vectorized engine specialized to the grid
  abstraction, where successor sets are rectangles and the subset test
  becomes a summed-area-table query.

The synthesized winning sets and per-cell control choices are persisted
in a :class:`PolicyStore`, the control library that execution draws from
when the state is disturbed out of the active winning set.
"""

from __future__ import annotations

import base64
import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from locoplan.abstraction import (
    AbstractTs,
    ModeRects,
    OwsSubsystem,
    UniformGrid,
    build_abstraction,
)
from locoplan.rfts import Margin, MarginSet
from locoplan.templates import ComState, Keyframe, ModeKind, TemplateParams


# -- queue-based engine over explicit transition systems --------------------


@dataclass
class ExplicitTs:
    """Small explicit abstraction: ``succ[q][a]`` lists successors, or is
    ``None`` for an out-of-domain action."""

    n_cells: int
    n_actions: int
    succ: List[List[Optional[List[int]]]]


@dataclass
class WinningSet:
    bits: np.ndarray

    def __contains__(self, cell: int) -> bool:
        return bool(self.bits[cell])

    @property
    def size(self) -> int:
        return int(self.bits.sum())


@dataclass
class Policy:
    """Boolean qualification matrix plus the per-cell execution choice."""

    K: np.ndarray  # (n_cells, n_actions) bool
    chosen: np.ndarray  # (n_cells,) int32, -1 for non-winning cells


@dataclass
class ReachResult:
    is_reachable: bool
    win: WinningSet
    policy: Policy


def reachability_control(
    I: Iterable[int], G: Iterable[int], ts: ExplicitTs
) -> ReachResult:
    """Queue-based backward reachability over an explicit abstraction.

    ``K[q, a]`` ends up marking every action whose successors all lie in
    the final winning set; each cell enters the winning set (and the
    queue) at most once.  ``is_reachable`` reports whether the winning
    set meets the initial set; the computed sets are returned either way.
    """
    G = list(G)
    if not G:
        raise ValueError("goal set must be nonempty")
    win = np.zeros(ts.n_cells, dtype=bool)
    win[list(G)] = True
    K = np.zeros((ts.n_cells, ts.n_actions), dtype=bool)

    preds: List[List[Tuple[int, int]]] = [[] for _ in range(ts.n_cells)]
    for q in range(ts.n_cells):
        for a in range(ts.n_actions):
            succs = ts.succ[q][a]
            if succs:
                for q2 in set(succs):
                    preds[q2].append((q, a))

    queue = deque(G)
    while queue:
        qp = queue.popleft()
        for q, a in preds[qp]:
            succs = ts.succ[q][a]
            if all(win[s] for s in succs):
                K[q, a] = True
                if not win[q]:
                    win[q] = True
                    queue.append(q)

    chosen = np.full(ts.n_cells, -1, dtype=np.int32)
    for q in range(ts.n_cells):
        if win[q]:
            row = np.flatnonzero(K[q])
            if row.size:
                chosen[q] = row[0]
    reachable = bool(win[list(I)].any()) if list(I) else False
    return ReachResult(reachable, WinningSet(win), Policy(K, chosen))


# -- vectorized engine over grid abstractions -------------------------------

try:  # pragma: no cover - exercised implicitly
    import numba

    @numba.njit(cache=True)
    def _gs_sweeps(win2d, lo_x, hi_x, lo_v, hi_v, nv):  # pragma: no cover
        nx = win2d.shape[0]
        nc = lo_x.shape[1]
        changed = True
        while changed:
            changed = False
            for ix in range(nx - 1, -1, -1):
                for iv in range(win2d.shape[1]):
                    if win2d[ix, iv]:
                        continue
                    c = ix * nv + iv
                    for k in range(nc):
                        lx = lo_x[c, k]
                        if lx < 0:
                            continue
                        ok = True
                        for jx in range(lx, hi_x[c, k] + 1):
                            for jv in range(lo_v[c, k], hi_v[c, k] + 1):
                                if not win2d[jx, jv]:
                                    ok = False
                                    break
                            if not ok:
                                break
                        if ok:
                            win2d[ix, iv] = True
                            changed = True
                            break
        return win2d

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False


def _rect_fixpoint_jacobi(
    grid: UniformGrid, rects: ModeRects, seed: np.ndarray
) -> np.ndarray:
    nx, nv = grid.nx, grid.nv
    win = seed.copy()
    lo_x, hi_x = rects.lo_x, rects.hi_x
    lo_v, hi_v = rects.lo_v, rects.hi_v
    valid = lo_x >= 0
    area = np.where(
        valid, (hi_x - lo_x + 1) * (hi_v - lo_v + 1), -1
    ).astype(np.int64)
    while True:
        sat = np.zeros((nx + 1, nv + 1), dtype=np.int64)
        np.cumsum(win.reshape(nx, nv), axis=0, out=sat[1:, 1:])
        np.cumsum(sat[1:, 1:], axis=1, out=sat[1:, 1:])
        rect_sum = (
            sat[hi_x + 1, hi_v + 1]
            - sat[lo_x, hi_v + 1]
            - sat[hi_x + 1, lo_v]
            + sat[lo_x, lo_v]
        )
        qualified = rect_sum == area
        new_win = win | qualified.any(axis=1)
        if (new_win == win).all():
            return win
        win = new_win


def _rect_fixpoint(
    grid: UniformGrid, rects: ModeRects, seed: np.ndarray, engine: str = "auto"
) -> np.ndarray:
    """Least fixpoint of the rectangle-successor inclusion from a seed set.

    Two engines compute the identical fixpoint: a summed-area-table Jacobi
    iteration and (when numba is available) in-place Gauss-Seidel sweeps in
    descending-x order, which converge in a handful of passes because the
    nominal flow always advances x.
    """
    if engine == "jacobi" or (engine == "auto" and not _HAVE_NUMBA):
        return _rect_fixpoint_jacobi(grid, rects, seed)
    win2d = seed.reshape(grid.nx, grid.nv).copy()
    _gs_sweeps(win2d, rects.lo_x, rects.hi_x, rects.lo_v, rects.hi_v, grid.nv)
    return win2d.reshape(-1)


def _rect_qualify(
    grid: UniformGrid, rects: ModeRects, win: np.ndarray
) -> np.ndarray:
    nx, nv = grid.nx, grid.nv
    valid = rects.lo_x >= 0
    area = np.where(
        valid, (rects.hi_x - rects.lo_x + 1) * (rects.hi_v - rects.lo_v + 1), -1
    ).astype(np.int64)
    sat = np.zeros((nx + 1, nv + 1), dtype=np.int64)
    np.cumsum(win.reshape(nx, nv), axis=0, out=sat[1:, 1:])
    np.cumsum(sat[1:, 1:], axis=1, out=sat[1:, 1:])
    rect_sum = (
        sat[rects.hi_x + 1, rects.hi_v + 1]
        - sat[rects.lo_x, rects.hi_v + 1]
        - sat[rects.hi_x + 1, rects.lo_v]
        + sat[rects.lo_x, rects.lo_v]
    )
    return rect_sum == area


#: Sentinel control index: switch to the second mode (zero duration).
SWITCH = -2


@dataclass
class OwsPolicy:
    """Synthesized controller for one (initial cell, final cell) pair.

    ``chosen1[cell]`` is the control index to hold while in the first
    mode (``SWITCH`` means switch modes now); ``chosen2`` likewise for
    the second mode.  ``-1`` marks cells outside the winning sets.
    """

    grid: UniformGrid
    params1: TemplateParams
    params2: TemplateParams
    s1: int
    s2: int
    controls1: np.ndarray
    controls2: np.ndarray
    initial_set: MarginSet
    final_set: MarginSet
    cell_initial: Tuple[int, int]
    cell_final: Tuple[int, int]
    disturbance: Tuple[float, float]
    dzeta: float
    win1: np.ndarray
    win2: np.ndarray
    chosen1: np.ndarray
    chosen2: np.ndarray
    is_reachable: bool

    def key(self) -> tuple:
        p1, p2 = self.params1, self.params2
        return (
            p1.mode.name, round(p1.omega, 9), round(p1.contact_x, 9), self.s1,
            p2.mode.name, round(p2.omega, 9), round(p2.contact_x, 9), self.s2,
            self.cell_initial, self.cell_final,
            round(self.initial_set.margin.d_zeta, 12),
            round(self.initial_set.margin.d_sigma, 12),
            round(self.final_set.margin.d_zeta, 12),
            round(self.final_set.margin.d_sigma, 12),
            (round(self.disturbance[0], 12), round(self.disturbance[1], 12)),
        )

    def handle(self) -> str:
        p1, p2 = self.params1, self.params2
        ci, cf = self.cell_initial, self.cell_final
        return (
            f"{p1.mode.name}@{p1.contact_x:g}->{p2.mode.name}@{p2.contact_x:g}"
            f":{ci[0]},{ci[1]}->{cf[0]},{cf[1]}"
        )

    def cell_of(self, s: ComState) -> int:
        return self.grid.cell_of(s.x, s.vx)

    def in_win(self, phase: int, s: ComState) -> bool:
        c = self.cell_of(s)
        if c < 0:
            return False
        return bool((self.win1 if phase == 1 else self.win2)[c])

    def control_at(self, phase: int, s: ComState) -> Optional[float]:
        """Control to hold at ``s`` (None = switch modes when phase == 1)."""
        c = self.cell_of(s)
        if c < 0:
            raise LookupError(f"{s} outside the policy grid")
        if phase == 1:
            k = self.chosen1[c]
            if k == SWITCH:
                return None
            if k < 0:
                raise LookupError(f"cell {c} not in the first winning set")
            return float(self.controls1[k])
        k = self.chosen2[c]
        if k < 0:
            raise LookupError(f"cell {c} not in the second winning set")
        return float(self.controls2[k])


@dataclass
class OwsSynthesis:
    """Both semi-steps' winning sets and control choices for one pair of
    margin boxes (identified by their Riemannian offsets)."""

    ab: AbstractTs
    init_offset: Tuple[float, float]
    goal_offset: Tuple[float, float]
    win1: np.ndarray
    win2: np.ndarray
    chosen1: np.ndarray
    chosen2: np.ndarray

    def admitted(self) -> bool:
        initial = self.ab.initial_cells(self.init_offset)
        return bool((initial & self.win1).any())

    def as_policy(
        self,
        cell_initial: Tuple[int, int],
        cell_final: Tuple[int, int],
        s1: int = 0,
        s2: int = 0,
    ) -> OwsPolicy:
        sub = self.ab.sub
        return OwsPolicy(
            grid=self.ab.grid,
            params1=sub.plan.params1,
            params2=sub.plan.params2,
            s1=s1,
            s2=s2,
            controls1=self.ab.controls1,
            controls2=self.ab.controls2,
            initial_set=sub.initial_set.shifted(*self.init_offset),
            final_set=sub.final_set.shifted(*self.goal_offset),
            cell_initial=cell_initial,
            cell_final=cell_final,
            disturbance=sub.disturbance,
            dzeta=sub.dzeta,
            win1=self.win1,
            win2=self.win2,
            chosen1=self.chosen1,
            chosen2=self.chosen2,
            is_reachable=self.admitted(),
        )


def synthesize_pair(
    ab: AbstractTs,
    init_offset: Tuple[float, float] = (0.0, 0.0),
    goal_offset: Tuple[float, float] = (0.0, 0.0),
    _win2_cache: Optional[dict] = None,
    _win1_cache: Optional[dict] = None,
) -> OwsSynthesis:
    """Backward reachability through both semi-steps of one walking step.

    The second mode's winning set grows backward from the goal margin
    cells; the switch action then seeds the first mode's winning set on
    the intermediate set (which depends on both boxes' orbit offsets),
    and the first mode grows backward from there.  Optional caches let a
    caller sweep many (initial, goal) pairs over one abstraction.
    """
    n = ab.n_cells
    g_key = goal_offset
    if _win2_cache is not None and g_key in _win2_cache:
        win2, chosen2 = _win2_cache[g_key]
    else:
        goal = ab.goal_cells(goal_offset)
        if goal.any():
            win2 = _rect_fixpoint(ab.grid, ab.rects2, goal)
            k2 = _rect_qualify(ab.grid, ab.rects2, win2)
            chosen2 = _choose_controls(k2, ab.sigma2_img, goal_offset[1], win2)
        else:
            win2 = np.zeros(n, dtype=bool)
            chosen2 = np.full(n, -1, dtype=np.int32)
        if _win2_cache is not None:
            _win2_cache[g_key] = (win2, chosen2)

    w_key = (init_offset[1], goal_offset)
    if _win1_cache is not None and w_key in _win1_cache:
        win1, chosen1 = _win1_cache[w_key]
    else:
        switch_ok = ab.switch_mask(init_offset[1], goal_offset[1]) & win2
        if switch_ok.any():
            win1 = _rect_fixpoint(ab.grid, ab.rects1, switch_ok)
            k1 = _rect_qualify(ab.grid, ab.rects1, win1)
            chosen1 = _choose_controls(k1, ab.sigma1_img, init_offset[1], win1)
            chosen1[switch_ok] = SWITCH  # switch as soon as it is winning
        else:
            win1 = np.zeros(n, dtype=bool)
            chosen1 = np.full(n, -1, dtype=np.int32)
        if _win1_cache is not None:
            _win1_cache[w_key] = (win1, chosen1)

    return OwsSynthesis(ab, init_offset, goal_offset, win1, win2, chosen1, chosen2)


def _choose_controls(
    K: np.ndarray, sigma_img: np.ndarray, sigma_target: float, win: np.ndarray
) -> np.ndarray:
    """Among qualifying controls pick the one whose one-step nominal image
    deviates least from the target orbit (ties: lowest control index)."""
    score = np.abs(sigma_img - np.float32(sigma_target))
    score = np.where(K, score, np.float32(np.inf))
    best = score.argmin(axis=1).astype(np.int32)
    has = K.any(axis=1)
    out = np.where(win & has, best, -1).astype(np.int32)
    return out


def synthesize_ows(
    sub: OwsSubsystem,
    eta: Tuple[float, float] = (0.005, 0.005),
    control_step: float = 0.02,
    s1: int = 0,
    s2: int = 0,
    ab: Optional[AbstractTs] = None,
) -> OwsPolicy:
    """One-shot synthesis for the nominal (center) keyframe pair."""
    if ab is None:
        ab = build_abstraction(sub, eta=eta, control_step=control_step)
    syn = synthesize_pair(ab)
    return syn.as_policy((0, 0), (0, 0), s1, s2)


# -- policy store ------------------------------------------------------------


class PolicyStore:
    """In-memory control library with optional directory persistence."""

    def __init__(self):
        self._by_handle: Dict[str, OwsPolicy] = {}

    def __len__(self) -> int:
        return len(self._by_handle)

    def put(self, key: tuple, policy: OwsPolicy) -> str:
        handle = policy.handle()
        if handle in self._by_handle:
            warnings.warn(f"replacing policy {handle}", stacklevel=2)
        self._by_handle[handle] = policy
        return handle

    def add(self, policy: OwsPolicy) -> str:
        return self.put(policy.key(), policy)

    def get(self, handle: str) -> OwsPolicy:
        return self._by_handle[handle]

    def handles(self) -> List[str]:
        return sorted(self._by_handle)

    def policies(self) -> List[OwsPolicy]:
        return [self._by_handle[h] for h in self.handles()]

    def lookup_state(
        self,
        s: ComState,
        phase: Optional[int] = None,
        mode_pair: Optional[Tuple[ModeKind, ModeKind]] = None,
    ) -> List[Tuple[str, int]]:
        """Every (handle, phase) whose winning set contains the state's cell."""
        hits: List[Tuple[str, int]] = []
        for handle in self.handles():
            pol = self._by_handle[handle]
            if mode_pair is not None and (
                pol.params1.mode is not mode_pair[0]
                or pol.params2.mode is not mode_pair[1]
            ):
                continue
            c = pol.cell_of(s)
            if c < 0:
                continue
            for ph, win in ((1, pol.win1), (2, pol.win2)):
                if phase is not None and ph != phase:
                    continue
                if win[c]:
                    hits.append((handle, ph))
        return hits

    def save_dir(self, path: str) -> None:
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        index = []
        for handle in self.handles():
            pol = self._by_handle[handle]
            fname = f"policy_{len(index):04d}.json"
            (root / fname).write_text(policy_to_json(pol))
            index.append({"handle": handle, "file": fname})
        (root / "index.json").write_text(
            json.dumps({"format": "locoplan-policy-index/1", "policies": index},
                       indent=2, sort_keys=True)
        )

    @classmethod
    def load_dir(cls, path: str) -> "PolicyStore":
        root = Path(path)
        doc = json.loads((root / "index.json").read_text())
        store = cls()
        for entry in doc["policies"]:
            pol = policy_from_json((root / entry["file"]).read_text())
            store._by_handle[entry["handle"]] = pol
        return store


def _b64_bits(bits: np.ndarray) -> str:
    return base64.b64encode(np.packbits(bits.astype(np.uint8)).tobytes()).decode()


def _bits_from_b64(text: str, n: int) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(text), dtype=np.uint8)
    return np.unpackbits(raw)[:n].astype(bool)


def _b64_i32(arr: np.ndarray) -> str:
    return base64.b64encode(arr.astype("<i4").tobytes()).decode()


def _i32_from_b64(text: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), dtype="<i4").copy()


def _margin_set_dict(ms: MarginSet) -> dict:
    return {
        "center": list(ms.center),
        "params": {"kind": ms.params.mode.name, "omega": ms.params.omega,
                   "contact_x": ms.params.contact_x},
        "margin": [ms.margin.d_zeta, ms.margin.d_sigma],
        "zeta_ref": list(ms.zeta_ref),
        "offset": list(ms.offset),
    }


def _margin_set_from(d: dict) -> MarginSet:
    return MarginSet(
        center=Keyframe(*d["center"]),
        params=TemplateParams(
            ModeKind[d["params"]["kind"]], d["params"]["omega"], d["params"]["contact_x"]
        ),
        margin=Margin(*d["margin"]),
        zeta_ref=ComState(*d["zeta_ref"]),
        offset=tuple(d["offset"]),
    )


def policy_to_json(pol: OwsPolicy) -> str:
    g = pol.grid
    doc = {
        "format": "locoplan-policy/1",
        "manifest": {
            "tool": "locoplan",
            "grid": [g.x0, g.v0, g.eta_x, g.eta_v, g.nx, g.nv],
            "n_cells": g.n_cells,
            "n_controls": [len(pol.controls1), len(pol.controls2)],
            "modes": [
                {"kind": pol.params1.mode.name, "omega": pol.params1.omega,
                 "contact_x": pol.params1.contact_x, "contact_cfg": pol.s1},
                {"kind": pol.params2.mode.name, "omega": pol.params2.omega,
                 "contact_x": pol.params2.contact_x, "contact_cfg": pol.s2},
            ],
            "cells": [list(pol.cell_initial), list(pol.cell_final)],
            "disturbance": list(pol.disturbance),
            "dzeta": pol.dzeta,
            "is_reachable": pol.is_reachable,
            "switch_sentinel": SWITCH,
        },
        "initial_set": _margin_set_dict(pol.initial_set),
        "final_set": _margin_set_dict(pol.final_set),
        "controls1": pol.controls1.tolist(),
        "controls2": pol.controls2.tolist(),
        "win1_b64": _b64_bits(pol.win1),
        "win2_b64": _b64_bits(pol.win2),
        "chosen1_b64": _b64_i32(pol.chosen1),
        "chosen2_b64": _b64_i32(pol.chosen2),
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def policy_from_json(text: str) -> OwsPolicy:
    doc = json.loads(text)
    man = doc["manifest"]
    gx0, gv0, ex, ev, nx, nv = man["grid"]
    grid = UniformGrid(gx0, gv0, ex, ev, int(nx), int(nv))
    n = grid.n_cells
    m1, m2 = man["modes"]
    return OwsPolicy(
        grid=grid,
        params1=TemplateParams(ModeKind[m1["kind"]], m1["omega"], m1["contact_x"]),
        params2=TemplateParams(ModeKind[m2["kind"]], m2["omega"], m2["contact_x"]),
        s1=m1["contact_cfg"],
        s2=m2["contact_cfg"],
        controls1=np.asarray(doc["controls1"], dtype=float),
        controls2=np.asarray(doc["controls2"], dtype=float),
        initial_set=_margin_set_from(doc["initial_set"]),
        final_set=_margin_set_from(doc["final_set"]),
        cell_initial=tuple(man["cells"][0]),
        cell_final=tuple(man["cells"][1]),
        disturbance=tuple(man["disturbance"]),
        dzeta=man["dzeta"],
        win1=_bits_from_b64(doc["win1_b64"], n),
        win2=_bits_from_b64(doc["win2_b64"], n),
        chosen1=_i32_from_b64(doc["chosen1_b64"]),
        chosen2=_i32_from_b64(doc["chosen2_b64"]),
        is_reachable=man["is_reachable"],
    )


# -- backend used by the keyframe-level transition builder ------------------


class ReachabilityBackend:
    """Synthesis backend shared across the cell pairs of one walking step.

    The abstraction is built once per walking step; goal-side and
    switch-seeded fixpoints are memoized by offset so a block of cell
    pairs costs far fewer backward passes than pairs.
    """

    def __init__(
        self,
        state_box,
        control1,
        control2,
        disturbance,
        dzeta: float = 0.02,
        eta: Tuple[float, float] = (0.005, 0.005),
        control_step: float = 0.02,
        s1: int = 0,
        s2: int = 0,
    ):
        self.state_box = tuple(state_box)
        self.control1 = tuple(control1)
        self.control2 = tuple(control2)
        self.disturbance = tuple(disturbance)
        self.dzeta = dzeta
        self.eta = tuple(eta)
        self.control_step = control_step
        self.s1, self.s2 = s1, s2
        self._ab: Optional[AbstractTs] = None
        self._win1_cache: dict = {}
        self._win2_cache: dict = {}

    def abstraction(self, plan, init_set, final_set) -> AbstractTs:
        if self._ab is None:
            sub = OwsSubsystem(
                plan=plan,
                initial_set=init_set,
                final_set=final_set,
                state_box1=self.state_box,
                state_box2=self.state_box,
                control1=self.control1,
                control2=self.control2,
                disturbance=self.disturbance,
                dzeta=self.dzeta,
            )
            self._ab = build_abstraction(sub, eta=self.eta, control_step=self.control_step)
        return self._ab

    def synthesize_cell_pair(
        self,
        plan,
        init_set: MarginSet,
        final_set: MarginSet,
        init_offset: Tuple[float, float],
        goal_offset: Tuple[float, float],
    ) -> OwsSynthesis:
        ab = self.abstraction(plan, init_set, final_set)
        return synthesize_pair(
            ab,
            init_offset=init_offset,
            goal_offset=goal_offset,
            _win2_cache=self._win2_cache,
            _win1_cache=self._win1_cache,
        )
