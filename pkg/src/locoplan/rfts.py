"""Robustness margin sets and the keyframe-level robust transition system.

A margin set treats all states whose Riemannian image lies within a small
box around a keyframe as equivalent to that keyframe.  A coarse grid of
such boxes (one cell per neighbouring keyframe) turns one walking step
into a small finite transition system whose transitions are admitted or
deleted by reachability synthesis on the fine Euclidean abstraction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from locoplan.templates import (
    CONSTANT_ACCEL_MODES,
    ComState,
    DomainError,
    Keyframe,
    ModeKind,
    RiemCoord,
    TemplateParams,
    cotangent_zeta,
    keyframe_state,
    tangent_sigma,
)


class ConfigurationError(ValueError):
    """Margin/grid parameters violate a structural precondition."""


@dataclass(frozen=True)
class Margin:
    """Half-widths of a margin box along the two Riemannian axes."""

    d_zeta: float
    d_sigma: float

    def __post_init__(self):
        if not (self.d_zeta > 0.0 and self.d_sigma > 0.0):
            raise ConfigurationError(f"margin half-widths must be positive: {self}")


@dataclass(frozen=True)
class MarginSet:
    """Box of states equivalent to a keyframe, in Riemannian coordinates.

    ``offset`` shifts the box center away from the keyframe image; shifted
    copies represent the neighbouring keyframe cells of the coarse grid.
    ``zeta_ref`` anchors the progression coordinate; for the pendular
    modes this is the walking step's contact-switch state, which keeps the
    progression scale commensurate with the step length.
    """

    center: Keyframe
    params: TemplateParams
    margin: Margin
    zeta_ref: ComState
    offset: Tuple[float, float] = (0.0, 0.0)

    def riem(self, s: ComState) -> RiemCoord:
        return RiemCoord(
            cotangent_zeta(self.params, s, self.zeta_ref),
            tangent_sigma(self.params, s, self.center),
        )

    def contains(self, s: ComState) -> bool:
        try:
            z, sg = self.riem(s)
        except DomainError:
            return False
        oz, os = self.offset
        return abs(z - oz) <= self.margin.d_zeta and abs(sg - os) <= self.margin.d_sigma

    def shifted(self, d_zeta: float, d_sigma: float) -> "MarginSet":
        return replace(self, offset=(self.offset[0] + d_zeta, self.offset[1] + d_sigma))

    # -- vectorized evaluation over state arrays ---------------------------

    def sigma_of(self, x: np.ndarray, vx: np.ndarray) -> np.ndarray:
        p, a = self.params, self.center.apex_vx
        m = p.mode
        if m is ModeKind.PIPM:
            d = x - p.contact_x
            return (a * a / p.omega**2) * (vx * vx - a * a - p.omega**2 * d * d)
        if m is ModeKind.PPM:
            d = x - p.contact_x
            return (a * a / -(p.omega**2)) * (vx * vx - a * a + p.omega**2 * d * d)
        if m in CONSTANT_ACCEL_MODES:
            return 2.0 * p.omega * (x - self.center.contact_x) - (vx * vx - a * a)
        return vx - a

    def zeta_of(self, x: np.ndarray, vx: np.ndarray) -> np.ndarray:
        p, ref = self.params, self.zeta_ref
        m = p.mode
        if m is ModeKind.PIPM or m is ModeKind.PPM:
            expo = p.omega**2 if m is ModeKind.PIPM else -(p.omega**2)
            with np.errstate(invalid="ignore"):
                ratio = np.power(np.maximum(vx, 1e-12) / ref.vx, expo)
            return ratio * (x - p.contact_x) / (ref.x - p.contact_x)
        if m in CONSTANT_ACCEL_MODES:
            if ref.vx == 0.0:
                return x - ref.x
            return p.omega * np.log(np.maximum(vx, 1e-12) / ref.vx) - (x - ref.x)
        return x - ref.x

    def contains_many(self, x: np.ndarray, vx: np.ndarray) -> np.ndarray:
        oz, os = self.offset
        return (np.abs(self.zeta_of(x, vx) - oz) <= self.margin.d_zeta) & (
            np.abs(self.sigma_of(x, vx) - os) <= self.margin.d_sigma
        )

    def riem_box_range(
        self, xlo: np.ndarray, xhi: np.ndarray, vlo: np.ndarray, vhi: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Exact (zeta, sigma) ranges over axis-aligned state boxes.

        Both coordinates are monotone in each variable except sigma's
        dependence on x for the pendular modes, whose extremum sits at the
        contact anchor; evaluating the corners plus the clamped-anchor
        column covers every case.
        """
        cx = self.params.contact_x
        xc = np.clip(cx, xlo, xhi)
        cand_x = np.stack([xlo, xhi, xlo, xhi, xc, xc])
        cand_v = np.stack([vlo, vlo, vhi, vhi, vlo, vhi])
        z = self.zeta_of(cand_x, cand_v)
        s = self.sigma_of(cand_x, cand_v)
        return z.min(axis=0), z.max(axis=0), s.min(axis=0), s.max(axis=0)

    def cells_contained(self, grid) -> np.ndarray:
        """Cells of a Euclidean grid that lie entirely inside the set."""
        xlo, xhi, vlo, vhi = grid.cell_boxes()
        zmin, zmax, smin, smax = self.riem_box_range(xlo, xhi, vlo, vhi)
        oz, os = self.offset
        return (
            (zmin >= oz - self.margin.d_zeta)
            & (zmax <= oz + self.margin.d_zeta)
            & (smin >= os - self.margin.d_sigma)
            & (smax <= os + self.margin.d_sigma)
        )

    def cells_center_in(self, grid) -> np.ndarray:
        """Cells whose center state belongs to the set."""
        centers = grid.centers()
        return self.contains_many(centers[:, 0], centers[:, 1])


def in_margin(margin_set: MarginSet, s: ComState) -> bool:
    """Membership test in a margin set (propagates singular-reference errors)."""
    return margin_set.contains(s)


def margin_set_for(
    center: Keyframe,
    params: TemplateParams,
    margin: Margin,
    switch_state: ComState,
) -> MarginSet:
    """Margin set with the mode-appropriate progression anchor.

    Pendular orbits measure progression against the walking step's contact
    switch (their own keyframe sits on the singular contact anchor); the
    constant-acceleration and ballistic modes anchor at the keyframe
    itself, whose formulas are regular there.
    """
    if params.mode in (ModeKind.PIPM, ModeKind.PPM):
        ref = switch_state
    else:
        ref = keyframe_state(center)
    return MarginSet(center, params, margin, ref)


@dataclass(frozen=True)
class RiemGrid:
    """Coarse keyframe grid in Riemannian coordinates.

    Cell ``(i, j)`` is the ball of half-widths ``nu`` centered at
    ``(i * nu_zeta, j * nu_sigma)`` relative to the nominal keyframe
    image; a state maps to every cell whose ball contains it.
    """

    nu_zeta: float
    nu_sigma: float

    def __post_init__(self):
        if not (self.nu_zeta > 0.0 and self.nu_sigma > 0.0):
            raise ConfigurationError(f"granularity must be positive: {self}")

    def cell_center(self, ij: Tuple[int, int]) -> Tuple[float, float]:
        return (ij[0] * self.nu_zeta, ij[1] * self.nu_sigma)


def neighbor_cells(grid: RiemGrid, margin_set: MarginSet) -> List[Tuple[int, int]]:
    """Keyframe cells whose preimage ball meets the margin box.

    With the default granularity equal to the margin itself this returns
    the familiar 3x3 block around the nominal keyframe.
    """
    m = margin_set.margin
    if m.d_zeta < grid.nu_zeta - 1e-12 or m.d_sigma < grid.nu_sigma - 1e-12:
        raise ConfigurationError(
            f"margin {m} smaller than the grid granularity "
            f"({grid.nu_zeta}, {grid.nu_sigma})"
        )

    def reach(margin_hw: float, nu: float) -> int:
        # open ball (i*nu - nu, i*nu + nu) meets [-margin_hw, margin_hw]
        k = int(math.floor((margin_hw + nu) / nu + 1e-9))
        if (k * nu - nu) >= margin_hw - 1e-12:  # touching only: excluded
            k -= 1
        return k

    kz = reach(m.d_zeta, grid.nu_zeta)
    ks = reach(m.d_sigma, grid.nu_sigma)
    return [(i, j) for i in range(-kz, kz + 1) for j in range(-ks, ks + 1)]


@dataclass
class RftsTransition:
    cell_initial: Tuple[int, int]
    cell_final: Tuple[int, int]
    action: str  # opaque policy-store handle


@dataclass
class RftsOws:
    """Robust finite transition system for one walking step."""

    q_initial_cells: List[Tuple[int, int]]
    q_final_cells: List[Tuple[int, int]]
    mode_pair: Tuple[TemplateParams, TemplateParams]
    contact_pair: Tuple[int, int]
    transitions: List[RftsTransition]
    initial_cells: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.initial_cells:
            self.initial_cells = list(self.q_initial_cells)
        for t in self.transitions:
            assert t.cell_initial in self.q_initial_cells
            assert t.cell_final in self.q_final_cells

    def has_transition(self, ci: Tuple[int, int], cf: Tuple[int, int]) -> bool:
        return any(
            t.cell_initial == ci and t.cell_final == cf for t in self.transitions
        )

    def to_json_dict(self) -> dict:
        p1, p2 = self.mode_pair
        return {
            "format": "locoplan-rfts/1",
            "initial_cells": sorted(self.q_initial_cells),
            "final_cells": sorted(self.q_final_cells),
            "modes": [
                {"kind": p1.mode.name, "omega": p1.omega, "contact_x": p1.contact_x},
                {"kind": p2.mode.name, "omega": p2.omega, "contact_x": p2.contact_x},
            ],
            "contacts": list(self.contact_pair),
            "transitions": [
                {
                    "from": list(t.cell_initial),
                    "to": list(t.cell_final),
                    "action": t.action,
                }
                for t in self.transitions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def build_rfts(
    q_init: Keyframe,
    q_final: Keyframe,
    p1: TemplateParams,
    p2: TemplateParams,
    s1: int,
    s2: int,
    e1: Margin,
    e2: Margin,
    grid: Optional[RiemGrid],
    synth,
    store=None,
    cell_block: Optional[Sequence[Tuple[int, int]]] = None,
) -> RftsOws:
    """Admit keyframe-cell transitions for one walking step.

    Every candidate (initial cell, final cell) pair starts admitted; a
    reachability synthesis call (through ``synth``, a
    :class:`locoplan.reach_synth.ReachabilityBackend`) deletes the pairs
    whose goal margin box is not robustly reachable from the initial one.
    Policies of the surviving pairs are recorded in ``store`` when given,
    and the transition's action field carries the store handle.

    With ``grid=None`` each side uses its own margin as the keyframe-cell
    granularity (the default 3x3 block); ``cell_block`` optionally
    restricts the candidate cells (e.g. a plus-shaped 5-cell block).
    """
    from locoplan.phase_plan import plan_ows

    plan = plan_ows(q_init, q_final, p1, p2)
    init_set = margin_set_for(q_init, p1, e1, plan.switch_state)
    final_set = margin_set_for(q_final, p2, e2, plan.switch_state)

    grid_i = grid or RiemGrid(e1.d_zeta, e1.d_sigma)
    grid_f = grid or RiemGrid(e2.d_zeta, e2.d_sigma)
    cells_i = neighbor_cells(grid_i, init_set)
    cells_f = neighbor_cells(grid_f, final_set)
    if cell_block is not None:
        allowed = set(map(tuple, cell_block))
        cells_i = [c for c in cells_i if c in allowed]
        cells_f = [c for c in cells_f if c in allowed]

    transitions: List[RftsTransition] = []
    for cf in cells_f:
        for ci in cells_i:
            syn = synth.synthesize_cell_pair(
                plan,
                init_set,
                final_set,
                init_offset=_scale(ci, grid_i),
                goal_offset=_scale(cf, grid_f),
            )
            if not syn.admitted():
                continue
            pol = syn.as_policy(ci, cf, s1, s2)
            handle = store.add(pol) if store is not None else pol.handle()
            transitions.append(RftsTransition(ci, cf, handle))
    return RftsOws(
        q_initial_cells=cells_i,
        q_final_cells=cells_f,
        mode_pair=(p1, p2),
        contact_pair=(s1, s2),
        transitions=transitions,
    )


def _scale(ij: Tuple[int, int], grid: RiemGrid) -> Tuple[float, float]:
    return (ij[0] * grid.nu_zeta, ij[1] * grid.nu_sigma)
