"""Inter-sampling finite abstraction of one walking step.

The continuous two-mode subsystem is discretized three ways at once: a
uniform grid over the sagittal phase plane, a sampled control ladder per
mode, and a fixed control-hold phase step.  Per (cell, control) the set
of successor cells is an axis-aligned rectangle: the nominal hold-step
image of the cell center, inflated by a Lipschitz growth bound that
accounts for the in-cell position uncertainty and the bounded disturbance
acting over the hold interval.  Every continuous transition under any
admissible disturbance is covered by construction, which is what makes
the synthesized controllers carry over to the continuous system.

Mode switching is modelled as a zero-duration action available inside the
intermediate set where both modes' orbit deviations are small.
"""

from __future__ import annotations

import io
import json
import math
import zlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from locoplan.phase_plan import OwsPlan
from locoplan.rfts import ConfigurationError, Margin, MarginSet
from locoplan.templates import (
    CONSTANT_ACCEL_MODES,
    ComState,
    ModeKind,
    TemplateParams,
    rk4_step,
)

Box = Tuple[float, float, float, float]  # xlo, xhi, vlo, vhi

_TOL = 1e-9


@dataclass(frozen=True)
class UniformGrid:
    """Uniform partition of a phase-plane box.

    Cell index is ``ix * nv + iv`` with ``ix = floor((x - x0) / eta_x)``;
    states on the upper boundary clamp into the last cell.
    """

    x0: float
    v0: float
    eta_x: float
    eta_v: float
    nx: int
    nv: int

    @classmethod
    def from_box(cls, box: Box, eta: Tuple[float, float]) -> "UniformGrid":
        xlo, xhi, vlo, vhi = box
        ex, ev = eta
        nx = int(round((xhi - xlo) / ex))
        nv = int(round((vhi - vlo) / ev))
        if nx < 1 or nv < 1:
            raise ConfigurationError(f"degenerate grid over {box} at {eta}")
        if abs(xlo + nx * ex - xhi) > 1e-6 or abs(vlo + nv * ev - vhi) > 1e-6:
            raise ConfigurationError(f"box {box} is not a multiple of eta {eta}")
        return cls(xlo, vlo, ex, ev, nx, nv)

    @property
    def n_cells(self) -> int:
        return self.nx * self.nv

    @property
    def box(self) -> Box:
        return (
            self.x0,
            self.x0 + self.nx * self.eta_x,
            self.v0,
            self.v0 + self.nv * self.eta_v,
        )

    def cell_of(self, x: float, vx: float) -> int:
        xhi = self.x0 + self.nx * self.eta_x
        vhi = self.v0 + self.nv * self.eta_v
        if not (self.x0 - _TOL <= x <= xhi + _TOL and self.v0 - _TOL <= vx <= vhi + _TOL):
            return -1
        ix = min(int((x - self.x0) / self.eta_x), self.nx - 1)
        iv = min(int((vx - self.v0) / self.eta_v), self.nv - 1)
        return max(ix, 0) * self.nv + max(iv, 0)

    def cell_of_many(self, x: np.ndarray, vx: np.ndarray) -> np.ndarray:
        ix = np.clip(((x - self.x0) / self.eta_x).astype(np.int64), 0, self.nx - 1)
        iv = np.clip(((vx - self.v0) / self.eta_v).astype(np.int64), 0, self.nv - 1)
        xhi = self.x0 + self.nx * self.eta_x
        vhi = self.v0 + self.nv * self.eta_v
        inside = (
            (x >= self.x0 - _TOL)
            & (x <= xhi + _TOL)
            & (vx >= self.v0 - _TOL)
            & (vx <= vhi + _TOL)
        )
        return np.where(inside, ix * self.nv + iv, -1)

    def center_of(self, idx: int) -> ComState:
        ix, iv = divmod(idx, self.nv)
        return ComState(
            self.x0 + (ix + 0.5) * self.eta_x, self.v0 + (iv + 0.5) * self.eta_v
        )

    def box_of(self, idx: int) -> Box:
        ix, iv = divmod(idx, self.nv)
        return (
            self.x0 + ix * self.eta_x,
            self.x0 + (ix + 1) * self.eta_x,
            self.v0 + iv * self.eta_v,
            self.v0 + (iv + 1) * self.eta_v,
        )

    def centers(self) -> np.ndarray:
        idx = np.arange(self.n_cells)
        ix, iv = np.divmod(idx, self.nv)
        return np.stack(
            [
                self.x0 + (ix + 0.5) * self.eta_x,
                self.v0 + (iv + 0.5) * self.eta_v,
            ],
            axis=1,
        )

    def cell_boxes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        idx = np.arange(self.n_cells)
        ix, iv = np.divmod(idx, self.nv)
        return (
            self.x0 + ix * self.eta_x,
            self.x0 + (ix + 1) * self.eta_x,
            self.v0 + iv * self.eta_v,
            self.v0 + (iv + 1) * self.eta_v,
        )


def default_lipschitz(mode: ModeKind, u_abs_max: float) -> float:
    """Conservative scalar Lipschitz bound for one template's vector field.

    The pendular Jacobian couples the two state dimensions with gain
    ``omega^2``; the constant-acceleration templates only feed velocity
    into position.
    """
    if mode in (ModeKind.PIPM, ModeKind.PPM):
        return max(1.0, u_abs_max * u_abs_max)
    return 1.0


@dataclass(frozen=True)
class GrowthBound:
    """Lipschitz growth bound for reach-set inflation over one hold step."""

    lipschitz: float
    r: Tuple[float, float]
    dzeta: float

    def __post_init__(self):
        if self.lipschitz <= 0.0:
            raise ConfigurationError("lipschitz constant must be positive")
        if self.dzeta <= 0.0:
            raise ConfigurationError("hold step must be positive")
        if any(c < 0.0 for c in self.r):
            raise ConfigurationError("disturbance bound must be nonnegative")

    def inflation(self, initial_dev: Tuple[float, float]) -> np.ndarray:
        eL = math.exp(self.lipschitz * self.dzeta)
        gain = (eL - 1.0) / self.lipschitz
        dev = np.asarray(initial_dev, dtype=float)
        return dev * eL + gain * np.asarray(self.r, dtype=float)


def hold_step_deviation(
    mode: ModeKind,
    u_abs_max: float,
    dzeta: float,
    halfwidths: Tuple[float, float],
    r: Tuple[float, float],
) -> np.ndarray:
    """Exact component-wise deviation bound over one hold step.

    The deviation dynamics of every template are linear with a constant
    Jacobian, so the entry-wise absolute propagator gives a tight, sound
    bound on how far a disturbed in-cell state can drift from the cell
    center's nominal image.  Pendular modes use the hyperbolic propagator
    at the largest control magnitude (it dominates the oscillatory case);
    the constant-acceleration modes use the shear propagator exactly.
    """
    hx, hv = halfwidths
    rx, rv = r
    if mode in (ModeKind.PIPM, ModeKind.PPM):
        w = max(u_abs_max, 1e-9)
        ch = math.cosh(w * dzeta)
        sh = math.sinh(w * dzeta)
        dx = ch * hx + sh / w * hv + sh / w * rx + (ch - 1.0) / (w * w) * rv
        dv = w * sh * hx + ch * hv + (ch - 1.0) * rx + sh / w * rv
    else:
        dx = hx + dzeta * hv + dzeta * rx + 0.5 * dzeta * dzeta * rv
        dv = hv + dzeta * rv
    return np.array([dx, dv])


def reach_over_approx(
    cell_box: Box,
    u: float,
    params: TemplateParams,
    dzeta: float,
    gb: GrowthBound,
    domain: Optional[Box] = None,
) -> Optional[Box]:
    """Rectangle guaranteed to contain the hold-step reachable set of a cell.

    Returns ``None`` when the rectangle leaves the enclosing domain box
    (the action is then treated as having no transition).
    """
    xlo, xhi, vlo, vhi = cell_box
    center = ComState(0.5 * (xlo + xhi), 0.5 * (vlo + vhi))
    run = params if params.mode is ModeKind.HM else params.with_omega(u)
    img = rk4_step(run, center, dzeta)
    dev = gb.inflation((0.5 * (xhi - xlo), 0.5 * (vhi - vlo)))
    out = (img.x - dev[0], img.x + dev[0], img.vx - dev[1], img.vx + dev[1])
    if domain is not None:
        dxlo, dxhi, dvlo, dvhi = domain
        if out[0] < dxlo - _TOL or out[1] > dxhi + _TOL or out[2] < dvlo - _TOL or out[3] > dvhi + _TOL:
            return None
    return out


def _accel_many(mode: ModeKind, u: float, contact: float, x: np.ndarray) -> np.ndarray:
    if mode is ModeKind.PIPM:
        return u * u * (x - contact)
    if mode is ModeKind.PPM:
        return -u * u * (x - contact)
    if mode in CONSTANT_ACCEL_MODES:
        return np.full_like(x, u)
    return np.zeros_like(x)


def _rk4_many(
    mode: ModeKind,
    u: float,
    contact: float,
    x: np.ndarray,
    v: np.ndarray,
    dt: float,
) -> Tuple[np.ndarray, np.ndarray]:
    def f(xx, vv):
        return vv, _accel_many(mode, u, contact, xx)

    k1x, k1v = f(x, v)
    k2x, k2v = f(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
    k3x, k3v = f(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
    k4x, k4v = f(x + dt * k3x, v + dt * k3v)
    return (
        x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
        v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
    )


def sample_controls(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0.0:
        raise ConfigurationError("control step must be positive")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    out = lo + step * np.arange(n)
    if out.size == 0:
        raise ConfigurationError(f"empty control sample set for [{lo}, {hi}]")
    return out


@dataclass
class OwsSubsystem:
    """Continuous one-walking-step subsystem behind the abstraction."""

    plan: OwsPlan
    initial_set: MarginSet
    final_set: MarginSet
    state_box1: Box
    state_box2: Box
    control1: Tuple[float, float]
    control2: Tuple[float, float]
    disturbance: Tuple[float, float]
    dzeta: float
    lipschitz1: Optional[float] = None
    lipschitz2: Optional[float] = None

    def __post_init__(self):
        if self.dzeta <= 0.0:
            raise ConfigurationError("dzeta must be positive")
        if any(c < 0.0 for c in self.disturbance):
            raise ConfigurationError("disturbance bound must be nonnegative")
        lo1, hi1, _, _ = self.state_box1
        lo2, hi2, _, _ = self.state_box2
        if min(hi1, hi2) <= max(lo1, lo2):
            raise ConfigurationError("mode state boxes must overlap for the switch")

    def union_box(self) -> Box:
        b1, b2 = self.state_box1, self.state_box2
        return (
            min(b1[0], b2[0]),
            max(b1[1], b2[1]),
            min(b1[2], b2[2]),
            max(b1[3], b2[3]),
        )

    def growth_bound(self, which: int) -> GrowthBound:
        if which == 1:
            lip = self.lipschitz1
            if lip is None:
                lip = default_lipschitz(
                    self.plan.params1.mode, max(abs(c) for c in self.control1)
                )
        else:
            lip = self.lipschitz2
            if lip is None:
                lip = default_lipschitz(
                    self.plan.params2.mode, max(abs(c) for c in self.control2)
                )
        return GrowthBound(lip, self.disturbance, self.dzeta)

    def hold_deviation(self, which: int, halfwidths: Tuple[float, float]) -> np.ndarray:
        """Per-dimension inflation for one hold step.

        An explicit Lipschitz override selects the generic exponential
        growth bound; otherwise the exact per-mode propagator bound is
        used (tighter, and still an over-approximation).
        """
        lip = self.lipschitz1 if which == 1 else self.lipschitz2
        if lip is not None:
            return GrowthBound(lip, self.disturbance, self.dzeta).inflation(halfwidths)
        params = self.plan.params1 if which == 1 else self.plan.params2
        ctrl = self.control1 if which == 1 else self.control2
        u_max = max(abs(c) for c in ctrl)
        return hold_step_deviation(
            params.mode, u_max, self.dzeta, halfwidths, self.disturbance
        )


@dataclass
class ModeRects:
    """Per-(cell, control) successor rectangles for one mode (int32; a
    negative x-low marks an out-of-domain action)."""

    lo_x: np.ndarray
    hi_x: np.ndarray
    lo_v: np.ndarray
    hi_v: np.ndarray

    def valid(self) -> np.ndarray:
        return self.lo_x >= 0

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"lo_x": self.lo_x, "hi_x": self.hi_x, "lo_v": self.lo_v, "hi_v": self.hi_v}


@dataclass
class AbstractTs:
    """Finite abstraction of one walking step: two mode copies of the grid
    plus a zero-duration switch action inside the intermediate set."""

    grid: UniformGrid
    sub: OwsSubsystem
    controls1: np.ndarray
    controls2: np.ndarray
    rects1: ModeRects
    rects2: ModeRects
    valid1: np.ndarray
    valid2: np.ndarray
    sigma1_c: np.ndarray
    sigma2_c: np.ndarray
    sigma1_img: np.ndarray  # tangent of the one-step image, per (cell, control)
    sigma2_img: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    def successors(self, mode: int, cell: int, control_idx: int) -> Optional[List[int]]:
        """Explicit successor cell list (None for out-of-domain actions)."""
        rects = self.rects1 if mode == 1 else self.rects2
        if rects.lo_x[cell, control_idx] < 0:
            return None
        nv = self.grid.nv
        out = []
        for ix in range(rects.lo_x[cell, control_idx], rects.hi_x[cell, control_idx] + 1):
            for iv in range(rects.lo_v[cell, control_idx], rects.hi_v[cell, control_idx] + 1):
                out.append(ix * nv + iv)
        return out

    def switch_mask(
        self, init_sigma_offset: float = 0.0, final_sigma_offset: float = 0.0
    ) -> np.ndarray:
        """Cells where the mode switch is admissible: both orbits' deviations
        within their margin bounds (the intermediate set)."""
        d1 = self.sub.initial_set.margin.d_sigma
        d2 = self.sub.final_set.margin.d_sigma
        return (
            (np.abs(self.sigma1_c - init_sigma_offset) <= d1)
            & (np.abs(self.sigma2_c - final_sigma_offset) <= d2)
            & self.valid1
            & self.valid2
        )

    def initial_cells(self, offset: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
        shifted = self.sub.initial_set.shifted(*offset)
        return shifted.cells_center_in(self.grid) & self.valid1

    def goal_cells(self, offset: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
        shifted = self.sub.final_set.shifted(*offset)
        return shifted.cells_contained(self.grid) & self.valid2


def _build_mode(
    grid: UniformGrid,
    params: TemplateParams,
    controls: np.ndarray,
    dev: np.ndarray,
    dzeta: float,
    mode_box: Box,
    margin_set: MarginSet,
) -> Tuple[ModeRects, np.ndarray, np.ndarray]:
    centers = grid.centers()
    cx, cv = centers[:, 0], centers[:, 1]
    n, m = grid.n_cells, len(controls)
    lo_x = np.full((n, m), -1, dtype=np.int32)
    hi_x = np.zeros((n, m), dtype=np.int32)
    lo_v = np.zeros((n, m), dtype=np.int32)
    hi_v = np.zeros((n, m), dtype=np.int32)
    sigma_img = np.zeros((n, m), dtype=np.float32)
    bxlo, bxhi, bvlo, bvhi = mode_box
    cell_inside = (
        (grid.cell_boxes()[0] >= bxlo - _TOL)
        & (grid.cell_boxes()[1] <= bxhi + _TOL)
        & (grid.cell_boxes()[2] >= bvlo - _TOL)
        & (grid.cell_boxes()[3] <= bvhi + _TOL)
    )

    for k, u in enumerate(controls):
        ix, iv = _rk4_many(params.mode, float(u), params.contact_x, cx, cv, dzeta)
        rxlo, rxhi = ix - dev[0], ix + dev[0]
        rvlo, rvhi = iv - dev[1], iv + dev[1]
        ok = (
            cell_inside
            & (rxlo >= bxlo - _TOL)
            & (rxhi <= bxhi + _TOL)
            & (rvlo >= bvlo - _TOL)
            & (rvhi <= bvhi + _TOL)
        )
        klo_x = np.clip(np.floor((rxlo - grid.x0 - 1e-12) / grid.eta_x), 0, grid.nx - 1)
        khi_x = np.clip(np.floor((rxhi - grid.x0 + 1e-12) / grid.eta_x), 0, grid.nx - 1)
        klo_v = np.clip(np.floor((rvlo - grid.v0 - 1e-12) / grid.eta_v), 0, grid.nv - 1)
        khi_v = np.clip(np.floor((rvhi - grid.v0 + 1e-12) / grid.eta_v), 0, grid.nv - 1)
        lo_x[:, k] = np.where(ok, klo_x.astype(np.int32), -1)
        hi_x[:, k] = khi_x.astype(np.int32)
        lo_v[:, k] = klo_v.astype(np.int32)
        hi_v[:, k] = khi_v.astype(np.int32)
        sigma_img[:, k] = margin_set.sigma_of(ix, iv).astype(np.float32)

    return ModeRects(lo_x, hi_x, lo_v, hi_v), cell_inside, sigma_img


def build_abstraction(
    sub: OwsSubsystem,
    grid: Optional[UniformGrid] = None,
    eta: Tuple[float, float] = (0.005, 0.005),
    control_step: float = 0.02,
) -> AbstractTs:
    """Construct the two-mode grid abstraction of a walking step."""
    if grid is None:
        grid = UniformGrid.from_box(sub.union_box(), eta)
    c1 = sample_controls(sub.control1[0], sub.control1[1], control_step)
    c2 = sample_controls(sub.control2[0], sub.control2[1], control_step)
    if sub.plan.params1.mode is ModeKind.HM:
        c1 = np.array([0.0])
    if sub.plan.params2.mode is ModeKind.HM:
        c2 = np.array([0.0])

    half = (0.5 * grid.eta_x, 0.5 * grid.eta_v)
    rects1, valid1, s1_img = _build_mode(
        grid, sub.plan.params1, c1, sub.hold_deviation(1, half), sub.dzeta,
        sub.state_box1, sub.initial_set,
    )
    rects2, valid2, s2_img = _build_mode(
        grid, sub.plan.params2, c2, sub.hold_deviation(2, half), sub.dzeta,
        sub.state_box2, sub.final_set,
    )
    centers = grid.centers()
    sigma1_c = sub.initial_set.sigma_of(centers[:, 0], centers[:, 1])
    sigma2_c = sub.final_set.sigma_of(centers[:, 0], centers[:, 1])
    return AbstractTs(
        grid=grid,
        sub=sub,
        controls1=c1,
        controls2=c2,
        rects1=rects1,
        rects2=rects2,
        valid1=valid1,
        valid2=valid2,
        sigma1_c=sigma1_c,
        sigma2_c=sigma2_c,
        sigma1_img=s1_img,
        sigma2_img=s2_img,
    )


# -- cache file ------------------------------------------------------------

_MAGIC = b"LCABST1\n"


def save_abstraction(ab: AbstractTs, path: str) -> None:
    """Cache an abstraction: JSON header + zlib-compressed arrays."""
    arrays: List[Tuple[str, np.ndarray]] = [
        ("controls1", ab.controls1),
        ("controls2", ab.controls2),
        ("valid1", ab.valid1),
        ("valid2", ab.valid2),
        ("sigma1_c", ab.sigma1_c),
        ("sigma2_c", ab.sigma2_c),
        ("sigma1_img", ab.sigma1_img),
        ("sigma2_img", ab.sigma2_img),
    ]
    for pre, rects in (("r1", ab.rects1), ("r2", ab.rects2)):
        for name, arr in rects.arrays().items():
            arrays.append((f"{pre}_{name}", arr))

    blobs, specs = [], []
    for name, arr in arrays:
        raw = zlib.compress(np.ascontiguousarray(arr).tobytes(), level=6)
        specs.append(
            {"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape), "nbytes": len(raw)}
        )
        blobs.append(raw)

    sub = ab.sub
    header = {
        "grid": [ab.grid.x0, ab.grid.v0, ab.grid.eta_x, ab.grid.eta_v, ab.grid.nx, ab.grid.nv],
        "dzeta": sub.dzeta,
        "disturbance": list(sub.disturbance),
        "state_box1": list(sub.state_box1),
        "state_box2": list(sub.state_box2),
        "control1": list(sub.control1),
        "control2": list(sub.control2),
        "modes": [
            _params_dict(sub.plan.params1),
            _params_dict(sub.plan.params2),
        ],
        "keyframes": [list(sub.plan.kf_initial), list(sub.plan.kf_final)],
        "switch_state": list(sub.plan.switch_state),
        "zeta_switch": sub.plan.zeta_switch,
        "margins": [
            [sub.initial_set.margin.d_zeta, sub.initial_set.margin.d_sigma],
            [sub.final_set.margin.d_zeta, sub.final_set.margin.d_sigma],
        ],
        "lipschitz": [sub.lipschitz1, sub.lipschitz2],
        "arrays": specs,
    }
    head = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(head).to_bytes(8, "little"))
        fh.write(head)
        for raw in blobs:
            fh.write(raw)


def _params_dict(p: TemplateParams) -> dict:
    return {"kind": p.mode.name, "omega": p.omega, "contact_x": p.contact_x}


def _params_from(d: dict) -> TemplateParams:
    return TemplateParams(ModeKind[d["kind"]], d["omega"], d["contact_x"])


def load_abstraction(path: str) -> AbstractTs:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ConfigurationError(f"{path} is not an abstraction cache")
        n = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(n).decode())
        data = {}
        for spec in header["arrays"]:
            raw = zlib.decompress(fh.read(spec["nbytes"]))
            data[spec["name"]] = np.frombuffer(raw, dtype=spec["dtype"]).reshape(
                spec["shape"]
            ).copy()

    gx0, gv0, ex, ev, nx, nv = header["grid"]
    grid = UniformGrid(gx0, gv0, ex, ev, int(nx), int(nv))
    p1 = _params_from(header["modes"][0])
    p2 = _params_from(header["modes"][1])
    from locoplan.templates import Keyframe

    kf1 = Keyframe(*header["keyframes"][0])
    kf2 = Keyframe(*header["keyframes"][1])
    switch = ComState(*header["switch_state"])
    plan = OwsPlan(kf1, kf2, p1, p2, switch, header["zeta_switch"])
    m1, m2 = header["margins"]
    sub = OwsSubsystem(
        plan=plan,
        initial_set=MarginSet(kf1, p1, Margin(*m1), switch),
        final_set=MarginSet(kf2, p2, Margin(*m2), switch),
        state_box1=tuple(header["state_box1"]),
        state_box2=tuple(header["state_box2"]),
        control1=tuple(header["control1"]),
        control2=tuple(header["control2"]),
        disturbance=tuple(header["disturbance"]),
        dzeta=header["dzeta"],
        lipschitz1=header["lipschitz"][0],
        lipschitz2=header["lipschitz"][1],
    )
    return AbstractTs(
        grid=grid,
        sub=sub,
        controls1=data["controls1"],
        controls2=data["controls2"],
        rects1=ModeRects(data["r1_lo_x"], data["r1_hi_x"], data["r1_lo_v"], data["r1_hi_v"]),
        rects2=ModeRects(data["r2_lo_x"], data["r2_hi_x"], data["r2_lo_v"], data["r2_hi_v"]),
        valid1=data["valid1"],
        valid2=data["valid2"],
        sigma1_c=data["sigma1_c"],
        sigma2_c=data["sigma2_c"],
        sigma1_img=data["sigma1_img"],
        sigma2_img=data["sigma2_img"],
    )
