"""Uniform grid, growth bound, and the over-approximating abstraction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locoplan.abstraction import (
    AbstractTs,
    GrowthBound,
    OwsSubsystem,
    UniformGrid,
    _build_mode,
    build_abstraction,
    default_lipschitz,
    hold_step_deviation,
    load_abstraction,
    reach_over_approx,
    sample_controls,
    save_abstraction,
)
from locoplan.phase_plan import plan_ows
from locoplan.rfts import ConfigurationError, Margin, MarginSet
from locoplan.templates import ComState, Keyframe, ModeKind, TemplateParams, rk4_step


def small_subsystem(disturbance=(0.05, 0.1), box=(-0.1, 0.7, 0.1, 1.2)):
    p1 = TemplateParams(ModeKind.PIPM, 3.0, 0.0)
    p2 = TemplateParams(ModeKind.PIPM, 3.0, 0.5)
    plan = plan_ows(Keyframe(0.0, 0.5), Keyframe(0.5, 0.6), p1, p2)
    init_set = MarginSet(Keyframe(0.0, 0.5), p1, Margin(0.05, 0.002), plan.switch_state)
    final_set = MarginSet(Keyframe(0.5, 0.6), p2, Margin(0.05, 0.006), plan.switch_state)
    return OwsSubsystem(
        plan, init_set, final_set, box, box, (2.0, 4.0), (2.0, 4.0),
        disturbance, 0.02,
    )


class TestUniformGrid:
    def test_reference_grid_shape(self):
        g = UniformGrid.from_box((-0.1, 0.7, 0.1, 1.2), (0.005, 0.005))
        assert (g.nx, g.nv) == (160, 220)
        assert g.n_cells == 35200

    @settings(max_examples=100)
    @given(st.integers(0, 160 * 220 - 1))
    def test_index_bijectivity(self, idx):
        g = UniformGrid.from_box((-0.1, 0.7, 0.1, 1.2), (0.005, 0.005))
        c = g.center_of(idx)
        assert g.cell_of(c.x, c.vx) == idx

    def test_upper_boundary_clamps(self):
        g = UniformGrid.from_box((0.0, 1.0, 0.0, 1.0), (0.1, 0.1))
        assert g.cell_of(1.0, 1.0) == g.n_cells - 1

    def test_outside_returns_sentinel(self):
        g = UniformGrid.from_box((0.0, 1.0, 0.0, 1.0), (0.1, 0.1))
        assert g.cell_of(1.2, 0.5) == -1
        assert g.cell_of_many(np.array([0.5, 1.2]), np.array([0.5, 0.5]))[1] == -1

    def test_misaligned_box_rejected(self):
        with pytest.raises(ConfigurationError):
            UniformGrid.from_box((0.0, 1.03, 0.0, 1.0), (0.1, 0.1))


class TestGrowthBound:
    def test_reference_inflation_value(self):
        gb = GrowthBound(16.0, (0.05, 0.1), 0.02)
        infl = gb.inflation((0.0, 0.0))
        assert infl[0] == pytest.approx(1.1785e-3, rel=1e-3)
        assert infl[1] == pytest.approx(2.3571e-3, rel=1e-3)

    def test_monotone_in_r_l_dzeta(self):
        base = GrowthBound(4.0, (0.05, 0.1), 0.02).inflation((0.002, 0.002))
        more_r = GrowthBound(4.0, (0.1, 0.2), 0.02).inflation((0.002, 0.002))
        more_l = GrowthBound(8.0, (0.05, 0.1), 0.02).inflation((0.002, 0.002))
        more_t = GrowthBound(4.0, (0.05, 0.1), 0.04).inflation((0.002, 0.002))
        assert (more_r >= base).all()
        assert (more_l >= base).all()
        assert (more_t >= base).all()

    def test_default_lipschitz(self):
        assert default_lipschitz(ModeKind.PIPM, 4.0) == 16.0
        assert default_lipschitz(ModeKind.MCM, 3.0) == 1.0
        assert default_lipschitz(ModeKind.HM, 0.0) == 1.0


class TestDeviationBound:
    @settings(max_examples=60, deadline=None)
    @given(
        kind=st.sampled_from([ModeKind.PIPM, ModeKind.PPM, ModeKind.MCM]),
        u=st.floats(1.0, 4.0),
        hx=st.floats(0.0, 0.01),
        hv=st.floats(0.0, 0.01),
        fx=st.floats(-1.0, 1.0),
        fv=st.floats(-1.0, 1.0),
        sx=st.floats(-1.0, 1.0),
        sv=st.floats(-1.0, 1.0),
    )
    def test_propagator_bound_is_sound(self, kind, u, hx, hv, fx, fv, sx, sv):
        """Independent oracle: integrate a perturbed and a nominal state with
        a constant admissible disturbance; deviation stays within the bound."""
        r = (0.05, 0.1)
        dz = 0.02
        params = TemplateParams(kind, u if kind is not ModeKind.MCM else -u, 0.1)
        u_eff = abs(params.omega)
        dev = hold_step_deviation(kind, u_eff, dz, (hx, hv), r)
        s0 = ComState(0.2, 0.6)
        s1 = ComState(0.2 + fx * hx, 0.6 + fv * hv)
        d = (sx * r[0], sv * r[1])
        a = rk4_step(params, s0, dz)
        b = rk4_step(params, s1, dz, d)
        assert abs(b.x - a.x) <= dev[0] + 1e-12
        assert abs(b.vx - a.vx) <= dev[1] + 1e-12


class TestReachOverApprox:
    P = TemplateParams(ModeKind.PIPM, 3.0, 0.0)

    def test_point_cell_zero_disturbance_is_flow_image(self):
        gb = GrowthBound(16.0, (0.0, 0.0), 0.02)
        cell = (0.1, 0.1, 0.5, 0.5)
        box = reach_over_approx(cell, 3.0, self.P, 0.02, gb)
        img = rk4_step(self.P, ComState(0.1, 0.5), 0.02)
        assert box[0] == pytest.approx(img.x) and box[1] == pytest.approx(img.x)
        assert box[2] == pytest.approx(img.vx) and box[3] == pytest.approx(img.vx)

    def test_domain_exit_marked(self):
        gb = GrowthBound(16.0, (0.05, 0.1), 0.02)
        cell = (0.68, 0.7, 1.1, 1.12)
        out = reach_over_approx(cell, 4.0, self.P, 0.02, gb, domain=(-0.1, 0.7, 0.1, 1.2))
        assert out is None


class TestBuildAbstraction:
    def test_reference_dimensions(self):
        ab = build_abstraction(small_subsystem())
        assert (ab.grid.nx, ab.grid.nv) == (160, 220)
        assert len(ab.controls1) == 101 and len(ab.controls2) == 101

    def test_empty_control_set_rejected(self):
        with pytest.raises(ConfigurationError):
            sample_controls(2.0, 4.0, 0.0)

    def test_over_approximation_sampling(self):
        """RK4 images of random in-cell states under admissible disturbances
        land inside the successor rectangle (2000-sample spot check; the
        acceptance suite runs the full 10000)."""
        sub = small_subsystem()
        ab = build_abstraction(sub, eta=(0.02, 0.02))
        escapes = _soundness_escapes(ab, n=2000, seed=5)
        assert escapes == 0

    def test_doubling_disturbance_grows_successor_sets(self):
        box = (0.0, 0.4, 0.3, 0.7)
        sub1 = small_subsystem(disturbance=(0.05, 0.1), box=box)
        sub2 = small_subsystem(disturbance=(0.1, 0.2), box=box)
        ab1 = build_abstraction(sub1, eta=(0.02, 0.02))
        ab2 = build_abstraction(sub2, eta=(0.02, 0.02))
        r1, r2 = ab1.rects1, ab2.rects1
        both = (r1.lo_x >= 0) & (r2.lo_x >= 0)
        assert (r2.lo_x[both] <= r1.lo_x[both]).all()
        assert (r2.hi_x[both] >= r1.hi_x[both]).all()
        assert (r2.lo_v[both] <= r1.lo_v[both]).all()
        assert (r2.hi_v[both] >= r1.hi_v[both]).all()
        # and every action killed by the smaller bound dies under the larger
        assert not ((r1.lo_x < 0) & (r2.lo_x >= 0)).any()

    def test_self_loop_on_single_cell_grid(self):
        """A stationary ballistic cell maps onto itself only."""
        grid = UniformGrid.from_box((-0.01, 0.01, -0.01, 0.01), (0.02, 0.02))
        params = TemplateParams(ModeKind.HM)
        ms = MarginSet(
            Keyframe(0.0, 0.0), params, Margin(0.05, 0.05), ComState(-0.01, 0.0)
        )
        rects, valid, _ = _build_mode(
            grid, params, np.array([0.0]),
            np.array([0.004, 0.004]), 0.02, grid.box, ms,
        )
        assert valid.all()
        assert rects.lo_x[0, 0] == 0 and rects.hi_x[0, 0] == 0
        assert rects.lo_v[0, 0] == 0 and rects.hi_v[0, 0] == 0

    def test_cache_roundtrip_bit_exact(self, tmp_path):
        sub = small_subsystem()
        ab = build_abstraction(sub, eta=(0.02, 0.02))
        path = tmp_path / "cache.bin"
        save_abstraction(ab, str(path))
        back = load_abstraction(str(path))
        assert (back.rects1.lo_x == ab.rects1.lo_x).all()
        assert (back.rects2.hi_v == ab.rects2.hi_v).all()
        assert (back.sigma1_img == ab.sigma1_img).all()
        assert back.grid == ab.grid
        assert back.sub.plan.switch_state == ab.sub.plan.switch_state
        # a second save is byte-identical
        path2 = tmp_path / "cache2.bin"
        save_abstraction(back, str(path2))
        assert path.read_bytes() == path2.read_bytes()


def _soundness_escapes(ab: AbstractTs, n: int, seed: int) -> int:
    rng = np.random.default_rng(seed)
    escapes = 0
    grid = ab.grid
    r = np.asarray(ab.sub.disturbance)
    for mode, rects, controls, params in (
        (1, ab.rects1, ab.controls1, ab.sub.plan.params1),
        (2, ab.rects2, ab.controls2, ab.sub.plan.params2),
    ):
        for _ in range(n // 2):
            cell = int(rng.integers(grid.n_cells))
            k = int(rng.integers(len(controls)))
            if rects.lo_x[cell, k] < 0:
                continue
            xlo, xhi, vlo, vhi = grid.box_of(cell)
            s = ComState(rng.uniform(xlo, xhi), rng.uniform(vlo, vhi))
            d = rng.uniform(-r, r)
            run = params if params.mode is ModeKind.HM else params.with_omega(
                float(controls[k])
            )
            img = rk4_step(run, s, ab.sub.dzeta, (d[0], d[1]))
            c2 = grid.cell_of(img.x, img.vx)
            ix, iv = divmod(c2, grid.nv)
            if not (
                rects.lo_x[cell, k] <= ix <= rects.hi_x[cell, k]
                and rects.lo_v[cell, k] <= iv <= rects.hi_v[cell, k]
            ):
                escapes += 1
    return escapes
