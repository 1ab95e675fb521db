"""Margin sets and the Riemannian keyframe grid."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locoplan.phase_plan import plan_ows
from locoplan.rfts import (
    ConfigurationError,
    Margin,
    MarginSet,
    RiemGrid,
    in_margin,
    neighbor_cells,
)
from locoplan.templates import (
    ComState,
    Keyframe,
    ModeKind,
    TemplateParams,
    keyframe_state,
)


@pytest.fixture(scope="module")
def walk_sets():
    """Margin sets of the single-step walk study, anchored at its switch."""
    p1 = TemplateParams(ModeKind.PIPM, 3.0, 0.0)
    p2 = TemplateParams(ModeKind.PIPM, 3.0, 0.5)
    plan = plan_ows(Keyframe(0.0, 0.5), Keyframe(0.5, 0.6), p1, p2)
    init_set = MarginSet(Keyframe(0.0, 0.5), p1, Margin(0.05, 0.002), plan.switch_state)
    final_set = MarginSet(Keyframe(0.5, 0.6), p2, Margin(0.05, 0.006), plan.switch_state)
    return init_set, final_set


class TestMarginSet:
    def test_margin_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            Margin(0.0, 0.1)

    def test_center_is_member(self, walk_sets):
        init_set, final_set = walk_sets
        assert in_margin(init_set, keyframe_state(init_set.center))
        assert in_margin(final_set, keyframe_state(final_set.center))

    def test_sigma_overflow_excluded(self, walk_sets):
        # Perturb vx upward until sigma = 0.01 > 0.006 at the final keyframe.
        _, final_set = walk_sets
        a = final_set.center.apex_vx
        w2 = final_set.params.omega ** 2
        # sigma = (a^2/w^2)(vx^2 - a^2) at x = contact -> solve for sigma=0.01
        vx = math.sqrt(0.01 * w2 / a**2 + a**2)
        s = ComState(final_set.center.contact_x, vx)
        assert final_set.riem(s).sigma == pytest.approx(0.01, rel=1e-9)
        assert not in_margin(final_set, s)

    def test_on_manifold_state_within_zeta_window(self, walk_sets):
        init_set, _ = walk_sets
        v = math.sqrt(0.25 + 9 * 0.05**2)  # nominal orbit at x = 0.05
        assert in_margin(init_set, ComState(0.05, v))

    def test_shifted_offsets(self, walk_sets):
        init_set, _ = walk_sets
        shifted = init_set.shifted(0.0, 0.004)
        center = keyframe_state(init_set.center)
        assert in_margin(init_set, center)
        assert not in_margin(shifted, center)  # offset exceeds d_sigma

    def test_contains_many_matches_scalar(self, walk_sets):
        init_set, final_set = walk_sets
        rng = np.random.default_rng(3)
        x = rng.uniform(-0.1, 0.6, 300)
        v = rng.uniform(0.1, 1.2, 300)
        for ms in (init_set, final_set):
            vec = ms.contains_many(x, v)
            for i in range(len(x)):
                assert vec[i] == ms.contains(ComState(x[i], v[i]))

    @settings(max_examples=50, deadline=None)
    @given(
        xlo=st.floats(-0.05, 0.55),
        vlo=st.floats(0.15, 1.0),
        wx=st.floats(0.002, 0.05),
        wv=st.floats(0.002, 0.05),
    )
    def test_box_range_bounds_dense_samples(self, walk_sets, xlo, vlo, wx, wv):
        """The analytic per-box (zeta, sigma) range contains every sampled
        image (independent dense-sampling oracle)."""
        init_set, _ = walk_sets
        xhi, vhi = xlo + wx, vlo + wv
        zmin, zmax, smin, smax = init_set.riem_box_range(
            np.array([xlo]), np.array([xhi]), np.array([vlo]), np.array([vhi])
        )
        xs, vs = np.meshgrid(np.linspace(xlo, xhi, 9), np.linspace(vlo, vhi, 9))
        z = init_set.zeta_of(xs.ravel(), vs.ravel())
        s = init_set.sigma_of(xs.ravel(), vs.ravel())
        tol = 1e-9
        assert z.min() >= zmin[0] - tol and z.max() <= zmax[0] + tol
        assert s.min() >= smin[0] - tol and s.max() <= smax[0] + tol


class TestRiemGrid:
    def test_unit_margin_gives_3x3_block(self, walk_sets):
        init_set, _ = walk_sets
        grid = RiemGrid(init_set.margin.d_zeta, init_set.margin.d_sigma)
        cells = neighbor_cells(grid, init_set)
        assert sorted(cells) == [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)]

    def test_double_margin_gives_5x3_block(self, walk_sets):
        init_set, _ = walk_sets
        m = init_set.margin
        wide = MarginSet(
            init_set.center,
            init_set.params,
            Margin(2 * m.d_zeta, m.d_sigma),
            init_set.zeta_ref,
        )
        grid = RiemGrid(m.d_zeta, m.d_sigma)
        cells = neighbor_cells(grid, wide)
        assert len(cells) == 15
        assert max(i for i, _ in cells) == 2
        assert max(j for _, j in cells) == 1

    def test_margin_below_granularity_rejected(self, walk_sets):
        init_set, _ = walk_sets
        grid = RiemGrid(init_set.margin.d_zeta * 4, init_set.margin.d_sigma)
        with pytest.raises(ConfigurationError):
            neighbor_cells(grid, init_set)


class TestBuildRfts:
    """Keyframe-cell transition admission on a small synthesis problem."""

    @pytest.fixture(scope="class")
    def setup(self):
        from locoplan.reach_synth import ReachabilityBackend

        p1 = TemplateParams(ModeKind.PIPM, 3.0, 0.0)
        p2 = TemplateParams(ModeKind.PIPM, 3.0, 0.5)
        kf1, kf2 = Keyframe(0.0, 0.5), Keyframe(0.5, 0.6)
        e1, e2 = Margin(0.05, 0.002), Margin(0.05, 0.006)

        def backend():
            return ReachabilityBackend(
                state_box=(-0.12, 0.68, 0.3, 1.1),
                control1=(2.0, 4.0),
                control2=(2.0, 4.0),
                disturbance=(0.05, 0.1),
                dzeta=0.02,
                eta=(0.008, 0.008),
                control_step=0.25,
            )

        return kf1, kf2, p1, p2, e1, e2, backend

    def test_cross_block_admits_center(self, setup):
        from locoplan.reach_synth import PolicyStore
        from locoplan.rfts import build_rfts

        kf1, kf2, p1, p2, e1, e2, backend = setup
        store = PolicyStore()
        cross = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
        rfts = build_rfts(
            kf1, kf2, p1, p2, 0, 0, e1, e2, None, backend(),
            store=store, cell_block=cross,
        )
        assert rfts.has_transition((0, 0), (0, 0))
        assert set(rfts.initial_cells) == set(rfts.q_initial_cells)
        assert len(store) == len(rfts.transitions)
        doc = rfts.to_json()
        assert '"locoplan-rfts/1"' in doc
        # sampled states inside each admitted goal box really belong to it
        for t in rfts.transitions[:3]:
            pol = store.get(t.action)
            goal = pol.final_set
            rng = np.random.default_rng(1)
            hits = 0
            for _ in range(100):
                x = rng.uniform(0.3, 0.68)
                v = rng.uniform(0.3, 1.1)
                if goal.contains(ComState(x, v)):
                    hits += 1
                    cell = pol.grid.cell_of(x, v)
                    assert cell >= 0
            assert hits > 0

    def test_enlarging_goal_margin_never_removes_transitions(self, setup):
        from locoplan.rfts import RiemGrid, build_rfts

        kf1, kf2, p1, p2, e1, e2, backend = setup
        # fixed cells for comparability; fine enough for both margins
        grid = RiemGrid(min(e1.d_zeta, e2.d_zeta), min(e1.d_sigma, e2.d_sigma))
        cross = [(0, 0), (0, 1), (0, -1)]
        small = build_rfts(
            kf1, kf2, p1, p2, 0, 0, e1, e2, grid, backend(), cell_block=cross
        )
        bigger = Margin(e2.d_zeta * 1.5, e2.d_sigma * 1.5)
        large = build_rfts(
            kf1, kf2, p1, p2, 0, 0, e1, bigger, grid, backend(), cell_block=cross
        )
        small_set = {(t.cell_initial, t.cell_final) for t in small.transitions}
        large_set = {(t.cell_initial, t.cell_final) for t in large.transitions}
        assert small_set <= large_set

    def test_enlarging_disturbance_never_adds_transitions(self, setup):
        from locoplan.reach_synth import ReachabilityBackend
        from locoplan.rfts import build_rfts

        kf1, kf2, p1, p2, e1, e2, backend = setup
        cross = [(0, 0), (0, 1), (0, -1)]

        def make(dist):
            b = ReachabilityBackend(
                state_box=(-0.12, 0.68, 0.3, 1.1),
                control1=(2.0, 4.0),
                control2=(2.0, 4.0),
                disturbance=dist,
                dzeta=0.02,
                eta=(0.008, 0.008),
                control_step=0.25,
            )
            r = build_rfts(kf1, kf2, p1, p2, 0, 0, e1, e2, None, b, cell_block=cross)
            return {(t.cell_initial, t.cell_final) for t in r.transitions}

        assert make((0.1, 0.2)) <= make((0.05, 0.1))
