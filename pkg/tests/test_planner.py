import numpy as np
import pytest

from particlecover import (Attitude, CameraIntrinsics, ControlInput,
                           CoverageSurrogateParams, FootprintCell,
                           ParticleField, ParticleHarvestPlanner, Polygon2D,
                           State, harvest, plan_step, points_in_polygon,
                           project_footprint, remaining_term, rollout,
                           smooth_remaining_term)
from particlecover.planner import _KernelObjective


@pytest.fixture(scope="module")
def rect_poly():
    return Polygon2D(np.array([[0, 0], [2.5, 0], [2.5, 2], [0, 2]],
                              dtype=float))


@pytest.fixture(scope="module")
def field(rect_poly):
    return ParticleField.from_polygon(rect_poly, 400, seed=1)


class TestParticleField:
    def test_points_read_only(self, field):
        with pytest.raises(ValueError):
            field.points[0, 0] = 99.0

    def test_len(self, field):
        assert len(field) == 400
        assert field.initial_count == 400


class TestHarvest:
    def test_removes_exactly_contained(self, field, camera):
        cell = project_footprint((1.2, 1.0, 0.8), Attitude(0, 0, 0), camera)
        inside = points_in_polygon(field.points, cell.vertices)
        after, count = harvest(field, cell)
        assert count == int(inside.sum())
        assert len(after) == len(field) - count
        assert not points_in_polygon(after.points, cell.vertices).any()

    def test_conservation_over_sequence(self, field, camera):
        rng = np.random.default_rng(8)
        cur = field
        total = 0
        for _ in range(20):
            pos = (rng.uniform(0, 2.5), rng.uniform(0, 2), rng.uniform(0.3, 1))
            att = Attitude(*rng.uniform(-0.3, 0.3, size=2), 0.0)
            cell = project_footprint(pos, att, camera)
            nxt, count = harvest(cur, cell)
            assert count >= 0
            assert len(nxt) == len(cur) - count
            total += count
            cur = nxt
        assert total + len(cur) == len(field)

    def test_empty_field_noop(self, camera):
        empty = ParticleField(np.empty((0, 2)), 10)
        cell = project_footprint((0, 0, 1.0), Attitude(0, 0, 0), camera)
        after, count = harvest(empty, cell)
        assert count == 0 and len(after) == 0


class TestSurrogate:
    def test_matches_exact_with_margin(self, rect_poly, camera):
        # Sharpness 200, every particle at least 5 cm from a cell edge:
        # the smooth count must stay within 1% of the field size.
        params = CoverageSurrogateParams(sharpness=200.0)
        rng = np.random.default_rng(13)
        for seed in (1, 2, 3, 4, 5):
            f = ParticleField.from_polygon(rect_poly, 500, seed=seed)
            pos = (rng.uniform(0.5, 2.0), rng.uniform(0.5, 1.5),
                   rng.uniform(0.4, 1.0))
            att = Attitude(*rng.uniform(-0.2, 0.2, size=2), 0.0)
            cell = project_footprint(pos, att, camera)
            v = cell.vertices
            nxt = np.roll(v, -1, axis=0)
            ex, ey = nxt[:, 0] - v[:, 0], nxt[:, 1] - v[:, 1]
            ln = np.hypot(ex, ey)
            pts = f.points
            d = np.abs(ex[None, :] * (pts[:, 1:2] - v[None, :, 1])
                       - ey[None, :] * (pts[:, 0:1] - v[None, :, 0])) / ln
            kept = ParticleField(pts[d.min(axis=1) >= 0.05], f.initial_count)
            exact = remaining_term(kept, cell)
            smooth = smooth_remaining_term(kept, cell, params)
            assert abs(smooth - exact) < 0.01 * len(kept)

    def test_exact_mode_identical(self, field, camera):
        cell = project_footprint((1.0, 1.0, 0.7), Attitude(0.1, 0, 0), camera)
        params = CoverageSurrogateParams(sharpness=50.0, exact=True)
        assert smooth_remaining_term(field, cell, params) == remaining_term(
            field, cell)

    def test_bad_sharpness_rejected(self):
        with pytest.raises(ValueError):
            CoverageSurrogateParams(sharpness=0.0)


class TestKernelConsistency:
    def test_kernel_matches_rollout(self, planner_cfg, field):
        # The compiled objective must agree with the pure-Python rollout on
        # random control sequences to floating-point accuracy.
        rng = np.random.default_rng(21)
        state = State(1.0, 0.8, 0.6, 0.2, -0.1, 0.0)
        prev = planner_cfg.hover_input()
        pts = np.ascontiguousarray(field.points)
        kern = _KernelObjective(state.to_array(), prev.to_array(), pts,
                                planner_cfg, None, 0.0)
        hover = planner_cfg.vehicle.hover_thrust
        for _ in range(30):
            u = np.concatenate([
                [rng.uniform(0.7 * hover, 1.3 * hover),
                 rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), 0.0]
                for _ in range(planner_cfg.horizon)])
            controls = [ControlInput.from_array(u[4 * j:4 * j + 4])
                        for j in range(planner_cfg.horizon)]
            plan = rollout(state, field, controls, planner_cfg,
                           prev_input=prev)
            got = kern.objective(u)
            assert got == pytest.approx(plan.total_cost, rel=1e-9, abs=1e-9)

    def test_kernel_constraints_shapes(self, planner_cfg, field):
        state = State(1.0, 0.8, 0.6, 0.0, 0.0, 0.0)
        prev = planner_cfg.hover_input()
        kern = _KernelObjective(state.to_array(), prev.to_array(),
                                np.ascontiguousarray(field.points),
                                planner_cfg, None, 0.0)
        u = np.tile(prev.to_array(), planner_cfg.horizon)
        g = kern.inequality(u)
        assert g.shape == (planner_cfg.horizon * 7,)

    def test_fused_gradient_matches_fd(self, planner_cfg, field):
        state = State(1.0, 0.8, 0.6, 0.0, 0.0, 0.0)
        prev = planner_cfg.hover_input()
        kern = _KernelObjective(state.to_array(), prev.to_array(),
                                np.ascontiguousarray(field.points),
                                planner_cfg, None, 0.0)
        hover = planner_cfg.vehicle.hover_thrust
        u = np.tile([hover, 0.06, -0.05, 0.0], planner_cfg.horizon)
        mu = 100.0
        f, g = kern.penalized_value_and_grad(u, mu)

        def penalized(x):
            val = kern.objective(x)
            viol = np.maximum(kern.inequality(x), 0.0)
            return val + mu * float(viol @ viol)

        assert f == pytest.approx(penalized(u), rel=1e-9)
        h = 1e-6
        for i in range(0, u.size, 5):
            hi = h * max(1.0, abs(u[i]))
            up, um = u.copy(), u.copy()
            up[i] += hi
            um[i] -= hi
            fd = (penalized(up) - penalized(um)) / (2 * hi)
            assert g[i] == pytest.approx(fd, rel=1e-4, abs=1e-5)


class TestPlanStep:
    def test_returns_limited_input(self, planner_cfg, field):
        state = State(1.2, 1.0, 0.5, 0.0, 0.0, 0.0)
        u, report, x = plan_step(state, field, planner_cfg)
        lim = planner_cfg.limits
        assert lim.thrust[0] <= u.thrust <= lim.thrust[1]
        assert lim.roll[0] <= u.roll <= lim.roll[1]
        assert lim.pitch[0] <= u.pitch <= lim.pitch[1]
        assert x.shape == (4 * planner_cfg.horizon,)
        assert np.isfinite(report.fun)

    def test_yaw_fixed_by_default(self, planner_cfg, field):
        state = State(1.2, 1.0, 0.5, 0.0, 0.0, 0.0)
        u, _, x = plan_step(state, field, planner_cfg)
        assert u.yaw == 0.0
        assert np.all(x[3::4] == 0.0)

    def test_planner_keeps_warm_start(self, planner_cfg, field):
        planner = ParticleHarvestPlanner(planner_cfg)
        state = State(1.2, 1.0, 0.5, 0.0, 0.0, 0.0)
        u1, _ = planner.plan(state, field)
        assert planner.previous_input == u1
        u2, _ = planner.plan(state, field)
        assert np.isfinite(u2.thrust)

    def test_empty_field_with_guidance_override(self, planner_cfg):
        empty = ParticleField(np.empty((0, 2)), 100)
        state = State(1.2, 1.0, 0.8, 0.0, 0.0, 0.0)
        u, report, _ = plan_step(state, empty, planner_cfg,
                                 guidance_override=(2.0, 1.5))
        assert np.isfinite(report.fun)
        lim = planner_cfg.limits
        assert lim.thrust[0] <= u.thrust <= lim.thrust[1]


class TestRollout:
    def test_infeasible_on_horizon_ray(self, planner_cfg, field):
        cam = CameraIntrinsics(2.9, 2.9)
        cfg = planner_cfg
        from dataclasses import replace
        cfg = replace(cfg, camera=cam, objective_footprint_scale=1.0)
        state = State(1.0, 1.0, 0.5, 0.0, 0.0, 0.0)
        controls = [ControlInput(cfg.vehicle.hover_thrust, 0.0, 0.31, 0.0)
                    for _ in range(cfg.horizon)]
        plan = rollout(state, field, controls, cfg)
        assert plan.infeasible and plan.total_cost == np.inf

    def test_states_and_cells_lengths(self, planner_cfg, field):
        state = State(1.0, 1.0, 0.5, 0.0, 0.0, 0.0)
        controls = [planner_cfg.hover_input()] * planner_cfg.horizon
        plan = rollout(state, field, controls, planner_cfg)
        assert len(plan.states) == planner_cfg.horizon + 1
        assert len(plan.cells) == planner_cfg.horizon
        assert len(plan.stage_costs) == planner_cfg.horizon
