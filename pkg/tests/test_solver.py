import numpy as np
import pytest

from particlecover import (ControlInput, NlpProblem, ParticleField,
                           Polygon2D, SolveOptions, State, gradient, minimize,
                           rollout)
from particlecover.errors import NonFiniteObjective


def quad_problem(center, lower, upper, x0=None):
    c = np.asarray(center, dtype=float)

    def f(x):
        d = x - c
        return float(d @ d)

    return NlpProblem(objective=f, lower=np.asarray(lower, dtype=float),
                      upper=np.asarray(upper, dtype=float),
                      x0=np.zeros(len(c)) if x0 is None else x0)


class TestBoxQuadratics:
    def test_interior_optimum(self):
        p = quad_problem([0.3, -0.2, 0.5], [-1, -1, -1], [1, 1, 1])
        rep = minimize(p, SolveOptions(maxiter=200))
        np.testing.assert_allclose(rep.x, [0.3, -0.2, 0.5], atol=1e-6)

    def test_projected_optima_random(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n = rng.integers(2, 8)
            center = rng.uniform(-3, 3, size=n)
            lo = rng.uniform(-1.5, -0.5, size=n)
            hi = rng.uniform(0.5, 1.5, size=n)
            p = quad_problem(center, lo, hi, x0=0.5 * (lo + hi))
            rep = minimize(p, SolveOptions(maxiter=300))
            np.testing.assert_allclose(rep.x, np.clip(center, lo, hi),
                                       atol=1e-6)

    def test_never_worse_than_start(self):
        p = quad_problem([10.0, 10.0], [-1, -1], [1, 1], x0=np.array([1.0, 1.0]))
        rep = minimize(p, SolveOptions(maxiter=1))
        assert rep.fun <= p.objective(np.array([1.0, 1.0])) + 1e-12


class TestInequalities:
    def test_active_constraint_on_boundary(self):
        # min (x-2)^2 s.t. x <= 1: optimum at x = 1.
        p = NlpProblem(objective=lambda x: float((x[0] - 2.0) ** 2),
                       lower=np.array([-5.0]), upper=np.array([5.0]),
                       x0=np.array([0.0]),
                       inequality=lambda x: np.array([x[0] - 1.0]))
        rep = minimize(p, SolveOptions(maxiter=200, penalty_rounds=5))
        assert rep.x[0] == pytest.approx(1.0, abs=2e-3)
        assert rep.max_violation <= 1e-6
        assert rep.converged

    def test_infeasible_start_recovers(self):
        # Start deep in the infeasible region; the escalating penalty must
        # drive the iterate to the constraint boundary.
        p = NlpProblem(objective=lambda x: float(x[0] ** 2),
                       lower=np.array([0.0]), upper=np.array([5.0]),
                       x0=np.array([0.0]),
                       inequality=lambda x: np.array([3.0 - x[0]]))
        rep = minimize(p, SolveOptions(maxiter=200, penalty_rounds=5))
        assert rep.x[0] == pytest.approx(3.0, abs=1e-3)
        assert rep.max_violation < 1e-3

    def test_feasible_start_never_traded_for_violation(self):
        # A feasible initial point must not be replaced by an infeasible
        # iterate, even one with a lower raw objective.
        p = NlpProblem(objective=lambda x: float(x[0] ** 2),
                       lower=np.array([2.0]), upper=np.array([5.0]),
                       x0=np.array([5.0]),
                       inequality=lambda x: np.array([3.0 - x[0]]))
        rep = minimize(p, SolveOptions(maxiter=200, penalty_rounds=5))
        assert rep.max_violation <= 1e-6
        assert rep.fun <= 25.0 + 1e-9


class TestGradient:
    def test_analytic_quadratic(self):
        def f(x):
            return float(x[0] ** 2 + 3.0 * x[1] ** 2)

        g = gradient(f, np.array([1.0, -2.0]), 1e-6)
        np.testing.assert_allclose(g, [2.0, -12.0], atol=1e-6)

    def test_nonfinite_raises(self):
        def f(x):
            return float("nan")

        with pytest.raises(NonFiniteObjective):
            gradient(f, np.array([0.0]), 1e-6)

    def test_richardson_on_rollout_objective(self, planner_cfg):
        # Central differences have O(h^2) truncation error; halving the step
        # must shrink the error against a fine-step reference by ~4x.
        poly = Polygon2D(np.array([[0, 0], [2.5, 0], [2.5, 2], [0, 2]],
                                  dtype=float))
        field = ParticleField.from_polygon(poly, 30, seed=6)
        state = State(1.2, 0.9, 0.6, 0.1, -0.1, 0.05)
        hover = planner_cfg.vehicle.hover_thrust
        base = np.tile([hover, 0.05, -0.04, 0.0], planner_cfg.horizon)

        def f(u):
            controls = [ControlInput.from_array(u[4 * j:4 * j + 4])
                        for j in range(planner_cfg.horizon)]
            return rollout(state, field, controls, planner_cfg).total_cost

        ref = gradient(f, base, 1e-5)
        e1 = np.linalg.norm(gradient(f, base, 4e-3) - ref)
        e2 = np.linalg.norm(gradient(f, base, 2e-3) - ref)
        assert 2.5 < e1 / e2 < 6.0


class TestValidation:
    def test_x0_outside_box_rejected(self):
        with pytest.raises(ValueError):
            NlpProblem(objective=lambda x: 0.0, lower=np.array([0.0]),
                       upper=np.array([1.0]), x0=np.array([2.0]))

    def test_nonfinite_start_rejected(self):
        p = NlpProblem(objective=lambda x: float("inf"),
                       lower=np.array([0.0]), upper=np.array([1.0]),
                       x0=np.array([0.5]))
        with pytest.raises(NonFiniteObjective):
            minimize(p, SolveOptions())
