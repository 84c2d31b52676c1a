"""Box-constrained nonlinear minimization for the horizon cost.

Projected quasi-Newton (L-BFGS-B) over the input box, with any
nonlinear inequality constraints handled by an exterior quadratic penalty
escalated over a few rounds. Gradients come from central finite differences
since the objective is only available through a simulation rollout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .errors import NonFiniteObjective


@dataclass
class NlpProblem:
    """minimize objective(x) s.t. lower <= x <= upper, inequality(x) <= 0."""

    objective: Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray
    x0: np.ndarray
    inequality: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # Optional fused hook (x, mu) -> (penalized value, gradient); when set it
    # replaces the finite-difference loop over `objective` during the solve.
    penalized_value_and_grad: Optional[Callable] = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.x0 = np.asarray(self.x0, dtype=float)
        if np.any(self.x0 < self.lower) or np.any(self.x0 > self.upper):
            raise ValueError("initial point violates box bounds")


@dataclass
class SolveOptions:
    maxiter: int = 13          # L-BFGS-B iterations per penalty round
    penalty_rounds: int = 3
    penalty_mu0: float = 100.0
    penalty_growth: float = 10.0
    constraint_tol: float = 1e-6
    fd_step: float = 1e-6      # relative finite-difference step
    gtol: float = 1e-7
    ftol: float = 1e-12


@dataclass
class SolveReport:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    max_violation: float
    flagged: bool = field(default=False)


def gradient(objective: Callable[[np.ndarray], float], point: np.ndarray,
             h: float) -> np.ndarray:
    """Central finite-difference gradient with per-component step
    h * max(1, |x_i|)."""
    if h <= 0:
        raise ValueError(f"step h must be positive, got {h}")
    x = np.asarray(point, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        hi = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        fp = objective(xp)
        fm = objective(xm)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NonFiniteObjective(f"non-finite objective probing component {i}")
        g[i] = (fp - fm) / (2.0 * hi)
    return g


def _max_violation(problem: NlpProblem, x: np.ndarray) -> float:
    if problem.inequality is None:
        return 0.0
    g = np.asarray(problem.inequality(x), dtype=float)
    if g.size == 0:
        return 0.0
    return float(max(0.0, g.max()))


def minimize(problem: NlpProblem, opts: SolveOptions | None = None) -> SolveReport:
    """Solve the problem; deterministic given identical inputs.

    Always reports a point no worse than the initial one: candidate iterates
    from every penalty round plus the initial point are compared by
    (feasibility, objective) and the best is returned.
    """
    opts = opts or SolveOptions()
    x0 = np.clip(problem.x0, problem.lower, problem.upper)
    f0 = problem.objective(x0)
    if not math.isfinite(f0):
        raise NonFiniteObjective("objective not finite at the initial point")

    bounds = list(zip(problem.lower, problem.upper))
    tol = opts.constraint_tol

    def penalized(x, mu):
        f = problem.objective(x)
        if problem.inequality is not None and mu > 0.0:
            g = np.asarray(problem.inequality(x), dtype=float)
            f = f + mu * float(np.sum(np.square(np.maximum(g, 0.0))))
        return f

    candidates = [(x0, f0, _max_violation(problem, x0))]
    total_iters = 0
    hit_maxiter = False

    if problem.inequality is None:
        schedule = [0.0]
        round_iters = opts.maxiter * opts.penalty_rounds
    else:
        schedule = [opts.penalty_mu0 * opts.penalty_growth ** k
                    for k in range(opts.penalty_rounds)]
        round_iters = opts.maxiter

    x = x0
    for mu in schedule:
        def fun_and_grad(xq, _mu=mu):
            if problem.penalized_value_and_grad is not None:
                f, g = problem.penalized_value_and_grad(xq, _mu)
                if not math.isfinite(f):
                    return 1e30, np.zeros_like(xq)
                return f, g
            f = penalized(xq, _mu)
            if not math.isfinite(f):
                # Steer the line search away instead of crashing the solve.
                return 1e30, np.zeros_like(xq)
            g = gradient(lambda xx: penalized(xx, _mu), xq, opts.fd_step)
            return f, g

        res = _scipy_minimize(
            fun_and_grad, x, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": round_iters, "ftol": opts.ftol,
                     "gtol": opts.gtol},
        )
        total_iters += int(res.nit)
        hit_maxiter = hit_maxiter or int(res.nit) >= round_iters
        x = np.clip(res.x, problem.lower, problem.upper)
        fx = problem.objective(x)
        vx = _max_violation(problem, x)
        if math.isfinite(fx):
            candidates.append((x, fx, vx))
        if vx <= tol and len(schedule) > 1:
            # Feasible already; further escalation cannot improve.
            break

    feasible = [c for c in candidates if c[2] <= tol]
    if feasible:
        best = min(feasible, key=lambda c: (c[1], c[2]))
    else:
        # Nothing feasible: prefer the least-infeasible iterate so the
        # closed loop steers back toward the constraint set.
        best = min(candidates, key=lambda c: (c[2], c[1]))
    converged = best[2] <= tol
    return SolveReport(x=best[0], fun=best[1], iterations=total_iters,
                       converged=converged, max_violation=best[2],
                       flagged=hit_maxiter)
