"""Receding-horizon particle-harvesting planner.

The mission loop samples the target polygon with particles, removes the ones
seen by each camera footprint, and at every step solves a finite-horizon
optimal control problem over thrust and attitude commands. The exact
particle count is piecewise constant in the controls, so the solver minimizes
a logistic-edge surrogate while the actual harvesting stays exact.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _fastpath
from .errors import RayHorizonError, SolverFailure
from .geometry import (Attitude, CameraIntrinsics, FootprintCell,
                       points_in_polygon, project_footprint, sample_uniform)
from .quality import QualityBand, corrected_distance, coverage_quality
from .solver import NlpProblem, SolveOptions, SolveReport, minimize
from .vehicle import (ActuationLimits, ControlInput, State, VehicleParams,
                      clamp_input, step)


@dataclass(frozen=True)
class ParticleField:
    """Uncovered sample points of the target polygon; shrinks monotonically."""

    points: np.ndarray
    initial_count: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        pts.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    @staticmethod
    def from_polygon(poly, n: int, seed: int) -> "ParticleField":
        return ParticleField(sample_uniform(poly, n, seed), n)


@dataclass(frozen=True)
class CostWeights:
    movement: float = 0.1        # squared state change
    coverage: float = 1.0        # remaining particle count
    quality: float = 0.5         # image quality bonus
    smoothness: float = 1.0      # squared input change
    altitude_floor: float = 50.0  # soft minimum-altitude penalty

    def __post_init__(self):
        for name in ("movement", "coverage", "quality", "smoothness",
                     "altitude_floor"):
            if getattr(self, name) < 0:
                raise ValueError(f"weight {name} must be nonnegative")


@dataclass(frozen=True)
class CoverageSurrogateParams:
    """Logistic smoothing of the harvested-particle count."""

    sharpness: float = 50.0  # 1/m; larger is closer to the exact count
    exact: bool = False

    def __post_init__(self):
        if self.sharpness <= 0:
            raise ValueError("sharpness must be positive")


@dataclass
class HorizonPlan:
    controls: list[ControlInput]
    states: list[State]            # length N + 1, states[0] is the start
    cells: list[Optional[FootprintCell]]
    stage_costs: list[float]
    total_cost: float
    infeasible: bool = False


@dataclass(frozen=True)
class PlannerConfig:
    camera: CameraIntrinsics
    vehicle: VehicleParams
    limits: ActuationLimits
    weights: CostWeights = CostWeights()
    band: QualityBand = QualityBand(0.2, 1.0)
    surrogate: CoverageSurrogateParams = CoverageSurrogateParams()
    horizon: int = 8
    dt: float = 0.1
    guidance_weight: float = 2.0
    # Damps terminal horizontal velocity when a guidance anchor is active so
    # the vehicle does not overshoot the anchor with built-up momentum.
    guidance_velocity_weight: float = 0.5
    altitude_anchor_weight: float = 3.0
    objective_footprint_scale: float = 0.6
    # Hold heading at zero. With a square field of view, yaw adds nothing to
    # coverage and a free heading lets the solver skew consecutive cells.
    fix_yaw: bool = True
    # Attitude-magnitude penalty (roll^2 + pitch^2 per stage). Keeps the
    # commanded cells near nadir so consecutive footprints overlap instead
    # of harvesting with skewed far-reaching quads.
    attitude_weight: float = 0.0
    # Score coverage with the level-attitude cell (yaw kept, roll and pitch
    # zeroed). The applied footprint still tilts with the vehicle.
    level_scoring: bool = False
    # Multiplies the coverage weight. The particle sum estimates remaining
    # area, so the per-particle weight is scaled with 1/n to make the
    # planner's behavior independent of the sampling density.
    coverage_scale: float = 1.0
    solve_options: SolveOptions = field(default_factory=SolveOptions)

    @property
    def zp_max(self) -> float:
        """Corrected-distance cap: the top of the quality band, so tilting at
        the altitude ceiling cannot stretch the viewing distance past the
        range the quality model is defined on."""
        return self.band.z_max

    def hover_input(self) -> ControlInput:
        return ControlInput(self.vehicle.hover_thrust, 0.0, 0.0, 0.0)


def harvest(field: ParticleField, cell: FootprintCell):
    """Remove the particles inside ``cell``; returns (new field, count removed)."""
    if len(field) == 0:
        return field, 0
    inside = points_in_polygon(field.points, cell.vertices)
    count = int(np.count_nonzero(inside))
    if count == 0:
        return field, 0
    return ParticleField(field.points[~inside], field.initial_count), count


def remaining_term(field: ParticleField, cell: FootprintCell) -> int:
    """Exact count of particles left uncovered by the candidate cell."""
    if len(field) == 0:
        return 0
    inside = points_in_polygon(field.points, cell.vertices)
    return int(len(field) - np.count_nonzero(inside))


def _inside_scores(points: np.ndarray, cell: FootprintCell,
                   kappa: float) -> np.ndarray:
    """Per-point product of logistic edge factors; ~1 inside, ~0 outside."""
    v = cell.vertices
    nxt = np.roll(v, -1, axis=0)
    ex = nxt[:, 0] - v[:, 0]
    ey = nxt[:, 1] - v[:, 1]
    lens = np.hypot(ex, ey)
    area2 = float(np.sum(v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]))
    sgn = 1.0 if area2 > 0 else -1.0
    d = sgn * (ex[None, :] * (points[:, 1:2] - v[None, :, 1])
               - ey[None, :] * (points[:, 0:1] - v[None, :, 0])) / lens[None, :]
    t = np.clip(kappa * d, -36.0, 36.0)
    return np.prod(1.0 / (1.0 + np.exp(-t)), axis=1)


def smooth_remaining_term(field: ParticleField, cell: FootprintCell,
                          params: CoverageSurrogateParams) -> float:
    """Differentiable surrogate for :func:`remaining_term`.

    Each particle contributes the product over cell edges of
    sigmoid(sharpness * signed inward distance); the summed scores are
    subtracted from the field size. Converges to the exact count as the
    sharpness grows.
    """
    if params.exact:
        return float(remaining_term(field, cell))
    if len(field) == 0:
        return 0.0
    scores = _inside_scores(field.points, cell, params.sharpness)
    return float(len(field) - scores.sum())


def stage_cost(prev_state: State, state: State, prev_u: ControlInput,
               u: ControlInput, field: ParticleField, cell: FootprintCell,
               weights: CostWeights, band: QualityBand,
               surrogate: Optional[CoverageSurrogateParams] = None) -> float:
    """One stage of the horizon cost.

    Movement and smoothness are squared norms of the state/input changes; the
    coverage term is the (exact or surrogate) particle count left uncovered by
    ``cell``; quality is evaluated at the pre-step altitude with the commanded
    attitude; the soft altitude floor applies to the post-step altitude.
    """
    if surrogate is not None and not surrogate.exact:
        remaining = smooth_remaining_term(field, cell, surrogate)
    else:
        remaining = float(remaining_term(field, cell))
    dx = state.to_array() - prev_state.to_array()
    du = u.to_array() - prev_u.to_array()
    zp = corrected_distance(prev_state.z, u.roll, u.pitch)
    q = coverage_quality(zp, band)
    floor = max(band.z_min - state.z, 0.0)
    return (weights.movement * float(dx @ dx)
            + weights.coverage * remaining
            - weights.quality * q
            + weights.smoothness * float(du @ du)
            + weights.altitude_floor * floor)


def _scoring_camera(cfg: PlannerConfig) -> CameraIntrinsics:
    """Camera whose half-angle tangents are shrunk by the objective
    footprint scale; used only to score coverage inside the horizon."""
    s = cfg.objective_footprint_scale
    if s == 1.0:
        return cfg.camera
    return CameraIntrinsics(
        hfov=2.0 * math.atan(s * math.tan(cfg.camera.hfov / 2.0)),
        vfov=2.0 * math.atan(s * math.tan(cfg.camera.vfov / 2.0)))


def rollout(state: State, field: ParticleField,
            controls: Sequence[ControlInput], cfg: PlannerConfig,
            prev_input: Optional[ControlInput] = None) -> HorizonPlan:
    """Propagate the dynamics over a control sequence, harvesting a
    horizon-local copy of the field stage by stage, and accumulate the cost.

    A corner ray above the horizon marks the plan infeasible (cost +inf).
    """
    prev_u = prev_input if prev_input is not None else cfg.hover_input()
    weights = np.ones(len(field))
    states = [state]
    cells: list[Optional[FootprintCell]] = []
    stage_costs: list[float] = []
    total = 0.0
    cur = state
    for u in controls:
        try:
            cell = project_footprint(
                (cur.x, cur.y, max(cur.z, 1e-9)),
                Attitude(u.roll, u.pitch, u.yaw), cfg.camera)
        except RayHorizonError:
            return HorizonPlan(list(controls), states, cells, stage_costs,
                               math.inf, infeasible=True)
        score_att = (Attitude(0.0, 0.0, u.yaw) if cfg.level_scoring
                     else Attitude(u.roll, u.pitch, u.yaw))
        score_cell = project_footprint(
            (cur.x, cur.y, max(cur.z, 1e-9)), score_att,
            _scoring_camera(cfg))
        if len(field) > 0:
            if cfg.surrogate.exact:
                scores = points_in_polygon(field.points, score_cell.vertices)
                scores = scores.astype(float)
            else:
                scores = _inside_scores(field.points, score_cell,
                                        cfg.surrogate.sharpness)
            covered = float(np.sum(weights * scores))
            weights = weights * (1.0 - scores)
            remaining = float(weights.sum())
        else:
            covered, remaining = 0.0, 0.0

        nxt = step(cur, u, cfg.vehicle, cfg.dt)
        dx = nxt.to_array() - cur.to_array()
        du = u.to_array() - prev_u.to_array()
        zp = corrected_distance(cur.z, u.roll, u.pitch)
        q = coverage_quality(zp, cfg.band)
        floor = max(cfg.band.z_min - nxt.z, 0.0)
        c = (cfg.weights.movement * float(dx @ dx)
             + cfg.weights.coverage * cfg.coverage_scale * remaining
             - cfg.weights.quality * q
             + cfg.weights.smoothness * float(du @ du)
             + cfg.weights.altitude_floor * floor
             + cfg.attitude_weight * (u.roll ** 2 + u.pitch ** 2))
        total += c
        stage_costs.append(c)
        cells.append(cell)
        states.append(nxt)
        cur = nxt
        prev_u = u
    return HorizonPlan(list(controls), states, cells, stage_costs, total)


# Radius of the local particle cluster the guidance anchor averages over.
_CLUSTER_RADIUS = 0.5
# Travel-distance discount in the rim score: larger values prefer pockets
# closer to the vehicle over the farthest point of the remaining set.
_RIM_DISCOUNT = 1.0


def _stack_bounds(cfg: PlannerConfig):
    lo = np.array([cfg.limits.thrust[0], cfg.limits.roll[0],
                   cfg.limits.pitch[0], cfg.limits.yaw[0]])
    hi = np.array([cfg.limits.thrust[1], cfg.limits.roll[1],
                   cfg.limits.pitch[1], cfg.limits.yaw[1]])
    if cfg.fix_yaw:
        # The square field of view makes yaw redundant for coverage; leaving
        # it free lets the solver skew consecutive cells against each other,
        # which fragments the covered union. Heading is held at zero.
        lo[3] = 0.0
        hi[3] = 0.0
    return np.tile(lo, cfg.horizon), np.tile(hi, cfg.horizon)


def _reach_radius(cfg: PlannerConfig) -> float:
    vmax = max(abs(cfg.limits.velocity[0]), abs(cfg.limits.velocity[1]))
    half_diag = cfg.zp_max * math.hypot(math.tan(cfg.camera.hfov / 2.0),
                                        math.tan(cfg.camera.vfov / 2.0))
    return (cfg.horizon * cfg.dt * vmax * 1.5 + half_diag
            + 5.0 / cfg.surrogate.sharpness + 0.5)


class _KernelObjective:
    """Caching wrapper around the compiled objective so the cost callable and
    the constraint callable share one evaluation per probe point."""

    def __init__(self, x0: np.ndarray, prev_u: np.ndarray, pts: np.ndarray,
                 cfg: PlannerConfig, guidance, guidance_weight: float):
        self._x0 = x0
        self._prev_u = prev_u
        self._pts = pts
        self._fd_step = cfg.solve_options.fd_step
        gx, gy, gz = guidance if guidance is not None else (0.0, 0.0, 0.0)
        vmax = max(abs(cfg.limits.velocity[0]), abs(cfg.limits.velocity[1]))
        p = np.zeros(_fastpath.P_SIZE)
        p[_fastpath.P_KAPPA] = cfg.surrogate.sharpness
        p[_fastpath.P_W_MOVE] = cfg.weights.movement
        p[_fastpath.P_W_COV] = cfg.weights.coverage * cfg.coverage_scale
        p[_fastpath.P_ATT_W] = cfg.attitude_weight
        p[_fastpath.P_LEVEL] = 1.0 if cfg.level_scoring else 0.0
        p[_fastpath.P_W_Q] = cfg.weights.quality
        p[_fastpath.P_W_U] = cfg.weights.smoothness
        p[_fastpath.P_W_FLOOR] = cfg.weights.altitude_floor
        p[_fastpath.P_BAND_LO] = cfg.band.z_min
        p[_fastpath.P_BAND_HI] = cfg.band.z_max
        # The objective sees a shrunk footprint so that predicted captures
        # require a centred pass; the applied harvest uses the full cell.
        p[_fastpath.P_TAN_A] = math.tan(cfg.camera.hfov / 2.0) * cfg.objective_footprint_scale
        p[_fastpath.P_TAN_B] = math.tan(cfg.camera.vfov / 2.0) * cfg.objective_footprint_scale
        p[_fastpath.P_MASS] = cfg.vehicle.mass
        p[_fastpath.P_GRAV] = cfg.vehicle.gravity
        p[_fastpath.P_DT] = cfg.dt
        p[_fastpath.P_V_LIM] = vmax
        p[_fastpath.P_ALT_LO] = cfg.limits.altitude[0]
        p[_fastpath.P_ALT_HI] = cfg.limits.altitude[1]
        p[_fastpath.P_ZP_MAX] = cfg.zp_max
        p[_fastpath.P_GUID_X] = float(gx)
        p[_fastpath.P_GUID_Y] = float(gy)
        p[_fastpath.P_GUID_Z] = float(gz)
        p[_fastpath.P_GUID_W] = (guidance_weight if guidance is not None
                                 else 0.0)
        p[_fastpath.P_GUID_VW] = cfg.guidance_velocity_weight
        p[_fastpath.P_ANCHOR_W] = (cfg.altitude_anchor_weight
                                   if guidance is not None else 0.0)
        self._params = p
        self._key = None
        self._val = None

    def _eval(self, u: np.ndarray):
        key = u.tobytes()
        if key != self._key:
            self._val = _fastpath.horizon_objective(
                np.ascontiguousarray(u, dtype=float), self._x0, self._prev_u,
                self._pts, self._params)
            self._key = key
        return self._val

    def objective(self, u: np.ndarray) -> float:
        return float(self._eval(u)[0])

    def inequality(self, u: np.ndarray) -> np.ndarray:
        return self._eval(u)[1]

    def penalized_value_and_grad(self, u: np.ndarray, mu: float):
        p = self._params.copy()
        p[_fastpath.P_MU] = mu
        return _fastpath.penalized_value_and_grad(
            np.ascontiguousarray(u, dtype=float), self._fd_step,
            self._x0, self._prev_u, self._pts, p)


def plan_step(estimate: State, field: ParticleField, cfg: PlannerConfig,
              warm: Optional[np.ndarray] = None,
              prev_input: Optional[ControlInput] = None,
              guidance_override: Optional[tuple] = None):
    """Solve the horizon problem from the state estimate and return the first
    control of the optimal sequence plus the solve report and full solution.

    ``warm`` is the shifted previous solution; a hover sequence is also tried
    and the better of the two seeds the solver. On solver failure the last
    feasible warm-start input is returned flagged.
    """
    prev_u = prev_input if prev_input is not None else cfg.hover_input()
    opts = cfg.solve_options
    if cfg.horizon > 8:
        # The iteration budget is sized for horizons up to 8 stages; longer
        # horizons need more quasi-Newton iterations per round because both
        # the variable count and the coupling depth grow with the horizon.
        opts = replace(opts, maxiter=math.ceil(
            opts.maxiter * (cfg.horizon / 8.0) ** 2))
    lo, hi = _stack_bounds(cfg)
    hover_seq = np.tile(cfg.hover_input().to_array(), cfg.horizon)
    hover_seq = np.clip(hover_seq, lo, hi)

    pts = field.points
    alt_ref = min(cfg.limits.altitude[1], cfg.band.z_max)
    guidance = None
    if len(field) > 0:
        # Anchor the end of the horizon over the local centroid of an
        # outlying particle cluster, at the top of the quality band where
        # the footprint is widest. Targeting the rim of the remaining set
        # (particles far from its centroid, discounted by the travel
        # distance) clears the boundary first; interior particles fall to
        # the footprint on the way, while the reverse order would strand
        # boundary pockets.
        d2 = ((pts[:, 0] - estimate.x) ** 2 + (pts[:, 1] - estimate.y) ** 2)
        ctr = pts.mean(axis=0)
        rim = (((pts[:, 0] - ctr[0]) ** 2 + (pts[:, 1] - ctr[1]) ** 2)
               - _RIM_DISCOUNT * d2)
        target = pts[np.argmax(rim)]
        cluster = pts[((pts[:, 0] - target[0]) ** 2
                       + (pts[:, 1] - target[1]) ** 2) <= _CLUSTER_RADIUS ** 2]
        guidance = (float(cluster[:, 0].mean()),
                    float(cluster[:, 1].mean()), alt_ref)
        reach = _reach_radius(cfg)
        near = d2 <= reach * reach
        pts = pts[near]
    elif guidance_override is not None:
        guidance = (float(guidance_override[0]), float(guidance_override[1]),
                    alt_ref)
    pts = np.ascontiguousarray(pts, dtype=float)

    kern = _KernelObjective(estimate.to_array(), prev_u.to_array(), pts, cfg,
                            guidance, cfg.guidance_weight)
    candidates = [hover_seq]
    if warm is not None:
        candidates.append(np.clip(np.asarray(warm, dtype=float), lo, hi))
    x0 = min(candidates, key=kern.objective)

    problem = NlpProblem(objective=kern.objective, lower=lo, upper=hi, x0=x0,
                         inequality=kern.inequality,
                         penalized_value_and_grad=kern.penalized_value_and_grad)
    try:
        report = minimize(problem, opts)
    except Exception as exc:  # noqa: BLE001 - downgraded to a flagged step
        fallback = clamp_input(prev_u, cfg.limits)
        report = SolveReport(x=x0, fun=math.inf, iterations=0, converged=False,
                             max_violation=math.inf, flagged=True)
        return fallback, report, x0
    u = clamp_input(ControlInput.from_array(report.x[:4]), cfg.limits)
    return u, report, report.x


class ParticleHarvestPlanner:
    """Stateful receding-horizon planner: keeps the shifted previous solution
    as the warm start and the previously applied input for smoothness."""

    def __init__(self, cfg: PlannerConfig):
        self.cfg = cfg
        self._warm: Optional[np.ndarray] = None
        self._prev_u: ControlInput = cfg.hover_input()

    @property
    def previous_input(self) -> ControlInput:
        return self._prev_u

    def plan(self, estimate: State, field: ParticleField,
             guidance_override: Optional[tuple] = None):
        u, report, x = plan_step(estimate, field, self.cfg,
                                 warm=self._warm, prev_input=self._prev_u,
                                 guidance_override=guidance_override)
        self._warm = np.concatenate([x[4:], x[-4:]])
        self._prev_u = u
        return u, report
