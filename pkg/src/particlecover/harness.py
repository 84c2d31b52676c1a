"""Scenario ingestion, the grid-sweep baseline planner, coverage metrics,
trace/metrics file I/O and figure rendering.

File formats: scenarios and metrics are YAML documents, traces are CSV tables
with a fixed column order (see TRACE_COLUMNS), renderings are SVG.
"""

from __future__ import annotations

import csv
import math
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import IoError, ParseError, ValidationError
from .geometry import (CameraIntrinsics, FootprintCell, Polygon2D,
                       points_in_polygon, polygon_area)
from .mission import (Metrics, MissionTrace, NoiseModel, Scenario,
                      run_mission)
from .planner import (CostWeights, CoverageSurrogateParams, ParticleField,
                      harvest)
from .quality import QualityBand
from .solver import SolveOptions
from .vehicle import ActuationLimits, ControlInput, State, VehicleParams

RASTER_RESOLUTION = 0.01  # m
RENDER_CELL_STRIDE = 5

TRACE_COLUMNS = (
    ["step"]
    + [f"true_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")]
    + [f"est_{c}" for c in ("x", "y", "z", "vx", "vy", "vz")]
    + ["thrust", "roll", "pitch", "yaw"]
    + [f"cell_{i}{c}" for i in range(1, 5) for c in ("x", "y")]
    + ["remaining", "solve_time"]
)


# ---------------------------------------------------------------------------
# Scenario files


def _require(data: dict, key: str):
    if key not in data:
        raise ValidationError(key, "required field missing")
    return data[key]


def _pair(data, key) -> tuple[float, float]:
    v = data
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ValidationError(key, "expected a [low, high] pair")
    return float(v[0]), float(v[1])


def _build_scenario(data: dict, name: str) -> Scenario:
    if not isinstance(data, dict):
        raise ValidationError("document", "scenario file must be a mapping")

    poly_raw = _require(data, "polygon")
    try:
        polygon = Polygon2D(np.asarray(poly_raw, dtype=float))
    except (ValueError, TypeError) as exc:
        raise ValidationError("polygon", str(exc)) from exc

    cam_raw = _require(data, "camera")
    try:
        camera = CameraIntrinsics(float(_require(cam_raw, "hfov")),
                                  float(_require(cam_raw, "vfov")))
    except ValueError as exc:
        raise ValidationError("camera", str(exc)) from exc

    veh = data.get("vehicle", {})
    try:
        vehicle = VehicleParams(mass=float(veh.get("mass", 3.3)),
                                gravity=float(veh.get("gravity", 9.81)))
    except ValueError as exc:
        raise ValidationError("vehicle", str(exc)) from exc

    lim = data.get("limits", {})
    try:
        limits = ActuationLimits(
            thrust=_pair(lim.get("thrust", [0.0, 50.0]), "limits.thrust"),
            roll=_pair(lim.get("roll", [-math.pi / 10, math.pi / 10]),
                       "limits.roll"),
            pitch=_pair(lim.get("pitch", [-math.pi / 10, math.pi / 10]),
                        "limits.pitch"),
            yaw=_pair(lim.get("yaw", [-math.pi, math.pi]), "limits.yaw"),
            velocity=_pair(lim.get("velocity", [-2.0, 2.0]),
                           "limits.velocity"),
            altitude=_pair(lim.get("altitude", [0.0, 1.0]),
                           "limits.altitude"),
        )
    except ValueError as exc:
        raise ValidationError("limits", str(exc)) from exc

    w = data.get("weights", {})
    try:
        weights = CostWeights(
            movement=float(w.get("movement", 0.1)),
            coverage=float(w.get("coverage", 1.0)),
            quality=float(w.get("quality", 0.5)),
            smoothness=float(w.get("smoothness", 1.0)),
            altitude_floor=float(w.get("altitude_floor", 50.0)))
    except ValueError as exc:
        raise ValidationError("weights", str(exc)) from exc

    qb = data.get("quality_band", {})
    try:
        band = QualityBand(float(qb.get("z_min", 0.2)),
                           float(qb.get("z_max", 1.0)))
    except ValueError as exc:
        raise ValidationError("quality_band", str(exc)) from exc

    sur = data.get("surrogate", {})
    try:
        surrogate = CoverageSurrogateParams(
            sharpness=float(sur.get("sharpness", 50.0)),
            exact=bool(sur.get("exact", False)))
    except ValueError as exc:
        raise ValidationError("surrogate", str(exc)) from exc

    nz = data.get("noise", {})
    noise = NoiseModel(enabled=bool(nz.get("enabled", True)),
                       position_sigma=float(nz.get("position_sigma", 0.03)),
                       thrust_bound=float(nz.get("thrust_bound", 1.0)))

    seeds = data.get("seeds", {})
    init = data.get("initial", {})
    pos = init.get("position", [1.0, -0.8, 0.0])
    vel = init.get("velocity", [0.0, 0.0, 0.0])
    if len(pos) != 3 or len(vel) != 3:
        raise ValidationError("initial", "position and velocity need 3 entries")
    initial = State(float(pos[0]), float(pos[1]), float(pos[2]),
                    float(vel[0]), float(vel[1]), float(vel[2]))

    sol = data.get("solver", {})
    solve_options = SolveOptions(
        maxiter=int(sol.get("maxiter", 13)),
        penalty_rounds=int(sol.get("penalty_rounds", 3)),
        penalty_mu0=float(sol.get("penalty_mu0", 100.0)),
        fd_step=float(sol.get("fd_step", 1e-6)))

    try:
        return Scenario(
            name=str(data.get("name", name)),
            polygon=polygon, camera=camera, vehicle=vehicle, limits=limits,
            weights=weights, band=band, surrogate=surrogate, noise=noise,
            horizon=int(data.get("horizon", 8)),
            dt=float(data.get("dt", 0.1)),
            particles=int(data.get("particles", 500)),
            seed_sampling=int(seeds.get("sampling", 1)),
            seed_noise=int(seeds.get("noise", 2)),
            initial_state=initial,
            step_cap=int(data.get("step_cap", 10000)),
            guidance_weight=float(data.get("guidance_weight", 2.0)),
            solve_options=solve_options)
    except ValueError as exc:
        raise ValidationError("scenario", str(exc)) from exc


def load_scenario(path) -> Scenario:
    """Load and validate a scenario YAML file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path}: {exc}") from exc
    return _build_scenario(data, name=path.stem)


def bundled_scenario(name: str) -> Scenario:
    """Load one of the packaged scenarios: case1, case2 or case3."""
    ref = resources.files("particlecover") / "scenarios" / f"{name}.yaml"
    if not ref.is_file():
        raise ParseError(f"no bundled scenario named {name!r}")
    data = yaml.safe_load(ref.read_text())
    return _build_scenario(data, name=name)


def resolve_scenario(spec: str) -> Scenario:
    """Interpret ``spec`` as a file path or a bundled scenario name."""
    p = Path(spec)
    if p.exists():
        return load_scenario(p)
    return bundled_scenario(spec)


# ---------------------------------------------------------------------------
# Coverage oracle and overlap metric


def _inside_convex(points: np.ndarray, cell: FootprintCell) -> np.ndarray:
    v = cell.vertices
    nxt = np.roll(v, -1, axis=0)
    ex = nxt[:, 0] - v[:, 0]
    ey = nxt[:, 1] - v[:, 1]
    area2 = float(np.sum(v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]))
    sgn = 1.0 if area2 > 0 else -1.0
    d = sgn * (ex[None, :] * (points[:, 1:2] - v[None, :, 1])
               - ey[None, :] * (points[:, 0:1] - v[None, :, 0]))
    return np.all(d >= 0.0, axis=1)


def raster_grid(polygon: Polygon2D, resolution: float = RASTER_RESOLUTION):
    """Cell-center grid points of the polygon interior at the given pitch."""
    xmin, xmax, ymin, ymax = polygon.bounding_box()
    xs = np.arange(xmin + resolution / 2, xmax, resolution)
    ys = np.arange(ymin + resolution / 2, ymax, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return pts[points_in_polygon(pts, polygon.vertices)]


def raster_coverage(cells, polygon: Polygon2D,
                    resolution: float = RASTER_RESOLUTION) -> float:
    """Fraction of a fine grid over the polygon covered by the union of the
    footprint cells: the ground-truth coverage oracle."""
    pts = raster_grid(polygon, resolution)
    if len(pts) == 0:
        return 1.0
    covered = np.zeros(len(pts), dtype=bool)
    for cell in cells:
        todo = ~covered
        if not np.any(todo):
            break
        covered[todo] = _inside_convex(pts[todo], cell)
    return float(np.count_nonzero(covered)) / len(pts)


def _clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex subject polygon by a convex clip
    polygon (both CCW)."""
    out = list(subject)
    n = len(clip)
    for i in range(n):
        a, b = clip[i], clip[(i + 1) % n]
        if not out:
            break
        inp, out = out, []
        prev = inp[-1]
        for cur in inp:
            side_cur = (b[0] - a[0]) * (cur[1] - a[1]) - (b[1] - a[1]) * (cur[0] - a[0])
            side_prev = (b[0] - a[0]) * (prev[1] - a[1]) - (b[1] - a[1]) * (prev[0] - a[0])
            if side_cur >= 0:
                if side_prev < 0:
                    out.append(_line_intersect(prev, cur, a, b))
                out.append(cur)
            elif side_prev >= 0:
                out.append(_line_intersect(prev, cur, a, b))
            prev = cur
    return np.array(out) if out else np.empty((0, 2))


def _line_intersect(p1, p2, a, b):
    d1 = np.asarray(p2, dtype=float) - p1
    d2 = np.asarray(b, dtype=float) - a
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    t = ((a[0] - p1[0]) * d2[1] - (a[1] - p1[1]) * d2[0]) / denom
    return np.asarray(p1, dtype=float) + t * d1


def _ccw(v: np.ndarray) -> np.ndarray:
    nxt = np.roll(v, -1, axis=0)
    area2 = float(np.sum(v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]))
    return v if area2 > 0 else v[::-1]


def mean_pairwise_overlap(cells) -> float:
    """Mean over consecutive footprint pairs of the intersection area divided
    by the smaller footprint area."""
    fracs = []
    for c1, c2 in zip(cells, cells[1:]):
        a = _ccw(c1.vertices)
        b = _ccw(c2.vertices)
        inter = _clip_convex(a, b)
        if len(inter) < 3:
            fracs.append(0.0)
            continue
        ai = _poly_area(inter)
        fracs.append(ai / min(_poly_area(a), _poly_area(b)))
    return float(np.mean(fracs)) if fracs else 0.0


def _poly_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


# ---------------------------------------------------------------------------
# Grid-sweep baseline


def grid_baseline(scenario: Scenario) -> MissionTrace:
    """Boustrophedon sweep at the altitude cap with level attitude.

    Lanes run along the longer bounding-box axis; lane spacing equals the
    level-flight footprint width, with the last lane allowed to stick out so
    the boundary band is covered. Full raster coverage by construction.
    """
    z = scenario.limits.altitude[1]
    half_x = z * math.tan(scenario.camera.hfov / 2.0)
    half_y = z * math.tan(scenario.camera.vfov / 2.0)
    xmin, xmax, ymin, ymax = scenario.polygon.bounding_box()

    if (xmax - xmin) >= (ymax - ymin):
        along, across = (xmin, xmax), (ymin, ymax)
        half_across = half_y
        lane_axis = 0
    else:
        along, across = (ymin, ymax), (xmin, xmax)
        half_across = half_x
        lane_axis = 1

    spacing = 2.0 * half_across
    n_lanes = max(1, math.ceil((across[1] - across[0]) / spacing))
    lane_positions = [across[0] + half_across + i * spacing
                      for i in range(n_lanes)]

    waypoints = []
    for i, c in enumerate(lane_positions):
        ends = (along[0], along[1]) if i % 2 == 0 else (along[1], along[0])
        for e in ends:
            wp = (e, c) if lane_axis == 0 else (c, e)
            waypoints.append(wp)

    vmax = scenario.limits.velocity[1]
    ds = vmax * scenario.dt
    field_ = ParticleField.from_polygon(scenario.polygon, scenario.particles,
                                        scenario.seed_sampling)
    trace = MissionTrace(initial_count=len(field_))
    hover = ControlInput(scenario.vehicle.hover_thrust, 0.0, 0.0, 0.0)

    samples = [np.asarray(waypoints[0], dtype=float)]
    for a, b in zip(waypoints, waypoints[1:]):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        seg = np.linalg.norm(b - a)
        n = max(1, math.ceil(seg / ds))
        for k in range(1, n + 1):
            samples.append(a + (b - a) * (k / n))

    prev = None
    for p in samples:
        vel = ((p - prev) / scenario.dt) if prev is not None else np.zeros(2)
        state = State(float(p[0]), float(p[1]), z, float(vel[0]),
                      float(vel[1]), 0.0)
        cell_verts = np.array([
            [p[0] + half_x, p[1] + half_y],
            [p[0] + half_x, p[1] - half_y],
            [p[0] - half_x, p[1] - half_y],
            [p[0] - half_x, p[1] + half_y],
        ])
        cell = FootprintCell(cell_verts)
        field_, _ = harvest(field_, cell)
        trace.true_states.append(state)
        trace.est_states.append(state)
        trace.inputs.append(hover)
        trace.cells.append(cell)
        trace.remaining.append(len(field_))
        trace.solve_times.append(float("nan"))
        prev = p
    trace.termination = "complete"
    return trace


# ---------------------------------------------------------------------------
# Trace / metrics I/O and rendering


def write_trace(trace: MissionTrace, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(TRACE_COLUMNS)
            for k in range(trace.steps):
                s = trace.true_states[k]
                e = trace.est_states[k]
                u = trace.inputs[k]
                c = trace.cells[k].vertices
                row = ([k]
                       + [s.x, s.y, s.z, s.vx, s.vy, s.vz]
                       + [e.x, e.y, e.z, e.vx, e.vy, e.vz]
                       + [u.thrust, u.roll, u.pitch, u.yaw]
                       + list(c.ravel())
                       + [trace.remaining[k], trace.solve_times[k]])
                wr.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in row])
    except OSError as exc:
        raise IoError(f"cannot write trace to {path}: {exc}") from exc


def read_trace(path) -> MissionTrace:
    path = Path(path)
    trace = MissionTrace()
    try:
        with path.open() as fh:
            rd = csv.reader(fh)
            header = next(rd)
            if header != TRACE_COLUMNS:
                raise ParseError(f"unexpected trace columns in {path}")
            for row in rd:
                vals = [float(v) for v in row[1:]]
                trace.true_states.append(State(*vals[0:6]))
                trace.est_states.append(State(*vals[6:12]))
                trace.inputs.append(ControlInput(*vals[12:16]))
                trace.cells.append(
                    FootprintCell(np.asarray(vals[16:24]).reshape(4, 2)))
                trace.remaining.append(int(vals[24]))
                trace.solve_times.append(vals[25])
    except OSError as exc:
        raise ParseError(f"cannot read trace {path}: {exc}") from exc
    # The pre-mission particle count is not a per-step quantity; reloaded
    # traces treat the first row's remaining count as the baseline.
    if trace.remaining:
        trace.initial_count = trace.remaining[0]
    return trace


def compute_metrics(trace: MissionTrace, scenario: Scenario) -> Metrics:
    cells = trace.true_footprints(scenario.camera)
    times = np.asarray(trace.solve_times, dtype=float)
    times = times[np.isfinite(times)]
    times = times[times > 0]
    return Metrics(
        path_length=trace.path_length(),
        coverage_particle=trace.coverage_particle(),
        coverage_raster=raster_coverage(cells, scenario.polygon),
        steps=trace.steps,
        mean_solve_time=float(times.mean()) if len(times) else 0.0,
        max_solve_time=float(times.max()) if len(times) else 0.0,
        mean_overlap=mean_pairwise_overlap(cells),
        termination=trace.termination,
    )


def write_metrics(metrics: Metrics, path) -> None:
    doc = {
        "path_length_m": metrics.path_length,
        "coverage_particle": metrics.coverage_particle,
        "coverage_raster": metrics.coverage_raster,
        "steps": metrics.steps,
        "mean_solve_time_s": metrics.mean_solve_time,
        "max_solve_time_s": metrics.max_solve_time,
        "mean_overlap": metrics.mean_overlap,
        "termination": metrics.termination,
    }
    try:
        Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))
    except OSError as exc:
        raise IoError(f"cannot write metrics to {path}: {exc}") from exc


def render(trace: MissionTrace, out_path, polygon: Polygon2D | None = None,
           camera: CameraIntrinsics | None = None) -> None:
    """Draw the ground-projected path, down-sampled footprint outlines and the
    target boundary to an SVG file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 6))
    cells = (trace.true_footprints(camera) if camera is not None
             else trace.cells)
    for cell in cells[::RENDER_CELL_STRIDE]:
        v = np.vstack([cell.vertices, cell.vertices[:1]])
        ax.plot(v[:, 0], v[:, 1], color="0.75", linewidth=0.6, zorder=1)
    if polygon is not None:
        v = np.vstack([polygon.vertices, polygon.vertices[:1]])
        ax.plot(v[:, 0], v[:, 1], color="black", linewidth=2.0, zorder=3)
    xs = [s.x for s in trace.true_states]
    ys = [s.y for s in trace.true_states]
    ax.plot(xs, ys, color="tab:blue", linestyle="--", linewidth=1.2, zorder=2,
            label="path (ground projection)")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="upper right", fontsize=8)
    try:
        fig.savefig(out_path, format="svg", bbox_inches="tight")
    except OSError as exc:
        raise IoError(f"cannot write rendering to {out_path}: {exc}") from exc
    finally:
        plt.close(fig)


def run_and_report(scenario: Scenario, out_dir) -> Metrics:
    """Run the mission, write trace/metrics/rendering into ``out_dir`` and
    return the metrics."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    trace = run_mission(scenario)
    metrics = compute_metrics(trace, scenario)
    write_trace(trace, out / "trace.csv")
    write_metrics(metrics, out / "metrics.yaml")
    render(trace, out / "mission.svg", polygon=scenario.polygon,
           camera=scenario.camera)
    return metrics


def sweep_particles(scenario: Scenario, counts, repeats: int = 1):
    """For each particle count, run ``repeats`` seeded missions and aggregate
    coverage and per-step solve-time statistics. Returns a list of row dicts.
    """
    if not counts:
        raise ValueError("counts must be nonempty")
    rows = []
    for count in counts:
        cov_raster, cov_particle, mean_t, max_t, lengths = [], [], [], [], []
        for r in range(repeats):
            sc = scenario.with_overrides(
                particles=int(count),
                seed_sampling=scenario.seed_sampling + 1000 * r,
                seed_noise=scenario.seed_noise + 1000 * r)
            trace = run_mission(sc)
            m = compute_metrics(trace, sc)
            cov_raster.append(m.coverage_raster)
            cov_particle.append(m.coverage_particle)
            mean_t.append(m.mean_solve_time)
            max_t.append(m.max_solve_time)
            lengths.append(m.path_length)
        rows.append({
            "particles": int(count),
            "repeats": repeats,
            "mean_coverage_raster": float(np.mean(cov_raster)),
            "min_coverage_raster": float(np.min(cov_raster)),
            "mean_coverage_particle": float(np.mean(cov_particle)),
            "mean_solve_time_s": float(np.mean(mean_t)),
            "max_solve_time_s": float(np.max(max_t)),
            "mean_path_length_m": float(np.mean(lengths)),
        })
    return rows
