"""Planar geometry: target polygons, rotations, camera footprint projection,
point containment, uniform sampling and path measurement.

All functions here are pure and operate on immutable inputs; they are safe to
call from any number of threads.

Conventions
-----------
* World frame: x east, y north, z up; the ground (target) plane is z = 0.
* The camera looks straight down the body -z axis; body attitude is given by
  roll/pitch/yaw and the body-to-world rotation is R_x(roll) R_y(pitch) R_z(yaw).
* Footprint cells are simple convex quadrilaterals on the ground plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAreaError, RayHorizonError

# Points closer than this to an edge are treated as on-boundary (inside).
_BOUNDARY_EPS = 1e-12
_MIN_VERTEX_SEPARATION = 1e-9


@dataclass(frozen=True)
class Attitude:
    """Body attitude angles in radians.

    Roll and pitch must keep the camera facing the ground
    (cos(roll) * cos(pitch) > 0); yaw is restricted to [-pi, pi].
    """

    roll: float
    pitch: float
    yaw: float

    def __post_init__(self):
        if not (-math.pi / 2 < self.roll < math.pi / 2):
            raise ValueError(f"roll {self.roll} outside (-pi/2, pi/2)")
        if not (-math.pi / 2 < self.pitch < math.pi / 2):
            raise ValueError(f"pitch {self.pitch} outside (-pi/2, pi/2)")
        if not (-math.pi <= self.yaw <= math.pi):
            raise ValueError(f"yaw {self.yaw} outside [-pi, pi]")


@dataclass(frozen=True)
class CameraIntrinsics:
    """Horizontal and vertical field-of-view angles, radians, in (0, pi)."""

    hfov: float
    vfov: float

    def __post_init__(self):
        for name, v in (("hfov", self.hfov), ("vfov", self.vfov)):
            if not (0.0 < v < math.pi):
                raise ValueError(f"{name} {v} outside (0, pi)")


@dataclass(frozen=True)
class FootprintCell:
    """Ground quadrilateral imaged by the camera at one pose.

    ``vertices`` is a (4, 2) array ordered so consecutive vertices form a
    simple (convex) quadrilateral.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (4, 2):
            raise ValueError(f"cell needs 4 2-D vertices, got shape {v.shape}")
        object.__setattr__(self, "vertices", v)
        v.setflags(write=False)

    def area(self) -> float:
        return _shoelace_area(self.vertices)


@dataclass(frozen=True)
class Polygon2D:
    """Simple (non-self-intersecting) polygon, either orientation.

    ``vertices`` is an (n, 2) array, n >= 3, consecutive vertices distinct.
    """

    vertices: np.ndarray
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 2-D vertices")
        d = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        if np.any(d <= _MIN_VERTEX_SEPARATION):
            raise ValueError("consecutive polygon vertices coincide")
        if self.validate and not _is_simple(v):
            raise ValueError("polygon edges self-intersect")
        object.__setattr__(self, "vertices", v)
        v.setflags(write=False)

    def bounding_box(self):
        v = self.vertices
        return v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max()


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 \
        and d3 != 0 and d4 != 0


def _is_simple(v: np.ndarray) -> bool:
    # O(n^2) pairwise test over non-adjacent edges; fine at desk scale.
    n = len(v)
    for i in range(n):
        a1, a2 = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(a1, a2, v[j], v[(j + 1) % n]):
                return False
    return True


def _shoelace_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def rotation_matrix(att: Attitude) -> np.ndarray:
    """Body-to-world rotation R_x(roll) @ R_y(pitch) @ R_z(yaw)."""
    cr, sr = math.cos(att.roll), math.sin(att.roll)
    cp, sp = math.cos(att.pitch), math.sin(att.pitch)
    cy, sy = math.cos(att.yaw), math.sin(att.yaw)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return rx @ ry @ rz


# Corner sign pattern: (+,+), (+,-), (-,-), (-,+) keeps the quadrilateral simple.
_CORNER_SIGNS = ((1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0))


def project_footprint(position, att: Attitude, cam: CameraIntrinsics) -> FootprintCell:
    """Project the four camera frustum corner rays onto the plane z = 0.

    Corner directions in the body frame are (+-tan(hfov/2), +-tan(vfov/2), -1);
    each is rotated to the world frame and scaled so the ray from ``position``
    hits the ground. Raises :class:`RayHorizonError` if any corner ray does not
    point strictly downward.
    """
    x, y, z = (float(c) for c in position)
    if z <= 0.0:
        raise ValueError(f"camera altitude must be positive, got {z}")
    ta = math.tan(cam.hfov / 2.0)
    tb = math.tan(cam.vfov / 2.0)
    r = rotation_matrix(att)
    verts = np.empty((4, 2))
    for i, (sa, sb) in enumerate(_CORNER_SIGNS):
        d = r @ np.array([sa * ta, sb * tb, -1.0])
        if d[2] >= 0.0:
            raise RayHorizonError(
                f"corner ray {i} has vertical direction {d[2]:.3g} >= 0"
            )
        t = z / -d[2]
        verts[i, 0] = x + t * d[0]
        verts[i, 1] = y + t * d[1]
    return FootprintCell(verts)


def _crossings_and_boundary(points: np.ndarray, verts: np.ndarray):
    """Vectorized +x ray-casting crossing count plus on-boundary flags."""
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    x1 = verts[:, 0][None, :]
    y1 = verts[:, 1][None, :]
    x2 = np.roll(verts[:, 0], -1)[None, :]
    y2 = np.roll(verts[:, 1], -1)[None, :]

    # Half-open rule: count an edge iff one endpoint is strictly above the ray
    # and the other at-or-below it.
    straddles = (y1 > py) != (y2 > py)
    dy = np.where(straddles, y2 - y1, 1.0)
    xint = x1 + (py - y1) * (x2 - x1) / dy
    crossings = np.sum(straddles & (px < xint), axis=1)

    ex, ey = x2 - x1, y2 - y1
    cross = ex * (py - y1) - ey * (px - x1)
    seg_len = np.hypot(ex, ey)
    within = (
        (px >= np.minimum(x1, x2) - _BOUNDARY_EPS)
        & (px <= np.maximum(x1, x2) + _BOUNDARY_EPS)
        & (py >= np.minimum(y1, y2) - _BOUNDARY_EPS)
        & (py <= np.maximum(y1, y2) + _BOUNDARY_EPS)
    )
    on_boundary = np.any((np.abs(cross) <= _BOUNDARY_EPS * np.maximum(seg_len, 1.0))
                         & within, axis=1)
    return crossings, on_boundary


def points_in_polygon(points, verts) -> np.ndarray:
    """Ray-casting containment for an array of points against polygon vertices.

    Boundary points count as inside.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    verts = np.asarray(verts, dtype=float)
    crossings, on_boundary = _crossings_and_boundary(points, verts)
    return (crossings % 2 == 1) | on_boundary


def point_in_cell(p, cell: FootprintCell) -> bool:
    """True iff ``p`` lies inside or on the boundary of the footprint cell."""
    return bool(points_in_polygon(np.asarray(p, dtype=float)[None, :],
                                  cell.vertices)[0])


def polygon_area(poly: Polygon2D) -> float:
    """Positive shoelace area in square meters."""
    return _shoelace_area(poly.vertices)


def sample_uniform(poly: Polygon2D, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` points uniformly inside ``poly`` by rejection sampling over
    the bounding box. Deterministic for a fixed seed. Returns an (n, 2) array.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    area = polygon_area(poly)
    if area < 1e-12:
        raise DegenerateAreaError(f"polygon area {area:.3g} m^2 below 1e-12")
    xmin, xmax, ymin, ymax = poly.bounding_box()
    box_area = (xmax - xmin) * (ymax - ymin)
    rng = np.random.default_rng(seed)
    out = np.empty((n, 2))
    filled = 0
    # Expected acceptance rate is area / box_area; draw with headroom.
    batch = max(64, int(1.5 * n * box_area / area))
    while filled < n:
        cand = rng.uniform((xmin, ymin), (xmax, ymax), size=(batch, 2))
        accept = cand[points_in_polygon(cand, poly.vertices)]
        take = min(n - filled, len(accept))
        out[filled:filled + take] = accept[:take]
        filled += take
    return out


def path_length(points) -> float:
    """Sum of Euclidean segment lengths over a sequence of 3-D points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 1:
        raise ValueError("need at least one point")
    if len(pts) == 1:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
