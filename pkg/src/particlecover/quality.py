"""Image-quality scoring of a viewpoint from altitude and tilt.

Quality is 1 at the minimum working altitude and falls smoothly to 0 at the
maximum; tilting the camera increases the effective viewing distance and can
only reduce quality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class QualityBand:
    """Altitude band [z_min, z_max] over which quality ramps from 1 to 0."""

    z_min: float
    z_max: float

    def __post_init__(self):
        if not (0.0 <= self.z_min < self.z_max):
            raise ValueError(
                f"need 0 <= z_min < z_max, got [{self.z_min}, {self.z_max}]"
            )


def corrected_distance(z: float, roll: float, pitch: float) -> float:
    """Camera-to-ground distance along the optical axis: z / (cos(roll) cos(pitch)).

    Equals z for a level camera and grows with tilt; requires the camera to
    face the ground (cos(roll) * cos(pitch) > 0) and z >= 0.
    """
    c = math.cos(roll) * math.cos(pitch)
    if c <= 0.0:
        raise ValueError("camera does not face the ground (cos(roll)cos(pitch) <= 0)")
    if z < 0.0:
        raise ValueError(f"altitude must be nonnegative, got {z}")
    return z / c


def coverage_quality(z_corr: float, band: QualityBand) -> float:
    """Quality in [0, 1] at corrected viewing distance ``z_corr``.

    Quartic ramp ((z - z_min)^2 - (z_min - z_max)^2)^2 / (z_min - z_max)^4 on
    the band: 1 at z_min, 0 at z_max, strictly decreasing in between; zero
    outside the band.
    """
    if z_corr < band.z_min or z_corr > band.z_max:
        return 0.0
    span = band.z_min - band.z_max
    num = (z_corr - band.z_min) ** 2 - span ** 2
    return num * num / span ** 4
