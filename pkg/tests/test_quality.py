import math

import numpy as np
import pytest

from particlecover import QualityBand, corrected_distance, coverage_quality


class TestQualityBand:
    def test_invalid_band_rejected(self):
        with pytest.raises(ValueError):
            QualityBand(1.0, 0.5)
        with pytest.raises(ValueError):
            QualityBand(-0.1, 1.0)
        with pytest.raises(ValueError):
            QualityBand(0.5, 0.5)


class TestCoverageQuality:
    def test_endpoints_exact(self):
        band = QualityBand(0.2, 1.0)
        assert abs(coverage_quality(0.2, band) - 1.0) < 1e-12
        assert abs(coverage_quality(1.0, band) - 0.0) < 1e-12

    def test_midpoint_value(self):
        band = QualityBand(0.2, 1.0)
        mid = 0.5 * (band.z_min + band.z_max)
        assert coverage_quality(mid, band) == pytest.approx(0.5625, abs=1e-12)

    def test_zero_outside_band(self):
        band = QualityBand(0.2, 1.0)
        assert coverage_quality(0.1, band) == 0.0
        assert coverage_quality(1.5, band) == 0.0

    def test_strictly_decreasing_on_band(self):
        band = QualityBand(0.2, 1.0)
        zs = np.linspace(0.2, 1.0, 200)
        qs = [coverage_quality(z, band) for z in zs]
        assert all(a > b for a, b in zip(qs, qs[1:]))

    def test_band_independent_of_scale(self):
        # The ramp is dimensionless in (z - z_min) / (z_max - z_min).
        b1, b2 = QualityBand(0.2, 1.0), QualityBand(2.0, 10.0)
        for t in np.linspace(0.0, 1.0, 17):
            q1 = coverage_quality(0.2 + 0.8 * t, b1)
            q2 = coverage_quality(2.0 + 8.0 * t, b2)
            assert q1 == pytest.approx(q2, abs=1e-12)


class TestCorrectedDistance:
    def test_level_is_identity(self):
        assert corrected_distance(0.7, 0.0, 0.0) == pytest.approx(0.7)

    def test_tilt_grows_distance(self):
        z = 0.8
        assert corrected_distance(z, 0.3, 0.2) == pytest.approx(
            z / (math.cos(0.3) * math.cos(0.2)))
        assert corrected_distance(z, 0.3, 0.2) > z

    def test_horizon_rejected(self):
        with pytest.raises(ValueError):
            corrected_distance(1.0, 2.0, 0.0)

    def test_negative_altitude_rejected(self):
        with pytest.raises(ValueError):
            corrected_distance(-0.1, 0.0, 0.0)
