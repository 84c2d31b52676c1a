import math

import numpy as np
import pytest

from particlecover import (ActuationLimits, Attitude, ControlInput, State,
                           VehicleParams, clamp_input, rotation_matrix, step)
from particlecover.vehicle import accelerations, rk4


class TestHover:
    def test_hover_thrust_value(self, vehicle):
        assert vehicle.hover_thrust == pytest.approx(32.373, abs=1e-12)

    def test_hover_equilibrium_1000_steps(self, vehicle):
        s = State(0.4, -0.2, 0.8, 0.0, 0.0, 0.0)
        u = ControlInput(vehicle.hover_thrust, 0.0, 0.0, 0.0)
        cur = s
        for _ in range(1000):
            cur = step(cur, u, vehicle, 0.1)
        drift = np.linalg.norm(cur.to_array() - s.to_array())
        assert drift < 1e-9


class TestAccelerations:
    def test_matches_rotated_thrust(self, vehicle):
        # Thrust acts along body z under the aerospace yaw-pitch-roll
        # convention; compare against scipy's ZYX Euler rotation.
        from scipy.spatial.transform import Rotation
        rng = np.random.default_rng(2)
        for _ in range(200):
            t = rng.uniform(0.0, 50.0)
            r, p = rng.uniform(-0.4, 0.4, size=2)
            y = rng.uniform(-np.pi, np.pi)
            u = ControlInput(t, r, p, y)
            rot = Rotation.from_euler("ZYX", [y, p, r])
            want = (rot.apply([0.0, 0.0, t / vehicle.mass])
                    + np.array([0.0, 0.0, -vehicle.gravity]))
            got = np.array(accelerations(u, vehicle))
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_zero_thrust_free_fall(self, vehicle):
        ax, ay, az = accelerations(ControlInput(0.0, 0.1, -0.2, 0.5), vehicle)
        assert (ax, ay) == (0.0, 0.0)
        assert az == pytest.approx(-vehicle.gravity)


class TestIntegration:
    def test_constant_acceleration_exact(self, vehicle):
        # With attitude realized instantly the acceleration is constant over
        # a step, so RK4 must reproduce the quadratic solution exactly.
        u = ControlInput(40.0, 0.2, -0.1, 0.3)
        ax, ay, az = accelerations(u, vehicle)
        s = State(1.0, 2.0, 3.0, 0.5, -0.4, 0.1)
        dt = 0.1
        nxt = step(s, u, vehicle, dt)
        want = State(
            s.x + s.vx * dt + 0.5 * ax * dt * dt,
            s.y + s.vy * dt + 0.5 * ay * dt * dt,
            s.z + s.vz * dt + 0.5 * az * dt * dt,
            s.vx + ax * dt, s.vy + ay * dt, s.vz + az * dt)
        np.testing.assert_allclose(nxt.to_array(), want.to_array(),
                                   rtol=0, atol=1e-12)

    def test_rk4_fourth_order(self):
        # y' = y has solution e^t; halving dt shrinks the error ~16x.
        def f(y):
            return y

        y0 = np.array([1.0])
        e = []
        for dt in (0.2, 0.1):
            n = round(1.0 / dt)
            y = y0
            for _ in range(n):
                y = rk4(f, y, dt)
            e.append(abs(float(y[0]) - math.e))
        assert 12.0 < e[0] / e[1] < 20.0

    def test_bad_dt_rejected(self, vehicle):
        with pytest.raises(ValueError):
            step(State(0, 0, 1, 0, 0, 0), ControlInput(30, 0, 0, 0),
                 vehicle, 0.0)


class TestLimits:
    def test_clamp(self, limits):
        u = ControlInput(99.0, -1.0, 1.0, 4.0)
        c = clamp_input(u, limits)
        assert c.thrust == 50.0
        assert c.roll == limits.roll[0]
        assert c.pitch == limits.pitch[1]
        assert c.yaw == limits.yaw[1]

    def test_inside_untouched(self, limits):
        u = ControlInput(30.0, 0.1, -0.1, 0.5)
        assert clamp_input(u, limits) == u

    def test_bad_bounds_rejected(self):
        with pytest.raises(ValueError):
            ActuationLimits(thrust=(1.0, 1.0), roll=(-1, 1), pitch=(-1, 1),
                            yaw=(-1, 1), velocity=(-1, 1), altitude=(0, 1))

    def test_bad_vehicle_rejected(self):
        with pytest.raises(ValueError):
            VehicleParams(mass=0.0)
