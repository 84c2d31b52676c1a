"""Translational multirotor dynamics, fixed-step integration and input limits.

The plant is a point mass driven by total thrust along the body z axis plus
gravity; commanded attitude is realized instantly (the low-level attitude loop
is assumed ideal). State order is [x, y, z, vx, vy, vz].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class State:
    x: float
    y: float
    z: float
    vx: float
    vy: float
    vz: float

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.vx, self.vy, self.vz])

    @staticmethod
    def from_array(a) -> "State":
        return State(*(float(v) for v in a))


@dataclass(frozen=True)
class ControlInput:
    """Plant input: total thrust (N) and commanded roll/pitch/yaw (rad)."""

    thrust: float
    roll: float
    pitch: float
    yaw: float

    def to_array(self) -> np.ndarray:
        return np.array([self.thrust, self.roll, self.pitch, self.yaw])

    @staticmethod
    def from_array(a) -> "ControlInput":
        return ControlInput(*(float(v) for v in a))


@dataclass(frozen=True)
class VehicleParams:
    mass: float
    gravity: float = 9.81

    def __post_init__(self):
        if self.mass <= 0 or self.gravity <= 0:
            raise ValueError("mass and gravity must be positive")

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity


@dataclass(frozen=True)
class ActuationLimits:
    """Box bounds on inputs plus velocity/altitude bounds used by the planner."""

    thrust: tuple[float, float]
    roll: tuple[float, float]
    pitch: tuple[float, float]
    yaw: tuple[float, float]
    velocity: tuple[float, float]  # symmetric per-axis bound pair (lo, hi)
    altitude: tuple[float, float]

    def __post_init__(self):
        for name in ("thrust", "roll", "pitch", "yaw", "velocity", "altitude"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} bounds ({lo}, {hi}) need lo < hi")


def accelerations(u: ControlInput, params: VehicleParams):
    """Specific-force accelerations (ax, ay, az) for thrust along body z."""
    t_m = u.thrust / params.mass
    cr, sr = math.cos(u.roll), math.sin(u.roll)
    cp, sp = math.cos(u.pitch), math.sin(u.pitch)
    cy, sy = math.cos(u.yaw), math.sin(u.yaw)
    ax = t_m * (cy * sp * cr + sy * sr)
    ay = t_m * (sy * sp * cr - cy * sr)
    az = -params.gravity + t_m * (cp * cr)
    return ax, ay, az


def dynamics(state: State, u: ControlInput, params: VehicleParams) -> np.ndarray:
    """Time derivative (vx, ax, vy, ay, vz, az) of the position/velocity pairs."""
    ax, ay, az = accelerations(u, params)
    return np.array([state.vx, ax, state.vy, ay, state.vz, az])


def rk4(f, y0: np.ndarray, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of y' = f(y)."""
    k1 = f(y0)
    k2 = f(y0 + 0.5 * dt * k1)
    k3 = f(y0 + 0.5 * dt * k2)
    k4 = f(y0 + dt * k3)
    return y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: State, u: ControlInput, params: VehicleParams, dt: float) -> State:
    """Integrate the dynamics over one step of ``dt`` seconds (RK4)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    ax, ay, az = accelerations(u, params)
    acc = np.array([ax, ay, az])

    def f(y):
        return np.concatenate([y[3:], acc])

    y = rk4(f, state.to_array(), dt)
    return State.from_array(y)


def clamp_input(u: ControlInput, lim: ActuationLimits) -> ControlInput:
    """Componentwise projection of the input onto its box bounds."""
    def clip(v, b):
        return min(max(v, b[0]), b[1])

    return ControlInput(
        thrust=clip(u.thrust, lim.thrust),
        roll=clip(u.roll, lim.roll),
        pitch=clip(u.pitch, lim.pitch),
        yaw=clip(u.yaw, lim.yaw),
    )
