import numpy as np
import pytest

from particlecover import (CameraIntrinsics, CoverageSurrogateParams,
                           CostWeights, ActuationLimits, PlannerConfig,
                           QualityBand, VehicleParams)


@pytest.fixture(scope="session")
def camera():
    return CameraIntrinsics(hfov=1.2, vfov=1.2)


@pytest.fixture(scope="session")
def vehicle():
    return VehicleParams(mass=3.3, gravity=9.81)


@pytest.fixture(scope="session")
def limits():
    return ActuationLimits(
        thrust=(0.0, 50.0),
        roll=(-np.pi / 10, np.pi / 10),
        pitch=(-np.pi / 10, np.pi / 10),
        yaw=(-np.pi, np.pi),
        velocity=(-2.0, 2.0),
        altitude=(0.0, 1.0))


@pytest.fixture(scope="session")
def planner_cfg(camera, vehicle, limits):
    return PlannerConfig(
        camera=camera, vehicle=vehicle, limits=limits,
        weights=CostWeights(), band=QualityBand(0.2, 1.0),
        surrogate=CoverageSurrogateParams(sharpness=50.0),
        horizon=4, dt=0.1)
