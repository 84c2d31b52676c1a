"""Particle-harvesting visual area coverage planning and simulation."""

from .errors import (DegenerateAreaError, IoError, NonFiniteObjective,
                     ParseError, ParticleCoverError, RayHorizonError,
                     SolverFailure, ValidationError)
from .geometry import (Attitude, CameraIntrinsics, FootprintCell, Polygon2D,
                       path_length, point_in_cell, points_in_polygon,
                       polygon_area, project_footprint, rotation_matrix,
                       sample_uniform)
from .quality import QualityBand, corrected_distance, coverage_quality
from .vehicle import (ActuationLimits, ControlInput, State, VehicleParams,
                      clamp_input, dynamics, step)
from .planner import (CostWeights, CoverageSurrogateParams, HorizonPlan,
                      ParticleField, ParticleHarvestPlanner, PlannerConfig,
                      harvest, plan_step, remaining_term, rollout,
                      smooth_remaining_term, stage_cost)
from .solver import NlpProblem, SolveOptions, SolveReport, gradient, minimize
from .mission import Metrics, MissionTrace, NoiseModel, Scenario, run_mission
from .harness import (bundled_scenario, compute_metrics, grid_baseline,
                      load_scenario, mean_pairwise_overlap, raster_coverage,
                      read_trace, render, run_and_report, sweep_particles,
                      write_metrics, write_trace)

__version__ = "0.1.0"
