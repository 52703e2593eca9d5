"""Posterior sampling of tasks and trajectories for controller behavior analysis."""

from .baseline import TopKResult, top_k_select
from .ds import DSController
from .env2d import DEFAULT_PARAMS, EnvParams, Task2D, Trajectory
from .rrt import GrowthTape, RRTController
from .experiment import CONTROLLERS, run_experiment
from .sampler import BehaviorSpec, Calibration, SamplerConfig, calibrate, run_chain

__all__ = [
    "BehaviorSpec", "Calibration", "CONTROLLERS", "DEFAULT_PARAMS", "DSController", "EnvParams",
    "GrowthTape", "RRTController", "SamplerConfig", "Task2D", "TopKResult", "Trajectory",
    "calibrate", "run_chain", "run_experiment", "top_k_select",
]
