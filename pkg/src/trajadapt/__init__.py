"""Joint-trajectory optimization for serial manipulators and adaptation of optimal
trajectories to new task parameters through the sensitivity of the optimum."""

from .adapter import AdaptOptions, AdaptReport, SensitivityMap, adapt, argmin_jacobian, perturb_solution, validity_check
from .costs import CostWeights, QuadraticProblem, TaskKind, TaskParameters, TrajectoryProblem
from .estimators import ArgminTrajectoryAdapter, TrajectoryOptimizer
from .exceptions import (
    BenchmarkError,
    DerivativeError,
    DimensionError,
    ModelValidationError,
    SchemaError,
    SingularityError,
    TrajAdaptError,
)
from .harness import MetricsRecord, Scenario, load_scenario, run_benchmark, solve_prior
from .kinematics import DHRow, Pose, RobotModel, forward_kinematics, load_robot_model
from .solver import Solution, SolveOptions, resolve_warm, solve
from .trajectory import BoxBounds, interpolate_seed, project

__version__ = "0.1.0"

__all__ = [
    "AdaptOptions",
    "AdaptReport",
    "ArgminTrajectoryAdapter",
    "BenchmarkError",
    "BoxBounds",
    "CostWeights",
    "DHRow",
    "DerivativeError",
    "DimensionError",
    "MetricsRecord",
    "ModelValidationError",
    "Pose",
    "QuadraticProblem",
    "RobotModel",
    "Scenario",
    "SchemaError",
    "SensitivityMap",
    "SingularityError",
    "Solution",
    "SolveOptions",
    "TaskKind",
    "TaskParameters",
    "TrajAdaptError",
    "TrajectoryOptimizer",
    "TrajectoryProblem",
    "adapt",
    "argmin_jacobian",
    "forward_kinematics",
    "interpolate_seed",
    "load_robot_model",
    "load_scenario",
    "perturb_solution",
    "project",
    "resolve_warm",
    "run_benchmark",
    "solve",
    "solve_prior",
    "validity_check",
]
