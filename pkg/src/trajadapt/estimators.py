"""scikit-learn style wrappers around the solver and the adapter.

``fit`` takes a task (``TaskParameters`` or its dict form) instead of a
feature matrix, and ``predict`` returns an ``(m, n)`` joint trajectory for a
task of the same family::

    opt = ArgminTrajectoryAdapter(robot_model="panda", m=20, weights={"track": 30, "orient": 10})
    opt.fit(prior_task)
    xi = opt.predict(perturbed_task)
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .adapter import AdaptOptions, adapt
from .costs import CostWeights, TaskKind, TaskParameters, TrajectoryProblem
from .exceptions import DimensionError
from .kinematics import RobotModel, fk_batch, load_robot_model
from .solver import SolveOptions, resolve_warm, solve
from .trajectory import BoxBounds, interpolate_seed


def check_task(task, n=None):
    """Coerce ``task`` to :class:`TaskParameters`; boundary tasks must have ``n`` joints."""
    if isinstance(task, dict):
        task = TaskParameters.from_dict(task)
    if not isinstance(task, TaskParameters):
        raise TypeError(f"expected TaskParameters or a task dict, got {type(task).__name__}")
    if n is not None and task.kind is TaskKind.BOUNDARY_CONFIGS and task.q_start.size != n:
        raise DimensionError(f"task has {task.q_start.size} joints, model has {n}")
    return task


def check_trajectory(xi, m, n):
    xi = check_array(xi, ensure_2d=True, dtype=np.float64, ensure_min_samples=m)
    if xi.shape != (m, n):
        raise DimensionError(f"trajectory shape {xi.shape}, expected {(m, n)}")
    return xi


def _model(ref):
    return ref if isinstance(ref, RobotModel) else load_robot_model(ref)


def _weights(w):
    return w if isinstance(w, CostWeights) else CostWeights.from_dict(w)


class TrajectoryOptimizer(BaseEstimator):
    """Optimal trajectory for a task; ``predict`` warm-starts from the fitted optimum."""

    def __init__(self, robot_model="panda", m=20, weights=None, solver_options=None):
        self.robot_model = robot_model
        self.m = m
        self.weights = weights
        self.solver_options = solver_options

    def _setup(self, task):
        self.model_ = _model(self.robot_model)
        task = check_task(task, self.model_.n)
        self.problem_ = TrajectoryProblem(self.model_, _weights(self.weights), task, self.m)
        self.bounds_ = BoxBounds.from_model(self.model_, self.m)
        self.solver_options_ = SolveOptions.from_dict(self.solver_options)
        return task

    def _seed(self, task):
        if task.kind is TaskKind.BOUNDARY_CONFIGS:
            return interpolate_seed(task.q_start, task.q_end, self.m)
        mid = 0.5 * (self.model_.lower_limits + self.model_.upper_limits)
        return np.tile(mid, (self.m, 1))

    def fit(self, task, xi0=None):
        task = self._setup(task)
        xi0 = self._seed(task) if xi0 is None else check_trajectory(xi0, self.m, self.model_.n)
        sol = solve(self.problem_, task, xi0, self.bounds_, self.solver_options_)
        self.task_ = task
        self.solution_ = sol
        self.xi_ = sol.xi_star
        self.cost_ = sol.cost
        self.n_iter_ = sol.iterations
        self.converged_ = sol.converged
        return self

    def predict(self, task=None):
        check_is_fitted(self, "xi_")
        if task is None:
            return self.xi_.copy()
        task = check_task(task, self.model_.n)
        self.last_solution_ = resolve_warm(self.problem_, self.solution_, task, self.bounds_, self.solver_options_)
        return self.last_solution_.xi_star

    def score(self, task=None):
        """Negative cost of ``predict(task)`` at ``task``."""
        task = self.task_ if task is None else check_task(task, self.model_.n)
        return -self.problem_.cost(self.predict(task), self.problem_.param_vector(task))

    def end_effector_path(self, xi=None):
        check_is_fitted(self, "xi_")
        return fk_batch(self.model_, self.xi_ if xi is None else xi)[0]


class ArgminTrajectoryAdapter(TrajectoryOptimizer):
    """Fit a prior optimum once, then ``predict`` adapts it to new task parameters."""

    def __init__(self, robot_model="panda", m=20, weights=None, solver_options=None, adapt_options=None):
        super().__init__(robot_model=robot_model, m=m, weights=weights, solver_options=solver_options)
        self.adapt_options = adapt_options

    def fit(self, task, xi_prior=None):
        """Solve the prior for ``task``; with ``xi_prior`` given it is taken as the optimum as is."""
        if xi_prior is None:
            super().fit(task)
        else:
            self.task_ = self._setup(task)
            self.xi_ = check_trajectory(xi_prior, self.m, self.model_.n)
            self.solution_ = None
            self.cost_ = self.problem_.cost(self.xi_, self.problem_.param_vector(self.task_))
            self.n_iter_ = 0
            self.converged_ = None
        self.adapt_options_ = AdaptOptions.from_dict(self.adapt_options)
        return self

    def predict(self, task=None):
        check_is_fitted(self, "xi_")
        if task is None:
            return self.xi_.copy()
        task = check_task(task, self.model_.n)
        xi, self.report_ = adapt(self.problem_, self.xi_, self.task_, task, self.bounds_, self.adapt_options_)
        return xi
