import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trajadapt.costs import CostWeights, TaskParameters, TrajectoryProblem  # noqa: E402
from trajadapt.kinematics import DHRow, RobotModel, fk_batch, load_robot_model  # noqa: E402
from trajadapt.solver import SolveOptions, solve  # noqa: E402
from trajadapt.trajectory import BoxBounds, interpolate_seed  # noqa: E402

READY = np.array([0.0, -math.pi / 4, 0.0, -3 * math.pi / 4, 0.0, math.pi / 2, math.pi / 4])


@pytest.fixture(scope="session")
def planar():
    return load_robot_model("planar3")


@pytest.fixture(scope="session")
def panda():
    return load_robot_model("panda")


@pytest.fixture(scope="session")
def planar2():
    rows = [DHRow(1.0, 0.0, 0.0, 0.0, "classic") for _ in range(2)]
    return RobotModel("planar2", rows, [-math.pi] * 2, [math.pi] * 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_config(model, rng, margin=0.1):
    lo, hi = model.lower_limits + margin, model.upper_limits - margin
    return lo + (hi - lo) * rng.random(model.n)


def planar_boundary(model, m=10, w=None):
    q0 = np.array([0.3, 0.6, 0.4])
    qm = np.array([1.1, 0.2, -0.1])
    o_d = fk_batch(model, q0)[1]
    task = TaskParameters.boundary(q0, qm, o_d, (0.0, 0.0, 1.0))
    w = w or CostWeights(w_smooth=(1.0, 1.0, 1.0), w_boundary=100.0, w_orient=10.0)
    problem = TrajectoryProblem(model, w, task, m)
    bounds = BoxBounds.from_model(model, m)
    sol = solve(problem, task, interpolate_seed(q0, qm, m), bounds, SolveOptions(grad_tol=1e-10))
    return problem, task, bounds, sol


def panda_boundary(model, m=8, w=None):
    qs = np.array([0.8, 0.2, 0.0, -1.6, 0.0, 1.8, math.pi / 4])
    qe = np.array([-0.6, 0.3, 0.0, -1.9, 0.0, 2.2, math.pi / 4])
    task = TaskParameters.boundary(qs, qe, (math.pi, 0.0, 0.0), (1.0, 1.0, 0.0))
    w = w or CostWeights(w_smooth=(1.0, 1.0, 1.0), w_boundary=100.0, w_orient=10.0)
    problem = TrajectoryProblem(model, w, task, m)
    bounds = BoxBounds.from_model(model, m)
    sol = solve(problem, task, interpolate_seed(qs, qe, m), bounds, SolveOptions(grad_tol=1e-10))
    return problem, task, bounds, sol
