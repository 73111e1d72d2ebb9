import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from trajadapt.adapter import adapt
from trajadapt.estimators import ArgminTrajectoryAdapter, TrajectoryOptimizer, check_task, check_trajectory
from trajadapt.exceptions import DimensionError
from trajadapt.harness import load_scenario
from trajadapt.trajectory import BoxBounds

WEIGHTS = {"smooth": [1, 1, 1], "boundary": 100.0, "orient": 10.0}


@pytest.fixture(scope="module")
def scenario():
    return load_scenario("planar_final_config")


def test_params_round_trip():
    est = ArgminTrajectoryAdapter(robot_model="planar3", m=10, weights=WEIGHTS, adapt_options={"dp_tol": 1e-5})
    params = est.get_params()
    assert params["m"] == 10 and params["adapt_options"] == {"dp_tol": 1e-5}
    other = clone(est)
    assert other.get_params() == params
    other.set_params(m=12)
    assert other.m == 12 and est.m == 10


def test_not_fitted():
    with pytest.raises(NotFittedError):
        TrajectoryOptimizer(robot_model="planar3").predict()


def test_optimizer_fit_predict(scenario):
    task = scenario.prior_task()
    est = TrajectoryOptimizer(robot_model="planar3", m=10, weights=WEIGHTS).fit(task.to_dict())
    assert est.converged_
    assert est.xi_.shape == (10, 3)
    np.testing.assert_array_equal(est.predict(), est.xi_)
    moved = task.with_vector(task.vector() + 0.05)
    xi = est.predict(moved)
    assert est.last_solution_.converged
    assert est.score(moved) == pytest.approx(-est.problem_.cost(xi, moved.vector()))
    assert est.end_effector_path().shape == (10, 3)


def test_adapter_matches_functional_api(scenario):
    task = scenario.prior_task()
    est = ArgminTrajectoryAdapter(robot_model="planar3", m=10, weights=WEIGHTS).fit(task)
    target = task.with_vector(task.vector() + 0.1)
    xi = est.predict(target)
    ref, report = adapt(est.problem_, est.xi_, task, target, BoxBounds.from_model(est.model_, 10))
    np.testing.assert_array_equal(xi, ref)
    assert est.report_.termination == report.termination


def test_adapter_with_given_prior(scenario):
    task = scenario.prior_task()
    base = TrajectoryOptimizer(robot_model="planar3", m=10, weights=WEIGHTS).fit(task)
    est = ArgminTrajectoryAdapter(robot_model="planar3", m=10, weights=WEIGHTS).fit(task, xi_prior=base.xi_)
    np.testing.assert_array_equal(est.predict(task), base.xi_)
    assert est.report_.iterations == 0


def test_validation_helpers():
    with pytest.raises(TypeError):
        check_task([1, 2, 3])
    with pytest.raises(DimensionError):
        check_task({"kind": "boundary_configs", "q_start": [0, 0], "q_end": [0, 0]}, n=3)
    with pytest.raises(DimensionError):
        check_trajectory(np.zeros((5, 2)), 5, 3)
    with pytest.raises(ValueError):
        check_trajectory(np.full((5, 3), np.nan), 5, 3)
    assert check_trajectory(np.zeros((5, 3)).tolist(), 5, 3).dtype == np.float64


def test_tracking_task_fit():
    s = load_scenario("via_point")
    est = TrajectoryOptimizer(robot_model="panda", m=s.m, weights={"track": 30, "orient": 10})
    est.fit(s.prior_task(), xi0=s.seed_trajectory())
    assert est.converged_
