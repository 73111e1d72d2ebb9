"""Numerical self-checks: analytic derivatives and sensitivities against finite differences."""

from typing import NamedTuple

import numpy as np

from .adapter import argmin_jacobian
from .costs import CostWeights, TaskParameters, TrajectoryProblem
from .kinematics import fk_batch, load_robot_model
from .solver import SolveOptions, solve
from .trajectory import BoxBounds, interpolate_seed


class CheckResult(NamedTuple):
    name: str
    passed: bool
    error: float
    tolerance: float

    def __str__(self):
        status = "ok" if self.passed else "FAIL"
        return f"[{status}] {self.name}: error {self.error:.3e} (tolerance {self.tolerance:.1e})"


def relative_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def fd_gradient(problem, xi, p, h=1e-6):
    x = xi.ravel()
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (problem.cost((x + e).reshape(xi.shape), p) - problem.cost((x - e).reshape(xi.shape), p)) / (2 * h)
    return g


def fd_mixed(problem, xi, p, h=1e-5):
    p = np.asarray(p, dtype=float)
    cols = []
    for j in range(p.size):
        e = np.zeros_like(p)
        e[j] = h
        gp = problem.derivatives(xi, p + e, want=("gradient",)).gradient
        gm = problem.derivatives(xi, p - e, want=("gradient",)).gradient
        cols.append((gp - gm) / (2 * h))
    return np.stack(cols, axis=1)


def fd_sensitivity(problem, xi_star, p, bounds, h=1e-4, grad_tol=1e-10):
    """Columns ``(xi*(p + h e_j) - xi*(p - h e_j)) / 2h`` from warm-started re-solves."""
    opts = SolveOptions(grad_tol=grad_tol)
    p = np.asarray(p, dtype=float)
    cols = []
    for j in range(p.size):
        e = np.zeros_like(p)
        e[j] = h
        plus = solve(problem, p + e, xi_star, bounds, opts).xi_star
        minus = solve(problem, p - e, xi_star, bounds, opts).xi_star
        cols.append(((plus - minus) / (2 * h)).ravel())
    return np.stack(cols, axis=1)


def planar_boundary_problem(m=10, weights=None):
    """Planar three-link boundary problem with its optimum, shared by the checks and tests."""
    model = load_robot_model("planar3")
    q0 = np.array([0.3, 0.6, 0.4])
    q1 = np.array([1.1, 0.2, -0.1])
    o_d = fk_batch(model, q0)[1]
    task = TaskParameters.boundary(q0, q1, o_d, (0.0, 0.0, 1.0))
    weights = weights or CostWeights(w_smooth=(1.0, 1.0, 1.0), w_boundary=100.0, w_orient=10.0)
    problem = TrajectoryProblem(model, weights, task, m)
    bounds = BoxBounds.from_model(model, m)
    sol = solve(problem, task, interpolate_seed(q0, q1, m), bounds, SolveOptions(grad_tol=1e-10))
    return problem, task, bounds, sol


def run_self_checks(seed=0):
    rng = np.random.default_rng(seed)
    results = []
    problem, task, bounds, sol = planar_boundary_problem()
    p = task.vector()

    xi = sol.xi_star + 0.1 * rng.standard_normal(sol.xi_star.shape)
    b = problem.derivatives(xi, p)
    results.append(CheckResult("gradient vs finite differences", *_ok(relative_error(b.gradient, fd_gradient(problem, xi, p)), 1e-5)))
    results.append(CheckResult("mixed Jacobian vs finite differences", *_ok(relative_error(b.mixed, fd_mixed(problem, xi, p)), 1e-4)))
    H = b.hessian
    results.append(CheckResult("Hessian symmetry", *_ok(relative_error(H, H.T), 1e-9)))

    S = argmin_jacobian(problem.derivatives(sol.xi_star, p), 1e-8).matrix
    fd = fd_sensitivity(problem, sol.xi_star, p, bounds)
    err = max(relative_error(S[:, j], fd[:, j]) for j in range(p.size))
    results.append(CheckResult("sensitivity vs re-solved optima", *_ok(err, 5e-2)))
    return results


def _ok(err, tol):
    return bool(err <= tol), err, tol
