"""Adapting an optimal trajectory to perturbed task parameters.

Around an optimum ``xi*(p)`` of a bound-constrained problem, the implicit
function theorem applied to ``grad_xi f(xi*, p) = 0`` gives the sensitivity

    d xi* / d p = -(H + mu I)^-1 M,   H = hess_xi f,  M = d/dp grad_xi f

and the first-order transport ``xi*(p + dp) ~ xi*(p) + S dp``.  A transported
trajectory is only accepted when it does not raise the cost at the target
parameters compared to the trajectory it came from.  :func:`adapt` repeats
transport, projection onto the joint limits and a forward roll-out of the
achieved parameters until the remaining parameter gap closes or no step
length on the grid is acceptable any more.
"""

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .costs import TaskParameters
from .exceptions import DimensionError, SingularityError
from .solver import Solution

logger = logging.getLogger(__name__)

DEFAULT_ETA_GRID = tuple(round(1.0 - 0.1 * i, 1) for i in range(10))

TERMINATION_REASONS = ("converged", "eta_exhausted", "max_iters", "singular")


@dataclass(frozen=True)
class AdaptOptions:
    eta_grid: tuple = DEFAULT_ETA_GRID
    max_outer_iters: int = 50
    dp_tol: float = 1e-4
    hessian_damping: float = 1e-8

    def __post_init__(self):
        grid = tuple(float(e) for e in self.eta_grid)
        if not grid:
            raise ValueError("eta_grid must not be empty")
        if any(not 0.0 < e <= 1.0 for e in grid):
            raise ValueError("eta_grid values must lie in (0, 1]")
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ValueError("eta_grid must be strictly descending")
        object.__setattr__(self, "eta_grid", grid)
        if self.max_outer_iters < 0 or self.dp_tol < 0 or self.hessian_damping < 0:
            raise ValueError("AdaptOptions values must be nonnegative")

    @classmethod
    def from_dict(cls, data):
        return cls(**(data or {}))


@dataclass
class SensitivityMap:
    matrix: np.ndarray
    xi: np.ndarray
    p: np.ndarray
    damping_used: float


@dataclass
class AdaptState:
    k: int
    xi: np.ndarray
    p_current: np.ndarray
    p_target: np.ndarray
    delta_p: np.ndarray
    hessian: np.ndarray = None
    mixed: np.ndarray = None
    eta_history: list = field(default_factory=list)
    cost_history: list = field(default_factory=list)


@dataclass
class AdaptReport:
    termination: str
    iterations: int
    final_dp_norm: float
    wall_time: float
    etas: list = field(default_factory=list)
    costs: list = field(default_factory=list)
    dp_norms: list = field(default_factory=list)
    phase_times: dict = field(default_factory=lambda: {"derivatives": 0.0, "linear_solve": 0.0, "line_search": 0.0})
    eq10_violations: int = 0
    message: str = ""

    @property
    def warning(self):
        """True when adaptation stopped without closing the parameter gap."""
        return self.termination != "converged"

    def to_dict(self):
        return {
            "termination": self.termination,
            "iterations": self.iterations,
            "final_dp_norm": self.final_dp_norm,
            "wall_time_s": self.wall_time,
            "phase_times_s": dict(self.phase_times),
            "iterations_detail": [
                {"eta": e, "cost": c, "dp_norm": d} for e, c, d in zip(self.etas, self.costs[1:], self.dp_norms[1:])
            ],
            "initial_cost": self.costs[0] if self.costs else None,
            "initial_dp_norm": self.dp_norms[0] if self.dp_norms else None,
            "eq10_violations": self.eq10_violations,
            "message": self.message,
        }


def argmin_jacobian(bundle, damping=1e-8):
    """Sensitivity of the minimizer to the parameters, from a derivative bundle.

    Solves ``(H + mu I) X = -M`` with ``mu = damping * (1 + trace(H) / dim)``;
    on failure ``mu`` is escalated tenfold up to three times.
    """
    H, M = bundle.hessian, bundle.mixed
    if H is None or M is None:
        raise ValueError("argmin_jacobian needs the Hessian and the mixed Jacobian")
    dim = H.shape[0]
    base = damping * (1.0 + abs(np.trace(H)) / dim)
    mu = base
    eye = np.eye(dim)
    for attempt in range(4):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
                X = scipy.linalg.solve(H + mu * eye, -M, assume_a="sym", check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError):
            X = None
        if X is not None and np.all(np.isfinite(X)):
            return SensitivityMap(matrix=X, xi=None, p=None, damping_used=mu)
        mu = (mu if mu > 0 else 1e-8 * (1.0 + abs(np.trace(H)) / dim)) * 10.0
    cond = float(np.linalg.cond(H)) if np.all(np.isfinite(H)) else np.inf
    raise SingularityError(f"damped Hessian is singular (condition estimate {cond:.3g})", condition=cond)


def perturb_solution(xi, S, delta_p, eta=1.0):
    """First-order transport ``xi + eta * S @ delta_p`` (no projection)."""
    xi = np.asarray(xi, dtype=float)
    matrix = S.matrix if isinstance(S, SensitivityMap) else np.asarray(S, dtype=float)
    delta_p = np.asarray(delta_p, dtype=float)
    if matrix.shape != (xi.size, delta_p.size):
        raise DimensionError(f"sensitivity shape {matrix.shape} incompatible with xi {xi.shape} and dp {delta_p.shape}")
    return xi + eta * (matrix @ delta_p).reshape(xi.shape)


def validity_check(problem, xi_new, xi_old, p_perturbed):
    """Is ``f(xi_new, p') <= f(xi_old, p')``?  Non-finite costs are invalid."""
    if isinstance(p_perturbed, TaskParameters):
        p_perturbed = problem.param_vector(p_perturbed)
    f_new = problem.cost(xi_new, p_perturbed)
    f_old = problem.cost(xi_old, p_perturbed)
    if not (np.isfinite(f_new) and np.isfinite(f_old)):
        logger.warning("validity check saw non-finite cost (new %s, old %s)", f_new, f_old)
        return False
    return bool(f_new <= f_old)


def line_search(problem, state, S, bounds, options):
    """Largest grid step whose transported-and-projected trajectory passes the validity check.

    The current iterate and every grid candidate are costed in one batched
    call, so the comparison is between identically evaluated numbers.
    Returns ``(eta, candidate, candidate_cost, current_cost)``; the first
    three are ``None`` when no grid value passes.
    """
    shape = state.xi.shape
    step = (S.matrix @ state.delta_p).reshape(shape)
    etas = np.asarray(options.eta_grid)
    cands = np.clip(state.xi + etas[:, None, None] * step, bounds.lb, bounds.ub)
    costs = np.asarray(problem.cost_batch(np.concatenate([state.xi[None], cands]), state.p_target))
    f_old, costs = float(costs[0]), costs[1:]
    ok = np.flatnonzero(np.isfinite(costs) & (costs <= f_old))
    if not ok.size:
        return None, None, None, f_old
    i = int(ok[0])
    return float(etas[i]), cands[i], float(costs[i]), f_old


def forward_roll(problem, xi):
    """Task parameters achieved by ``xi``."""
    return problem.forward_roll(xi)


def adapt(problem, prior, p_prior, p_target, bounds, options=None):
    """Adapt a prior optimum to new task parameters.

    Returns ``(xi, report)``.  The cost at ``p_target`` never increases from
    one accepted iterate to the next; the loop stops when the parameter gap
    ``p_target - forward_roll(xi)`` is below ``dp_tol`` (infinity norm), when
    no grid step is acceptable, or after ``max_outer_iters``.
    """
    opts = options or AdaptOptions()
    t0 = time.perf_counter()
    xi = np.array(prior.xi_star if isinstance(prior, Solution) else prior, dtype=float)
    shape = tuple(problem.shape)
    if xi.shape != shape:
        xi = xi.reshape(shape)
    if isinstance(p_prior, TaskParameters):
        p_prior = problem.param_vector(p_prior)
    if isinstance(p_target, TaskParameters):
        p_target = problem.param_vector(p_target)
    p_prior = np.asarray(p_prior, dtype=float)
    p_target = np.asarray(p_target, dtype=float)
    if p_prior.shape != p_target.shape:
        raise DimensionError(f"prior and target parameters differ in shape: {p_prior.shape} vs {p_target.shape}")

    state = AdaptState(k=0, xi=xi, p_current=p_prior.copy(), p_target=p_target, delta_p=p_target - p_prior)
    report = AdaptReport(termination="max_iters", iterations=0, final_dp_norm=np.nan, wall_time=0.0)
    cost = problem.cost(xi, p_target)
    state.cost_history.append(cost)
    report.costs.append(cost)
    report.dp_norms.append(float(np.max(np.abs(state.delta_p), initial=0.0)))
    phase = report.phase_times

    while True:
        dp_norm = float(np.max(np.abs(state.delta_p), initial=0.0))
        if dp_norm <= opts.dp_tol:
            report.termination = "converged"
            break
        if state.k >= opts.max_outer_iters:
            report.termination = "max_iters"
            break

        t = time.perf_counter()
        bundle = problem.derivatives(state.xi, state.p_current, want=("hessian", "mixed"))
        state.hessian, state.mixed = bundle.hessian, bundle.mixed
        phase["derivatives"] += time.perf_counter() - t

        t = time.perf_counter()
        try:
            S = argmin_jacobian(bundle, opts.hessian_damping)
            S.xi, S.p = state.xi.copy(), state.p_current.copy()
        except SingularityError as exc:
            phase["linear_solve"] += time.perf_counter() - t
            report.termination = "singular"
            report.message = str(exc)
            break
        phase["linear_solve"] += time.perf_counter() - t

        t = time.perf_counter()
        eta, cand, cand_cost, f_old = line_search(problem, state, S, bounds, opts)
        phase["line_search"] += time.perf_counter() - t
        if eta is None:
            report.termination = "eta_exhausted"
            break

        if cand_cost > f_old:
            report.eq10_violations += 1
        assert cand_cost <= f_old, "accepted step increased the cost at the target parameters"

        state.xi = cand
        state.p_current = forward_roll(problem, cand)
        state.delta_p = p_target - state.p_current
        state.k += 1
        state.eta_history.append(eta)
        state.cost_history.append(cand_cost)
        report.etas.append(eta)
        report.costs.append(cand_cost)
        report.dp_norms.append(float(np.max(np.abs(state.delta_p), initial=0.0)))

    report.iterations = state.k
    report.final_dp_norm = float(np.max(np.abs(state.delta_p), initial=0.0))
    report.wall_time = time.perf_counter() - t0
    logger.debug(
        "adapt: %s after %d iterations, |dp| %.3g, cost %.6g",
        report.termination,
        report.iterations,
        report.final_dp_norm,
        state.cost_history[-1],
    )
    return state.xi, report
