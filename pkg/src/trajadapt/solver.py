"""Bound-constrained projected Newton minimizer.

Used to compute prior optimal trajectories and the warm-started re-solve that
adaptation is compared against.  Works with any problem object exposing
``shape``, ``cost``, ``cost_batch`` and ``derivatives`` (see ``costs``).
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .costs import TaskParameters
from .exceptions import DimensionError, TrajAdaptError

logger = logging.getLogger(__name__)

MAX_DAMPING_ESCALATIONS = 40


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 500
    grad_tol: float = 1e-6
    step_tol: float = 1e-10
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    hessian_damping: float = 1e-8

    def __post_init__(self):
        for name in ("max_iters", "grad_tol", "step_tol", "armijo_c", "hessian_damping"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SolveOptions.{name} must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("SolveOptions.backtrack_factor must lie in (0, 1)")

    @classmethod
    def from_dict(cls, data):
        return cls(**(data or {}))


@dataclass
class Solution:
    xi_star: np.ndarray
    cost: float
    iterations: int
    converged: bool
    wall_time: float
    projected_grad_norm: float = np.nan
    message: str = ""
    cost_history: list = field(default_factory=list, repr=False)


def projected_gradient(x, g, lb, ub):
    """``x - P(x - g)``: zero exactly at first-order stationary points of the box problem."""
    return x - np.clip(x - g, lb, ub)


def _newton_direction(H, g, free, damping):
    """Damped Newton step on the free coordinates; zero on the frozen ones."""
    d = np.zeros_like(g)
    if not free.any():
        return d, 0.0
    Hf = H[np.ix_(free, free)]
    gf = g[free]
    mu = damping * (1.0 + abs(np.trace(Hf)) / Hf.shape[0])
    for _ in range(MAX_DAMPING_ESCALATIONS):
        try:
            factor = scipy.linalg.cho_factor(Hf + mu * np.eye(Hf.shape[0]), check_finite=False)
        except np.linalg.LinAlgError:
            mu *= 10.0
            continue
        d[free] = -scipy.linalg.cho_solve(factor, gf, check_finite=False)
        return d, mu
    d[free] = -gf
    return d, np.inf


def solve(problem, p, xi0, bounds, options=None):
    """Minimize ``problem.cost(., p)`` over ``bounds`` starting from ``xi0``.

    Each iteration freezes coordinates sitting on a bound whose gradient
    points outward, takes a Levenberg-damped Newton step on the rest and
    backtracks (Armijo) along the projected path.  Returns the first iterate
    whose projected gradient has infinity norm at most ``grad_tol``.
    """
    opts = options or SolveOptions()
    t0 = time.perf_counter()
    if isinstance(p, TaskParameters):
        p = problem.param_vector(p)
    p = np.asarray(p, dtype=float)
    shape = tuple(problem.shape)
    xi0 = np.asarray(xi0, dtype=float)
    if xi0.size != int(np.prod(shape)):
        raise DimensionError(f"initial trajectory has {xi0.size} entries, expected shape {shape}")
    if bounds.shape != shape:
        raise DimensionError(f"bounds shape {bounds.shape} does not match problem shape {shape}")
    lb, ub = bounds.lb.ravel(), bounds.ub.ravel()
    x = np.clip(xi0.ravel(), lb, ub)

    f = problem.cost(x.reshape(shape), p)
    if not np.isfinite(f):
        raise TrajAdaptError(f"non-finite cost {f} at the initial trajectory")
    history = [f]
    converged = False
    message = "max_iters reached"
    pg_norm = np.inf
    it = 0
    while True:
        bundle = problem.derivatives(x.reshape(shape), p, want=("gradient", "hessian"))
        g = bundle.gradient
        pg_norm = float(np.max(np.abs(projected_gradient(x, g, lb, ub)), initial=0.0))
        if pg_norm <= opts.grad_tol:
            converged = True
            message = "projected gradient below tolerance"
            break
        if it >= opts.max_iters:
            break
        eps = min(1e-8, pg_norm)
        at_lb = (x <= lb + eps) & (g > 0)
        at_ub = (x >= ub - eps) & (g < 0)
        free = ~(at_lb | at_ub)
        d, _ = _newton_direction(bundle.hessian, g, free, opts.hessian_damping)

        alpha = 1.0
        accepted = False
        while alpha >= opts.step_tol:
            x_new = np.clip(x + alpha * d, lb, ub)
            f_new = problem.cost(x_new.reshape(shape), p)
            if f_new <= f and f_new <= f + opts.armijo_c * float(g @ (x_new - x)):
                accepted = True
                break
            alpha *= opts.backtrack_factor
        if not accepted:
            message = "line search failed"
            break
        x, f = x_new, f_new
        history.append(f)
        it += 1

    wall = time.perf_counter() - t0
    logger.debug("solve: %s after %d iterations, cost %.6g, |pg| %.3g", message, it, f, pg_norm)
    return Solution(
        xi_star=x.reshape(shape),
        cost=float(f),
        iterations=it,
        converged=converged,
        wall_time=wall,
        projected_grad_norm=pg_norm,
        message=message,
        cost_history=history,
    )


def resolve_warm(problem, prior, p_new, bounds, options=None):
    """Re-solve for new parameters starting from a previous solution."""
    xi0 = prior.xi_star if isinstance(prior, Solution) else prior
    return solve(problem, p_new, xi0, bounds, options)
