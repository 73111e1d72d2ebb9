"""Waypoint trajectories, joint-limit boxes and finite-difference smoothness.

A trajectory ``xi`` is an ``(m, n)`` array: ``m`` waypoints of ``n`` joint
angles.  Its flat form ``xi.ravel()`` is waypoint-major (all joints of the
first waypoint, then the second, ...); every Hessian index in the package
relies on that layout.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import DimensionError

MIN_WAYPOINTS = 4
DEFAULT_ORDER_WEIGHTS = (1.0, 1.0, 1.0)


def as_trajectory(xi, n=None, m=None):
    """Validate and return ``xi`` as a float ``(m, n)`` array.

    A flat waypoint-major vector is reshaped when ``n`` is given.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1 and n is not None:
        if xi.size % n:
            raise DimensionError(f"flat trajectory of length {xi.size} is not a multiple of n={n}")
        xi = xi.reshape(-1, n)
    if xi.ndim != 2:
        raise DimensionError(f"trajectory must be 2-D (m, n), got shape {xi.shape}")
    if n is not None and xi.shape[1] != n:
        raise DimensionError(f"trajectory has {xi.shape[1]} joints, expected {n}")
    if m is not None and xi.shape[0] != m:
        raise DimensionError(f"trajectory has {xi.shape[0]} waypoints, expected {m}")
    if xi.shape[0] < MIN_WAYPOINTS:
        raise DimensionError(f"need at least {MIN_WAYPOINTS} waypoints, got {xi.shape[0]}")
    if not np.all(np.isfinite(xi)):
        raise DimensionError("trajectory contains non-finite entries")
    return xi


@dataclass(frozen=True, eq=False)
class BoxBounds:
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        lb = np.asarray(self.lb, dtype=float)
        ub = np.asarray(self.ub, dtype=float)
        if lb.shape != ub.shape:
            raise DimensionError(f"bound shapes differ: {lb.shape} vs {ub.shape}")
        if not np.all(lb < ub):
            raise DimensionError("lower bounds must be strictly below upper bounds")
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @classmethod
    def from_model(cls, model, m):
        """Joint limits tiled over ``m`` waypoints."""
        return cls(np.tile(model.lower_limits, (m, 1)), np.tile(model.upper_limits, (m, 1)))

    @classmethod
    def unbounded(cls, shape, big=1e12):
        return cls(np.full(shape, -big), np.full(shape, big))

    @property
    def shape(self):
        return self.lb.shape

    def contains(self, xi):
        xi = np.asarray(xi, dtype=float)
        return bool(np.all(xi >= self.lb) and np.all(xi <= self.ub))


def project(xi, bounds):
    """Clamp ``xi`` elementwise onto ``bounds``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != bounds.shape:
        raise DimensionError(f"trajectory shape {xi.shape} does not match bounds {bounds.shape}")
    return np.clip(xi, bounds.lb, bounds.ub)


def interpolate_seed(q_start, q_end, m):
    """Joint-space straight line with ``m`` waypoints including both endpoints."""
    q_start = np.asarray(q_start, dtype=float)
    q_end = np.asarray(q_end, dtype=float)
    if q_start.shape != q_end.shape or q_start.ndim != 1:
        raise DimensionError(f"endpoint shapes differ: {q_start.shape} vs {q_end.shape}")
    if m < MIN_WAYPOINTS:
        raise DimensionError(f"need at least {MIN_WAYPOINTS} waypoints, got {m}")
    s = np.linspace(0.0, 1.0, m)[:, None]
    xi = (1.0 - s) * q_start + s * q_end
    xi[0], xi[-1] = q_start, q_end
    return xi


def finite_difference(xi, order):
    """Forward difference of the given order along the waypoint axis (axis -2)."""
    return np.diff(xi, n=order, axis=-2)


def smoothness_terms(xi):
    """Per-order sums ``sum_t ||D^k q_t||^2`` for ``k = 1, 2, 3``; batched over leading axes."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-2] < MIN_WAYPOINTS:
        raise DimensionError(f"need at least {MIN_WAYPOINTS} waypoints, got {xi.shape[-2]}")
    return np.stack([np.sum(finite_difference(xi, k) ** 2, axis=(-2, -1)) for k in (1, 2, 3)], axis=-1)


def smoothness_cost(xi, order_weights=DEFAULT_ORDER_WEIGHTS):
    w = np.asarray(order_weights, dtype=float)
    if w.shape != (3,):
        raise DimensionError("order_weights must have length 3")
    return smoothness_terms(xi) @ w


@lru_cache(maxsize=64)
def _difference_gram(m, order_weights):
    L = np.zeros((m, m))
    for k, w in zip((1, 2, 3), order_weights):
        if w:
            D = np.diff(np.eye(m), n=k, axis=0)
            L += w * (D.T @ D)
    L.setflags(write=False)
    return L


def smoothness_gram(m, order_weights=DEFAULT_ORDER_WEIGHTS):
    """``(m, m)`` matrix ``L`` with ``smoothness_cost(xi) == trace(xi.T @ L @ xi)``.

    The gradient is ``2 L xi`` and the Hessian ``2 kron(L, I_n)``.
    """
    return _difference_gram(int(m), tuple(float(w) for w in order_weights))
