"""Task costs for the two benchmark families and their exact derivatives.

Two cost families share smoothness and orientation terms:

* boundary interpolation -- penalize the first/last waypoint's distance to the
  given start/end configurations; parameters ``p = (q_start, q_end)``.
* waypoint tracking -- penalize the end-effector distance to target positions
  at selected waypoints; parameters ``p`` = the stacked target positions.

Derivatives with respect to the trajectory come from exact second-order
forward-mode differentiation through the kinematic chain (see ``_jet``); the
smoothness part is quadratic and assembled in closed form.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from ._jet import Jet
from .exceptions import DerivativeError, DimensionError, SchemaError
from .kinematics import GIMBAL_TOL, fk_batch, fk_jet, wrap_angle
from .trajectory import as_trajectory, smoothness_cost, smoothness_gram

DEFAULT_AXIS_WEIGHTS = (1.0, 1.0, 0.0)


class TaskKind(str, Enum):
    BOUNDARY_CONFIGS = "boundary_configs"
    WAYPOINT_TRACK = "waypoint_track"


def _vec(x, length, name):
    x = np.asarray(x, dtype=float).reshape(-1)
    if length is not None and x.shape != (length,):
        raise DimensionError(f"{name} must have length {length}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DimensionError(f"{name} contains non-finite entries")
    return x


@dataclass(frozen=True, eq=False)
class TaskParameters:
    """Task specification; only the differentiated part is exposed by :meth:`vector`.

    The desired orientation and per-axis orientation weights are held fixed.
    """

    kind: TaskKind
    o_d: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation_axis_weights: np.ndarray = DEFAULT_AXIS_WEIGHTS
    q_start: np.ndarray = None
    q_end: np.ndarray = None
    tracked: tuple = ()
    targets: np.ndarray = None

    def __post_init__(self):
        kind = TaskKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "o_d", _vec(self.o_d, 3, "o_d"))
        aw = _vec(self.orientation_axis_weights, 3, "orientation_axis_weights")
        if np.any(aw < 0):
            raise DimensionError("orientation_axis_weights must be nonnegative")
        object.__setattr__(self, "orientation_axis_weights", aw)
        if kind is TaskKind.BOUNDARY_CONFIGS:
            if self.q_start is None or self.q_end is None:
                raise DimensionError("boundary task needs q_start and q_end")
            qs = _vec(self.q_start, None, "q_start")
            object.__setattr__(self, "q_start", qs)
            object.__setattr__(self, "q_end", _vec(self.q_end, qs.size, "q_end"))
        else:
            tracked = tuple(int(t) for t in self.tracked)
            if any(t < 0 for t in tracked) or any(b <= a for a, b in zip(tracked, tracked[1:])):
                raise DimensionError(f"tracked indices must be nonnegative and strictly increasing: {tracked}")
            targets = np.zeros((0, 3)) if self.targets is None else np.asarray(self.targets, dtype=float)
            targets = targets.reshape(-1, 3) if targets.size else np.zeros((0, 3))
            if targets.shape[0] != len(tracked):
                raise DimensionError(f"{len(tracked)} tracked indices but {targets.shape[0]} targets")
            if not np.all(np.isfinite(targets)):
                raise DimensionError("targets contain non-finite entries")
            object.__setattr__(self, "tracked", tracked)
            object.__setattr__(self, "targets", targets)

    @classmethod
    def boundary(cls, q_start, q_end, o_d=(0.0, 0.0, 0.0), axis_weights=DEFAULT_AXIS_WEIGHTS):
        return cls(TaskKind.BOUNDARY_CONFIGS, o_d, axis_weights, q_start=q_start, q_end=q_end)

    @classmethod
    def waypoints(cls, tracked, targets, o_d=(0.0, 0.0, 0.0), axis_weights=DEFAULT_AXIS_WEIGHTS):
        return cls(TaskKind.WAYPOINT_TRACK, o_d, axis_weights, tracked=tracked, targets=targets)

    @property
    def dim(self):
        if self.kind is TaskKind.BOUNDARY_CONFIGS:
            return 2 * self.q_start.size
        return 3 * len(self.tracked)

    def vector(self):
        """Flat parameter vector ``p``."""
        if self.kind is TaskKind.BOUNDARY_CONFIGS:
            return np.concatenate([self.q_start, self.q_end])
        return self.targets.reshape(-1).copy()

    def with_vector(self, p):
        """Same task with its differentiated parameters replaced by ``p``."""
        p = _vec(p, self.dim, "parameter vector")
        if self.kind is TaskKind.BOUNDARY_CONFIGS:
            n = self.q_start.size
            return TaskParameters.boundary(p[:n], p[n:], self.o_d, self.orientation_axis_weights)
        return TaskParameters.waypoints(self.tracked, p.reshape(-1, 3), self.o_d, self.orientation_axis_weights)

    def to_dict(self):
        out = {
            "kind": self.kind.value,
            "o_d": self.o_d.tolist(),
            "orientation_axis_weights": self.orientation_axis_weights.tolist(),
        }
        if self.kind is TaskKind.BOUNDARY_CONFIGS:
            out["q_start"] = self.q_start.tolist()
            out["q_end"] = self.q_end.tolist()
        else:
            out["tracked"] = list(self.tracked)
            out["targets"] = self.targets.tolist()
        return out

    @classmethod
    def from_dict(cls, data):
        try:
            kind = TaskKind(data["kind"])
            common = dict(
                o_d=data.get("o_d", (0.0, 0.0, 0.0)),
                axis_weights=data.get("orientation_axis_weights", DEFAULT_AXIS_WEIGHTS),
            )
            if kind is TaskKind.BOUNDARY_CONFIGS:
                return cls.boundary(data["q_start"], data["q_end"], **common)
            return cls.waypoints(data.get("tracked", ()), data.get("targets", ()), **common)
        except KeyError as exc:
            raise SchemaError(f"task parameters: missing field {exc}") from None
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"task parameters: {exc}") from None


@dataclass(frozen=True, eq=False)
class CostWeights:
    w_smooth: np.ndarray = (1.0, 1.0, 1.0)
    w_boundary: float = 1.0
    w_orient: float = 1.0
    w_track: float = 1.0

    def __post_init__(self):
        ws = _vec(self.w_smooth, 3, "w_smooth")
        object.__setattr__(self, "w_smooth", ws)
        for name in ("w_boundary", "w_orient", "w_track"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise DimensionError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if np.any(ws < 0) or min(self.w_boundary, self.w_orient, self.w_track) < 0:
            raise DimensionError("cost weights must be nonnegative")

    def to_dict(self):
        return {"smooth": self.w_smooth.tolist(), "boundary": self.w_boundary, "orient": self.w_orient, "track": self.w_track}

    @classmethod
    def from_dict(cls, data):
        data = data or {}
        unknown = set(data) - {"smooth", "boundary", "orient", "track"}
        if unknown:
            raise SchemaError(f"weights: unknown fields {sorted(unknown)}")
        return cls(
            w_smooth=data.get("smooth", (1.0, 1.0, 1.0)),
            w_boundary=data.get("boundary", 1.0),
            w_orient=data.get("orient", 1.0),
            w_track=data.get("track", 1.0),
        )


@dataclass
class DerivativeBundle:
    value: float
    gradient: np.ndarray = None
    hessian: np.ndarray = None
    mixed: np.ndarray = None


ALL_DERIVATIVES = frozenset({"gradient", "hessian", "mixed"})


class TrajectoryProblem:
    """Cost ``f(xi, p)`` of one task family on one robot.

    ``template`` fixes everything about the task except the flat parameter
    vector ``p`` (kind, tracked waypoint indices, desired orientation).
    Instances are immutable after construction and safe to share between
    threads.
    """

    def __init__(self, model, weights, template, m):
        self.model = model
        self.weights = weights
        self.template = template
        self.m = int(m)
        self.n = model.n
        if self.m < 4:
            raise DimensionError("need at least 4 waypoints")
        if template.kind is TaskKind.BOUNDARY_CONFIGS:
            if template.q_start.size != self.n:
                raise DimensionError(f"boundary configurations have {template.q_start.size} joints, model has {self.n}")
        elif template.tracked and template.tracked[-1] >= self.m:
            raise DimensionError(f"tracked index {template.tracked[-1]} out of range for m={self.m}")

    @property
    def kind(self):
        return self.template.kind

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def dim_p(self):
        return self.template.dim

    def param_vector(self, task):
        if task.kind is not self.kind:
            raise DimensionError(f"task kind {task.kind.value} does not match problem kind {self.kind.value}")
        return task.vector()

    def task(self, p):
        return self.template.with_vector(p)

    def _p(self, p):
        if isinstance(p, TaskParameters):
            p = self.param_vector(p)
        return _vec(p, self.dim_p, "parameter vector")

    @cached_property
    def _smooth_hessian(self):
        H = np.kron(2.0 * smoothness_gram(self.m, self.weights.w_smooth), np.eye(self.n))
        H.setflags(write=False)
        return H

    # -- values -------------------------------------------------------------
    def cost_terms(self, xi, p):
        """Unweighted-by-family breakdown ``{smooth, boundary, orient, track}`` (already weighted)."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-2:] != self.shape:
            raise DimensionError(f"trajectory shape {xi.shape} does not match {self.shape}")
        p = self._p(p)
        w = self.weights
        tmpl = self.template
        terms = {"smooth": smoothness_cost(xi, w.w_smooth)}
        zero = np.zeros(xi.shape[:-2])
        pos, eul, _ = fk_batch(self.model, xi)
        err = wrap_angle(eul - tmpl.o_d)
        terms["orient"] = w.w_orient * np.sum(err**2 * tmpl.orientation_axis_weights, axis=(-2, -1))
        if self.kind is TaskKind.BOUNDARY_CONFIGS:
            q0, qm = p[: self.n], p[self.n :]
            b = np.sum((xi[..., 0, :] - q0) ** 2, axis=-1) + np.sum((xi[..., -1, :] - qm) ** 2, axis=-1)
            terms["boundary"] = w.w_boundary * b
            terms["track"] = zero
        else:
            terms["boundary"] = zero
            if tmpl.tracked:
                d = pos[..., list(tmpl.tracked), :] - p.reshape(-1, 3)
                terms["track"] = w.w_track * np.sum(d**2, axis=(-2, -1))
            else:
                terms["track"] = zero
        return terms

    def cost_batch(self, xi, p):
        """Total cost for trajectories of shape ``(..., m, n)``."""
        t = self.cost_terms(xi, p)
        return t["smooth"] + t["boundary"] + t["orient"] + t["track"]

    def cost(self, xi, p):
        xi = np.asarray(xi, dtype=float).reshape(self.shape)
        return float(self.cost_batch(xi, p))

    # -- derivatives ----------------------------------------------------------
    def derivatives(self, xi, p, want=ALL_DERIVATIVES):
        xi = as_trajectory(np.asarray(xi, dtype=float).reshape(self.shape), n=self.n, m=self.m)
        p = self._p(p)
        want = frozenset(want)
        m, n, w, tmpl = self.m, self.n, self.weights, self.template
        dim = m * n

        pos, eul, cos_pitch = fk_jet(self.model, xi)
        axes = [a for a in range(3) if tmpl.orientation_axis_weights[a] > 0] if w.w_orient > 0 else []

        # per-waypoint value / gradient / Hessian of the FK-dependent terms
        per = Jet.constant(np.zeros(m), n)
        if axes:
            bad = np.flatnonzero(~(cos_pitch > GIMBAL_TOL))
            if bad.size:
                raise DerivativeError(
                    f"orientation derivative undefined at waypoint {int(bad[0])} (gimbal lock)", waypoint=int(bad[0])
                )
            for a in axes:
                e = eul[:, a] - tmpl.o_d[a]
                e = Jet(wrap_angle(e.val), e.grad, e.hess)
                per = per + e.square() * (w.w_orient * tmpl.orientation_axis_weights[a])

        mixed = np.zeros((dim, self.dim_p)) if "mixed" in want else None
        if self.kind is TaskKind.WAYPOINT_TRACK and tmpl.tracked:
            idx = list(tmpl.tracked)
            sel = pos[idx, :]
            d = sel - p.reshape(-1, 3)
            track = d.square().sum(-1) * w.w_track
            per.val[idx] += track.val
            per.grad[idx] += track.grad
            per.hess[idx] += track.hess
            if mixed is not None:
                for j, t in enumerate(idx):
                    mixed[t * n : (t + 1) * n, 3 * j : 3 * j + 3] = -2.0 * w.w_track * sel.grad[j].T

        value = float(smoothness_cost(xi, w.w_smooth) + per.val.sum())
        grad = self._smooth_hessian @ xi.ravel() + per.grad.reshape(-1)
        hess = None
        if "hessian" in want:
            hess = np.array(self._smooth_hessian)
            blocks = hess.reshape(m, n, m, n)
            ar = np.arange(m)
            blocks[ar, :, ar, :] += per.hess

        if self.kind is TaskKind.BOUNDARY_CONFIGS:
            q0, qm = p[:n], p[n:]
            wb = w.w_boundary
            value += wb * (float(np.sum((xi[0] - q0) ** 2)) + float(np.sum((xi[-1] - qm) ** 2)))
            grad[:n] += 2.0 * wb * (xi[0] - q0)
            grad[dim - n :] += 2.0 * wb * (xi[-1] - qm)
            if hess is not None:
                k = np.arange(n)
                hess[k, k] += 2.0 * wb
                hess[dim - n + k, dim - n + k] += 2.0 * wb
            if mixed is not None:
                k = np.arange(n)
                mixed[k, k] = -2.0 * wb
                mixed[dim - n + k, n + k] = -2.0 * wb

        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise DerivativeError("non-finite cost or gradient")
        return DerivativeBundle(
            value=value,
            gradient=grad if "gradient" in want or "hessian" in want else None,
            hessian=hess,
            mixed=mixed,
        )

    def forward_roll(self, xi):
        """Parameters actually achieved by ``xi`` (start/end waypoints or tracked end-effector positions)."""
        xi = np.asarray(xi, dtype=float).reshape(self.shape)
        if self.kind is TaskKind.BOUNDARY_CONFIGS:
            return np.concatenate([xi[0], xi[-1]])
        if not self.template.tracked:
            return np.zeros(0)
        pos, _, _ = fk_batch(self.model, xi[list(self.template.tracked)])
        return pos.reshape(-1)


class QuadraticProblem:
    """Model-free test problem ``f = 1/2 x'Ax - x'Bp + 1/2 p'Cp``.

    Its minimizer is ``A^-1 B p`` so the sensitivity map is exactly ``A^-1 B``.
    ``forward_roll`` returns the parameters for which ``x`` is optimal.
    """

    def __init__(self, A, B=None, C=None, shape=None):
        self.A = np.asarray(A, dtype=float)
        dim = self.A.shape[0]
        self.B = np.eye(dim) if B is None else np.asarray(B, dtype=float)
        self.C = np.zeros((self.B.shape[1],) * 2) if C is None else np.asarray(C, dtype=float)
        self.shape = (dim, 1) if shape is None else tuple(shape)
        if int(np.prod(self.shape)) != dim:
            raise DimensionError("shape does not match the size of A")

    @classmethod
    def identity(cls, dim):
        """``f = 1/2 ||x - p||^2``."""
        return cls(np.eye(dim), np.eye(dim), np.eye(dim))

    @property
    def dim_p(self):
        return self.B.shape[1]

    def cost_batch(self, xi, p):
        x = np.asarray(xi, dtype=float).reshape(np.shape(xi)[: np.ndim(xi) - len(self.shape)] + (-1,))
        p = np.asarray(p, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.A, x) - x @ (self.B @ p) + 0.5 * p @ self.C @ p

    def cost(self, xi, p):
        return float(self.cost_batch(np.reshape(xi, self.shape), p))

    def derivatives(self, xi, p, want=ALL_DERIVATIVES):
        x = np.asarray(xi, dtype=float).reshape(-1)
        p = np.asarray(p, dtype=float)
        return DerivativeBundle(
            value=self.cost(x, p),
            gradient=self.A @ x - self.B @ p,
            hessian=self.A.copy() if "hessian" in want else None,
            mixed=-self.B.copy() if "mixed" in want else None,
        )

    def forward_roll(self, xi):
        x = np.asarray(xi, dtype=float).reshape(-1)
        return np.linalg.lstsq(self.B, self.A @ x, rcond=None)[0]


# ---------------------------------------------------------------------------
# functional entry points


def _problem(xi, p, model, w):
    xi = np.asarray(xi, dtype=float)
    xi = xi.reshape(-1, model.n) if xi.ndim == 1 else xi
    return TrajectoryProblem(model, w or CostWeights(), p, xi.shape[-2]), xi


def boundary_interpolation_cost(xi, p, model, w=None):
    if p.kind is not TaskKind.BOUNDARY_CONFIGS:
        raise DimensionError("boundary_interpolation_cost needs boundary-configuration parameters")
    prob, xi = _problem(xi, p, model, w)
    return prob.cost(xi, p.vector())


def waypoint_tracking_cost(xi, p, model, w=None):
    if p.kind is not TaskKind.WAYPOINT_TRACK:
        raise DimensionError("waypoint_tracking_cost needs waypoint-tracking parameters")
    prob, xi = _problem(xi, p, model, w)
    return prob.cost(xi, p.vector())


def total_cost(xi, p, model, w=None):
    if p.kind is TaskKind.BOUNDARY_CONFIGS:
        return boundary_interpolation_cost(xi, p, model, w)
    return waypoint_tracking_cost(xi, p, model, w)


def derivatives(xi, p, model, w=None, want=ALL_DERIVATIVES):
    prob, xi = _problem(xi, p, model, w)
    return prob.derivatives(xi, p.vector(), want)
