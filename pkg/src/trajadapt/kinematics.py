"""Serial-chain forward kinematics from Denavit-Hartenberg tables.

Orientation is reported as intrinsic Z-Y-X Euler angles ``(roll, pitch, yaw)``
with ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``, every angle wrapped to (-pi, pi].

Each joint transform is affine in ``(cos theta, sin theta)``::

    T(theta) = A cos(theta) + B sin(theta) + C

which lets the value path and the second-order derivative path share the same
precomputed constant matrices.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ._jet import Jet, atan2, sqrt
from .exceptions import DimensionError, ModelValidationError, SchemaError

GIMBAL_TOL = 1e-9

MODEL_SCHEMA = {
    "type": "object",
    "required": ["name", "convention", "links", "lower_limits", "upper_limits"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "convention": {"enum": ["classic", "modified"]},
        "links": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["a", "d", "alpha"],
                "additionalProperties": False,
                "properties": {
                    "a": {"type": "number"},
                    "d": {"type": "number"},
                    "alpha": {"type": "number"},
                    "theta_offset": {"type": "number"},
                },
            },
        },
        "lower_limits": {"type": "array", "items": {"type": "number"}},
        "upper_limits": {"type": "array", "items": {"type": "number"}},
        "base_transform": {"type": "array", "items": {"type": "number"}, "minItems": 16, "maxItems": 16},
        "tool_transform": {"type": "array", "items": {"type": "number"}, "minItems": 16, "maxItems": 16},
    },
}

BUNDLED_MODELS = ("planar3", "panda")


def wrap_angle(x):
    """Wrap angles to the half-open interval (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    return np.pi - np.mod(np.pi - x, 2.0 * np.pi)


@dataclass(frozen=True)
class DHRow:
    a: float
    d: float
    alpha: float
    theta_offset: float = 0.0
    convention: str = "classic"

    def transform(self, q):
        """Homogeneous transform of this link for joint value ``q`` (oracle-style, scalar)."""
        th = q + self.theta_offset
        ct, st = np.cos(th), np.sin(th)
        ca, sa = np.cos(self.alpha), np.sin(self.alpha)
        if self.convention == "classic":
            return np.array(
                [
                    [ct, -st * ca, st * sa, self.a * ct],
                    [st, ct * ca, -ct * sa, self.a * st],
                    [0.0, sa, ca, self.d],
                    [0.0, 0.0, 0.0, 1.0],
                ]
            )
        return np.array(
            [
                [ct, -st, 0.0, self.a],
                [st * ca, ct * ca, -sa, -sa * self.d],
                [st * sa, ct * sa, ca, ca * self.d],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )

    def affine_parts(self):
        """Constant matrices ``(A, B, C)`` with ``T = A cos + B sin + C``."""
        ca, sa = np.cos(self.alpha), np.sin(self.alpha)
        A = np.zeros((4, 4))
        B = np.zeros((4, 4))
        C = np.zeros((4, 4))
        C[3, 3] = 1.0
        if self.convention == "classic":
            A[0, 0], A[0, 3], A[1, 1], A[1, 2] = 1.0, self.a, ca, -sa
            B[0, 1], B[0, 2], B[1, 0], B[1, 3] = -ca, sa, 1.0, self.a
            C[2, 1], C[2, 2], C[2, 3] = sa, ca, self.d
        else:
            A[0, 0], A[1, 1], A[2, 1] = 1.0, ca, sa
            B[0, 1], B[1, 0], B[2, 0] = -1.0, ca, sa
            C[0, 3] = self.a
            C[1, 2], C[1, 3] = -sa, -sa * self.d
            C[2, 2], C[2, 3] = ca, ca * self.d
        return A, B, C


@dataclass(frozen=True, eq=False)
class RobotModel:
    name: str
    joints: tuple
    lower_limits: np.ndarray
    upper_limits: np.ndarray
    base_transform: np.ndarray = field(default_factory=lambda: np.eye(4))
    tool_transform: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        lo = np.asarray(self.lower_limits, dtype=float)
        hi = np.asarray(self.upper_limits, dtype=float)
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "lower_limits", lo)
        object.__setattr__(self, "upper_limits", hi)
        object.__setattr__(self, "base_transform", np.asarray(self.base_transform, dtype=float).reshape(4, 4))
        object.__setattr__(self, "tool_transform", np.asarray(self.tool_transform, dtype=float).reshape(4, 4))
        n = len(self.joints)
        if n < 1:
            raise ModelValidationError("robot model needs at least one joint")
        if lo.shape != (n,) or hi.shape != (n,):
            raise ModelValidationError(f"joint limits must have length {n}, got {lo.shape} and {hi.shape}")
        bad = np.flatnonzero(~(lo < hi))
        if bad.size:
            i = int(bad[0])
            raise ModelValidationError(f"joint {i}: lower limit {lo[i]} is not below upper limit {hi[i]}")
        if len({j.convention for j in self.joints}) != 1:
            raise ModelValidationError("DH convention must be uniform across a model")
        for arr in (lo, hi, self.base_transform, self.tool_transform):
            arr.setflags(write=False)

    @property
    def n(self):
        return len(self.joints)

    @property
    def convention(self):
        return self.joints[0].convention

    @cached_property
    def _affine(self):
        parts = [j.affine_parts() for j in self.joints]
        A = np.stack([p[0] for p in parts])
        B = np.stack([p[1] for p in parts])
        C = np.stack([p[2] for p in parts])
        offsets = np.array([j.theta_offset for j in self.joints])
        for arr in (A, B, C, offsets):
            arr.setflags(write=False)
        return A, B, C, offsets

    @cached_property
    def reach(self):
        """Upper bound on the end-effector distance from the first joint axis.

        Sum of link lengths ``sqrt(a^2 + d^2)`` plus the tool offset; the first
        row's ``d`` is excluded since it lies along the first joint axis.
        """
        lengths = [np.hypot(j.a, j.d) for j in self.joints]
        lengths[0] = abs(self.joints[0].a)
        return float(sum(lengths) + np.linalg.norm(self.tool_transform[:3, 3]))

    def within_limits(self, q, atol=0.0):
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.lower_limits - atol) and np.all(q <= self.upper_limits + atol))


@dataclass(frozen=True, eq=False)
class Pose:
    position: np.ndarray
    orientation: np.ndarray  # (roll, pitch, yaw)
    degenerate: bool = False

    @property
    def roll(self):
        return float(self.orientation[0])

    @property
    def pitch(self):
        return float(self.orientation[1])

    @property
    def yaw(self):
        return float(self.orientation[2])


# ---------------------------------------------------------------------------
# loading


def _model_from_dict(data):
    try:
        jsonschema.validate(data, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"robot model field '{where}': {exc.message}") from None
    conv = data["convention"]
    joints = [
        DHRow(a=l["a"], d=l["d"], alpha=l["alpha"], theta_offset=l.get("theta_offset", 0.0), convention=conv)
        for l in data["links"]
    ]
    kwargs = {}
    if "base_transform" in data:
        kwargs["base_transform"] = np.array(data["base_transform"], dtype=float).reshape(4, 4)
    if "tool_transform" in data:
        kwargs["tool_transform"] = np.array(data["tool_transform"], dtype=float).reshape(4, 4)
    return RobotModel(
        name=data["name"],
        joints=joints,
        lower_limits=data["lower_limits"],
        upper_limits=data["upper_limits"],
        **kwargs,
    )


def load_robot_model(path):
    """Load and validate a robot-model JSON file.

    ``path`` may also be the name of a bundled model (``"planar3"`` or ``"panda"``).
    """
    if isinstance(path, str) and path in BUNDLED_MODELS:
        text = resources.files("trajadapt").joinpath(f"data/models/{path}.json").read_text()
        source = path
    else:
        p = Path(path)
        if not p.is_file():
            raise SchemaError(f"robot model file not found: {p}")
        text = p.read_text()
        source = str(p)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return _model_from_dict(data)


def model_to_dict(model):
    return {
        "name": model.name,
        "convention": model.convention,
        "links": [{"a": j.a, "d": j.d, "alpha": j.alpha, "theta_offset": j.theta_offset} for j in model.joints],
        "lower_limits": model.lower_limits.tolist(),
        "upper_limits": model.upper_limits.tolist(),
        "base_transform": model.base_transform.ravel().tolist(),
        "tool_transform": model.tool_transform.ravel().tolist(),
    }


# ---------------------------------------------------------------------------
# rotations


def euler_to_matrix(euler):
    """Rotation matrix for Z-Y-X Euler angles ``(roll, pitch, yaw)``; batched over leading axes."""
    euler = np.asarray(euler, dtype=float)
    r, p, y = euler[..., 0], euler[..., 1], euler[..., 2]
    cr, sr, cp, sp, cy, sy = np.cos(r), np.sin(r), np.cos(p), np.sin(p), np.cos(y), np.sin(y)
    R = np.empty(euler.shape[:-1] + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def matrix_to_euler(R):
    """Z-Y-X Euler angles from rotation matrices.

    Returns ``(euler, degenerate)``.  At gimbal lock (|pitch| within
    ``GIMBAL_TOL`` of pi/2) yaw is set to 0 and the full residual rotation is
    attributed to roll.
    """
    R = np.asarray(R, dtype=float)
    cp = np.hypot(R[..., 2, 1], R[..., 2, 2])
    pitch = np.arctan2(-R[..., 2, 0], cp)
    yaw = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    roll = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    degenerate = np.abs(np.pi / 2 - np.abs(pitch)) < GIMBAL_TOL
    if np.any(degenerate):
        lock_roll = np.arctan2(-R[..., 2, 0] * R[..., 0, 1], R[..., 1, 1])
        yaw = np.where(degenerate, 0.0, yaw)
        roll = np.where(degenerate, lock_roll, roll)
    euler = wrap_angle(np.stack([roll, pitch, yaw], axis=-1))
    return euler, degenerate


# ---------------------------------------------------------------------------
# forward kinematics


def _check_q(model, q):
    q = np.asarray(q, dtype=float)
    if q.ndim == 0 or q.shape[-1] != model.n:
        raise DimensionError(f"joint vector must have trailing length {model.n}, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise DimensionError("joint vector contains non-finite entries")
    return q


def fk_matrices(model, q):
    """End-effector homogeneous transforms for joint arrays of shape ``(..., n)``."""
    q = _check_q(model, q)
    A, B, C, offsets = model._affine
    th = q + offsets
    c = np.cos(th)[..., None, None]
    s = np.sin(th)[..., None, None]
    links = A * c + B * s + C  # (..., n, 4, 4)
    T = np.broadcast_to(model.base_transform, q.shape[:-1] + (4, 4))
    for i in range(model.n):
        T = T @ links[..., i, :, :]
    return T @ model.tool_transform


def fk_batch(model, q):
    """Vectorized FK: ``(positions (...,3), euler (...,3), degenerate (...))``."""
    T = fk_matrices(model, q)
    euler, degenerate = matrix_to_euler(T[..., :3, :3])
    return T[..., :3, 3].copy(), euler, degenerate


def forward_kinematics(model, q):
    """End-effector :class:`Pose` for a single configuration."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n,):
        raise DimensionError(f"expected a joint vector of length {model.n}, got shape {q.shape}")
    pos, eul, deg = fk_batch(model, q)
    return Pose(pos, eul, bool(deg))


def fk_along_trajectory(model, xi):
    """One :class:`Pose` per waypoint of a ``(m, n)`` trajectory (flat waypoint-major also accepted)."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        if xi.size % model.n:
            raise DimensionError(f"flat trajectory length {xi.size} is not a multiple of n={model.n}")
        xi = xi.reshape(-1, model.n)
    if xi.ndim != 2 or xi.shape[1] != model.n:
        raise DimensionError(f"trajectory must have shape (m, {model.n}), got {xi.shape}")
    pos, eul, deg = fk_batch(model, xi)
    return [Pose(pos[t], eul[t], bool(deg[t])) for t in range(xi.shape[0])]


def fk_jet(model, q):
    """Position and Euler-angle jets for configurations ``q`` of shape ``(m, n)``.

    Each waypoint's jet carries derivatives with respect to its own ``n``
    joint angles.  Returns ``(position, euler, cos_pitch)`` where ``position``
    and ``euler`` are jets with value shape ``(m, 3)`` and ``cos_pitch`` the
    plain array used to detect gimbal lock.
    """
    q = _check_q(model, q)
    if q.ndim != 2:
        raise DimensionError(f"expected (m, n) configurations, got shape {q.shape}")
    m, n = q.shape
    A, B, C, offsets = model._affine
    th = q + offsets
    c = np.cos(th)[..., None, None]
    s = np.sin(th)[..., None, None]
    Tv = A * c + B * s + C
    Td = B * c - A * s
    Tdd = -(A * c + B * s)

    v = np.broadcast_to(model.base_transform, (m, 4, 4)).copy()
    g = np.zeros((m, 4, 4, n))
    h = np.zeros((m, 4, 4, n, n))
    for i in range(n):
        tv, td, tdd = Tv[:, i], Td[:, i], Tdd[:, i]
        cross = np.einsum("mijk,mjl->milk", g, td)
        g_new = np.einsum("mijk,mjl->milk", g, tv)
        g_new[..., i] += v @ td
        h = np.einsum("mijkr,mjl->milkr", h, tv)
        h[..., :, i] += cross
        h[..., i, :] += cross
        h[..., i, i] += v @ tdd
        v = v @ tv
        g = g_new
    tool = model.tool_transform
    v = v @ tool
    g = np.einsum("mijk,jl->milk", g, tool)
    h = np.einsum("mijkr,jl->milkr", h, tool)
    P = Jet(v, g, h)

    pos = P[:, 0:3, 3]
    r00, r10, r20, r21, r22 = P[:, 0, 0], P[:, 1, 0], P[:, 2, 0], P[:, 2, 1], P[:, 2, 2]
    # derivatives are undefined at gimbal lock; callers check cos_pitch and report it
    with np.errstate(divide="ignore", invalid="ignore"):
        cp_jet = sqrt(r21.square() + r22.square())
        roll = atan2(r21, r22)
        pitch = atan2(-r20, cp_jet)
        yaw = atan2(r10, r00)
    euler = Jet(
        np.stack([roll.val, pitch.val, yaw.val], axis=-1),
        np.stack([roll.grad, pitch.grad, yaw.grad], axis=1),
        np.stack([roll.hess, pitch.hess, yaw.hess], axis=1),
    )
    return pos, euler, cp_jet.val
