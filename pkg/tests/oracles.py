"""Reference implementations written without the package's vectorized code paths.

Everything here uses explicit per-link matrices, Python loops and the
``math`` module so that agreement with the library is meaningful.
"""

import math

import numpy as np


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]], dtype=float)


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)


def trans(x, y, z):
    T = np.eye(4)
    T[:3, 3] = (x, y, z)
    return T


def dh_link(a, d, alpha, theta, convention):
    if convention == "classic":
        return rot_z(theta) @ trans(0, 0, d) @ trans(a, 0, 0) @ rot_x(alpha)
    return rot_x(alpha) @ trans(a, 0, 0) @ rot_z(theta) @ trans(0, 0, d)


def fk_matrix(model, q):
    T = np.array(model.base_transform, dtype=float)
    for j, qi in zip(model.joints, q):
        T = T @ dh_link(j.a, j.d, j.alpha, qi + j.theta_offset, j.convention)
    return T @ np.array(model.tool_transform, dtype=float)


def wrap(x):
    """Shortest-arc angle in (-pi, pi]."""
    y = math.atan2(math.sin(x), math.cos(x))
    return math.pi if y == -math.pi else y


def euler_zyx(R):
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return roll, pitch, yaw


def pose(model, q):
    T = fk_matrix(model, q)
    return T[:3, 3].copy(), euler_zyx(T[:3, :3])


def smoothness(xi, weights=(1.0, 1.0, 1.0)):
    xi = np.asarray(xi, dtype=float)
    m = xi.shape[0]
    total = 0.0
    stencils = {1: (-1, 1), 2: (1, -2, 1), 3: (-1, 3, -3, 1)}
    for k, w in zip((1, 2, 3), weights):
        coeffs = stencils[k]
        for t in range(m - k):
            diff = sum(c * xi[t + i] for i, c in enumerate(coeffs))
            total += w * float(np.dot(diff, diff))
    return total


def orientation_term(model, xi, o_d, axis_w):
    total = 0.0
    for q in xi:
        _, eul = pose(model, q)
        for a in range(3):
            total += axis_w[a] * wrap(eul[a] - o_d[a]) ** 2
    return total


def boundary_cost(model, xi, q0, qm, o_d, axis_w, w_smooth, w_b, w_o):
    b = sum((xi[0][i] - q0[i]) ** 2 for i in range(len(q0))) + sum((xi[-1][i] - qm[i]) ** 2 for i in range(len(qm)))
    return w_smooth_cost(xi, w_smooth) + w_b * b + w_o * orientation_term(model, xi, o_d, axis_w)


def tracking_cost(model, xi, tracked, targets, o_d, axis_w, w_smooth, w_o, w_t):
    t_sum = 0.0
    for t, x_d in zip(tracked, targets):
        pos, _ = pose(model, xi[t])
        t_sum += sum((pos[i] - x_d[i]) ** 2 for i in range(3))
    return w_smooth_cost(xi, w_smooth) + w_o * orientation_term(model, xi, o_d, axis_w) + w_t * t_sum


def w_smooth_cost(xi, w_smooth):
    return smoothness(xi, w_smooth)


def central_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
