"""Second-order forward-mode automatic differentiation.

A :class:`Jet` carries a value together with its gradient and Hessian with
respect to ``k`` seed variables.  Arrays of jets are stored "structure of
arrays" style so that whole batches (e.g. every waypoint of a trajectory)
propagate through one numpy call::

    val  : shape S
    grad : shape S + (k,)
    hess : shape S + (k, k)

Only the handful of primitives needed for forward kinematics and the task
costs are provided.
"""

import numpy as np


class Jet:
    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, val, k):
        val = np.asarray(val, dtype=float)
        return cls(val, np.zeros(val.shape + (k,)), np.zeros(val.shape + (k, k)))

    @classmethod
    def variables(cls, x):
        """Seed jets for ``x`` of shape ``(..., k)``: one variable per last-axis entry.

        The result has value shape ``(..., k)`` and unit gradients along the
        matching seed direction.
        """
        x = np.asarray(x, dtype=float)
        k = x.shape[-1]
        grad = np.broadcast_to(np.eye(k), x.shape + (k,)).copy()
        return cls(x.copy(), grad, np.zeros(x.shape + (k, k)))

    @property
    def nvars(self):
        return self.grad.shape[-1]

    @property
    def shape(self):
        return self.val.shape

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            raise IndexError("Jet indexing must spell out every value axis")
        pad = (slice(None),) * (self.val.ndim - len(idx))
        idx = idx + pad
        return Jet(self.val[idx], self.grad[idx], self.hess[idx])

    # -- arithmetic -------------------------------------------------------
    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val + other.val, self.grad + other.grad, self.hess + other.hess)
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val - other.val, self.grad - other.grad, self.hess - other.hess)
        return Jet(self.val - other, self.grad, self.hess)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self, other
            av, bv = a.val[..., None], b.val[..., None]
            outer = a.grad[..., :, None] * b.grad[..., None, :]
            return Jet(
                a.val * b.val,
                a.grad * bv + b.grad * av,
                a.hess * bv[..., None] + b.hess * av[..., None] + outer + np.swapaxes(outer, -1, -2),
            )
        c = np.asarray(other, dtype=float)
        return Jet(self.val * c, self.grad * c[..., None], self.hess * c[..., None, None])

    __rmul__ = __mul__

    def square(self):
        g = self.grad
        v = self.val[..., None]
        return Jet(
            self.val**2,
            2.0 * v * g,
            2.0 * (self.hess * v[..., None] + g[..., :, None] * g[..., None, :]),
        )

    def sum(self, axis):
        """Sum over a value axis (negative axes count from the last value axis)."""
        if axis < 0:
            axis += self.val.ndim
        return Jet(self.val.sum(axis), self.grad.sum(axis), self.hess.sum(axis))

    def _chain(self, f, df, d2f):
        g = self.grad
        return Jet(
            f,
            df[..., None] * g,
            df[..., None, None] * self.hess + d2f[..., None, None] * (g[..., :, None] * g[..., None, :]),
        )


def sin(x):
    s, c = np.sin(x.val), np.cos(x.val)
    return x._chain(s, c, -s)


def cos(x):
    s, c = np.sin(x.val), np.cos(x.val)
    return x._chain(c, -s, -c)


def sqrt(x):
    r = np.sqrt(x.val)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = 0.5 / r
        d2 = -0.25 / (r * x.val)
    return x._chain(r, d1, d2)


def atan2(y, x):
    """Jet of ``arctan2(y, x)`` for two jets over the same seed variables."""
    yv, xv = y.val, x.val
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = xv * xv + yv * yv
        fy = xv / r2
        fx = -yv / r2
        r4 = r2 * r2
        fyy = -2.0 * xv * yv / r4
        fxx = -fyy
        fxy = (yv * yv - xv * xv) / r4
    gy, gx = y.grad, x.grad
    oyy = gy[..., :, None] * gy[..., None, :]
    oxx = gx[..., :, None] * gx[..., None, :]
    oyx = gy[..., :, None] * gx[..., None, :]
    hess = (
        fy[..., None, None] * y.hess
        + fx[..., None, None] * x.hess
        + fyy[..., None, None] * oyy
        + fxx[..., None, None] * oxx
        + fxy[..., None, None] * (oyx + np.swapaxes(oyx, -1, -2))
    )
    grad = fy[..., None] * gy + fx[..., None] * gx
    return Jet(np.arctan2(yv, xv), grad, hess)
