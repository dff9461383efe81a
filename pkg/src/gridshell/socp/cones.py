"""Vectorised algebra for the nonnegative orthant and 3-dimensional Lorentz cones.

Second-order cone blocks are stored as ``(k, 3)`` arrays ``v`` with
``v[:, 0] >= norm(v[:, 1:])``.  Rotated cones ``2 a b >= c**2`` map onto this
form through the symmetric orthogonal involution ``ROT``.
"""

from __future__ import annotations

import numpy as np

_R = 1.0 / np.sqrt(2.0)
ROT = np.array([[_R, _R, 0.0], [_R, -_R, 0.0], [0.0, 0.0, 1.0]])
J = np.array([1.0, -1.0, -1.0])


def jdot(u, v):
    """Lorentz form u0 v0 - u1.v1 per block."""
    return u[:, 0] * v[:, 0] - u[:, 1] * v[:, 1] - u[:, 2] * v[:, 2]


def jprod(u, v):
    """Jordan product u o v per block."""
    out = np.empty_like(u)
    out[:, 0] = np.einsum("ij,ij->i", u, v)
    out[:, 1:] = u[:, :1] * v[:, 1:] + v[:, :1] * u[:, 1:]
    return out


def jdiv(lam, d, det=None):
    """Solve lam o u = d for u per block; ``det`` is lam0^2 - |lam1|^2 if known."""
    if det is None:
        det = lorentz_norm(lam) ** 2
    u = np.empty_like(d)
    # a degenerate lam yields non-finite entries, which the step rejects
    with np.errstate(invalid="ignore", divide="ignore"):
        u[:, 0] = (lam[:, 0] * d[:, 0] - lam[:, 1] * d[:, 1] - lam[:, 2] * d[:, 2]) / det
        u[:, 1:] = (d[:, 1:] - u[:, :1] * lam[:, 1:]) / lam[:, :1]
    return u


def identity(k):
    e = np.zeros((k, 3))
    e[:, 0] = 1.0
    return e


def lorentz_norm(v):
    """sqrt(v0^2 - |v1|^2), factored to avoid cancellation near the boundary."""
    r = np.hypot(v[:, 1], v[:, 2])
    return np.sqrt(np.maximum((v[:, 0] - r) * (v[:, 0] + r), 0.0))


def soc_residual(v):
    """v0 - |v1|; positive strictly inside the cone."""
    return v[:, 0] - np.hypot(v[:, 1], v[:, 2])


def soc_step(v, d):
    """Largest alpha with v + alpha d in the cone (inf if unbounded), per block."""
    a = jdot(d, d)
    b = jdot(v, d)
    c = lorentz_norm(v) ** 2
    disc = np.sqrt(np.maximum(b * b - a * c, 0.0))
    den = -b + disc
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(den > 0.0, c / den, np.inf)
    alpha = np.where((a > 0.0) & (d[:, 0] > 0.0), np.inf, alpha)
    return np.maximum(alpha, 0.0)


def orthant_step(v, d):
    with np.errstate(divide="ignore"):
        ratio = np.where(d < 0.0, -v / d, np.inf)
    return ratio


class NTScaling:
    """Nesterov-Todd scaling W with W z = W^{-1} x = lam for SOC blocks."""

    def __init__(self, x, z):
        xn = lorentz_norm(x)
        zn = lorentz_norm(z)
        xb = x / xn[:, None]
        zb = z / zn[:, None]
        gamma = np.sqrt(0.5 * (1.0 + np.einsum("ij,ij->i", xb, zb)))
        wb = (xb + zb * J) / (2.0 * gamma[:, None])
        self.eta = np.sqrt(xn / zn)
        self.wb = wb
        self.lam = self.apply(z)
        # lam0^2 - |lam1|^2 = |x|_J |z|_J, without the cancellation
        self.lam_det = xn * zn

    def _apply(self, v, sign):
        w0 = self.wb[:, :1]
        w1 = sign * self.wb[:, 1:]
        v0 = v[:, :1]
        v1 = v[:, 1:]
        dot = np.sum(w1 * v1, axis=1, keepdims=True)
        out = np.empty_like(v)
        out[:, :1] = w0 * v0 + dot
        out[:, 1:] = v0 * w1 + v1 + w1 * dot / (1.0 + w0)
        return out

    def apply(self, v):
        return self.eta[:, None] * self._apply(v, 1.0)

    def apply_inv(self, v):
        return self._apply(v, -1.0) / self.eta[:, None]

    def inverse_matrix(self):
        """Dense W^{-1} blocks, shape (k, 3, 3)."""
        k = self.wb.shape[0]
        cols = [self.apply_inv(np.tile(np.eye(3)[j], (k, 1))) for j in range(3)]
        return np.stack(cols, axis=2)

    def hessian(self):
        """Dense W^{-2} blocks, shape (k, 3, 3)."""
        wi = self.inverse_matrix()
        h = wi @ wi
        return 0.5 * (h + np.swapaxes(h, 1, 2))
