"""Rotation-group primitives on SO(3).

Conventions: ``hat(x) @ y == cross(x, y)``; rotations are 3x3 numpy arrays.
Most functions accept stacked inputs (leading batch axes) where noted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonSkewInput

SMALL_ANGLE = 1e-8
ROTATION_TOL = 1e-9


def hat(v):
    """Skew-symmetric matrix of ``v``; works on (..., 3) arrays."""
    v = np.asarray(v, dtype=float)
    m = np.zeros(v.shape[:-1] + (3, 3))
    m[..., 0, 1] = -v[..., 2]
    m[..., 0, 2] = v[..., 1]
    m[..., 1, 0] = v[..., 2]
    m[..., 1, 2] = -v[..., 0]
    m[..., 2, 0] = -v[..., 1]
    m[..., 2, 1] = v[..., 0]
    return m


def vee(m, tol=1e-6):
    """Inverse of :func:`hat`. Raises ``NonSkewInput`` if ``m`` is not skew."""
    m = np.asarray(m, dtype=float)
    resid = np.max(np.abs(m + np.swapaxes(m, -1, -2)), initial=0.0)
    if resid > tol:
        raise NonSkewInput(f"symmetric residual {resid:.3g} exceeds {tol:g}")
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def exp_so3(v):
    """Rodrigues' formula; vectorized over leading axes of ``v``."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)[..., None, None]
    k = hat(v)
    k2 = k @ k
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return np.eye(3) + a * k + b * k2


def log_so3(r):
    """Rotation vector of ``r`` with norm in [0, pi]."""
    r = np.asarray(r, dtype=float)
    cos_t = np.clip(0.5 * (np.trace(r) - 1.0), -1.0, 1.0)
    skew = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    # atan2 stays well conditioned near 0 and pi, unlike arccos
    theta = np.arctan2(np.linalg.norm(skew), cos_t)
    if theta < SMALL_ANGLE:
        return skew
    if cos_t > -0.99:
        return theta / np.sin(theta) * skew
    # near pi: axis from the symmetric part, sign from the skew part
    sym = 0.5 * (r + r.T) - cos_t * np.eye(3)
    i = int(np.argmax(np.diag(sym)))
    axis = sym[:, i] / np.sqrt(sym[i, i])
    axis /= np.linalg.norm(axis)
    if axis @ skew < 0.0:
        axis = -axis
    return theta * axis


@dataclass(frozen=True)
class ProperSVD:
    """``f = u @ diag(s) @ v.T`` with ``u, v`` in SO(3) and ``s1 >= s2 >= |s3|``.

    When singular values coincide, ``u`` and ``v`` are not unique; compare
    products such as :meth:`matrix` or :meth:`rotation` instead.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def matrix(self):
        return (self.u * self.s) @ self.v.T

    def rotation(self):
        return self.u @ self.v.T


def proper_svd(f):
    f = np.asarray(f, dtype=float)
    u, s, vt = np.linalg.svd(f)
    du = np.linalg.det(u)
    dv = np.linalg.det(vt)
    u = u.copy()
    v = vt.T.copy()
    s = s.copy()
    if du < 0:
        u[:, 2] = -u[:, 2]
    if dv < 0:
        v[:, 2] = -v[:, 2]
    s[2] *= np.sign(du) * np.sign(dv)
    return ProperSVD(u, s, v)


def polar_rotation(m):
    """Closest rotation ``U diag(1, 1, det(U V^T)) V^T``; vectorized."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    d = np.sign(np.linalg.det(u @ vt))
    u = u.copy()
    u[..., :, 2] *= d[..., None]
    return u @ vt


def project_to_so3(m):
    """Renormalize a drifted rotation matrix."""
    return polar_rotation(m)


def is_rotation(m, tol=ROTATION_TOL):
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    return (np.linalg.norm(m @ m.T - np.eye(3)) <= tol
            and abs(np.linalg.det(m) - 1.0) <= tol)


def geodesic_angle(a, b):
    """Rotation angle of ``a^T b`` in radians; vectorized."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = np.swapaxes(a, -1, -2) @ b
    cos_t = 0.5 * (np.trace(m, axis1=-2, axis2=-1) - 1.0)
    sin_t = 0.5 * np.sqrt((m[..., 2, 1] - m[..., 1, 2]) ** 2 + (m[..., 0, 2] - m[..., 2, 0]) ** 2
                          + (m[..., 1, 0] - m[..., 0, 1]) ** 2)
    return np.arctan2(sin_t, cos_t)


def quat_to_rot(q):
    """Rotation matrices from (..., 4) quaternions, scalar first."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    r = np.empty(q.shape[:-1] + (3, 3))
    r[..., 0, 0] = w * w + x * x - y * y - z * z
    r[..., 0, 1] = 2 * (x * y - w * z)
    r[..., 0, 2] = 2 * (x * z + w * y)
    r[..., 1, 0] = 2 * (x * y + w * z)
    r[..., 1, 1] = w * w - x * x + y * y - z * z
    r[..., 1, 2] = 2 * (y * z - w * x)
    r[..., 2, 0] = 2 * (x * z - w * y)
    r[..., 2, 1] = 2 * (y * z + w * x)
    r[..., 2, 2] = w * w - x * x - y * y + z * z
    return r


def sample_uniform(rng, size=None):
    """Haar-uniform rotations from normalized Gaussian quaternions."""
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    q = rng.standard_normal(shape + (4,))
    return quat_to_rot(q)
