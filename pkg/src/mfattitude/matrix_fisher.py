"""Matrix Fisher distribution on SO(3).

The density with respect to the normalized Haar measure is

    p(R) = exp(tr(F^T R)) / c(F),    c(0) = 1,

and c depends on F only through its proper singular values s. The moment
diagonal d = grad log c(s) gives the first moment E(R) = U diag(d) V^T.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import so3
from ._backend import kernels
from .errors import (DegenerateMode, EfficiencyGuard, NoConvergence,
                     NonAttainableMoment, OverflowGuard)

# Largest |s_i| accepted. The kernels work in the log domain, so the limit
# only keeps the moment inversion well conditioned (1 - d ~ 1/s).
MAX_CONCENTRATION = 1e6
# Minimum slack kept on the binding face d1 + d2 - d3 <= 1 of the moment set.
MOMENT_MARGIN = 1e-6
# Inputs further than this outside the moment set are rejected, not clamped.
CLAMP_LIMIT = 1e-3
MAX_NEWTON_ITER = 100
REJECTION_MAX_SUM = 40.0
DEGENERATE_TOL = 1e-9


def _check_s(s):
    s = np.asarray(s, dtype=float).reshape(3)
    if not np.all(np.isfinite(s)):
        raise OverflowGuard(f"non-finite concentration {s}")
    if np.max(np.abs(s)) > MAX_CONCENTRATION:
        raise OverflowGuard(f"|s| = {np.max(np.abs(s)):.3g} exceeds {MAX_CONCENTRATION:g}")
    return s


@lru_cache(maxsize=4096)
def _moments_cached(key):
    return kernels.moments(*key)


def _moments(s):
    s = _check_s(s)
    if not np.any(s):
        # uniform law: c = 1 exactly under the normalized Haar measure
        return 0.0, np.zeros(3)
    key = tuple(float(x) for x in np.round(s, 12))
    logc, d1, d2, d3 = _moments_cached(key)
    return logc, np.array([d1, d2, d3])


def log_c(s, method="bessel"):
    """Log normalizing constant of M(diag(s)).

    ``method="bessel"`` uses the fast 1-D integral kernel; ``"haar"`` integrates
    directly over SO(3) and serves as the reference path (moderate s only).
    """
    if method == "bessel":
        return _moments(s)[0]
    if method == "haar":
        return haar_log_c(_check_s(s))
    raise ValueError(f"unknown method {method!r}")


def dlog_c(s):
    """Gradient of log c at ``s``: the moment diagonal (d1, d2, d3)."""
    return _moments(s)[1]


def hess_log_c(s):
    """Hessian of log c at ``s``."""
    s = _check_s(s)
    return kernels.moments_hess(*s)[2]


def haar_log_c(s, tol=1e-12, max_n=256):
    """Log c(s) by brute-force quadrature over ZYZ Euler angles.

    Trapezoid rule in the two periodic angles, Gauss-Legendre in cos(beta);
    the grid is doubled until two successive estimates agree to ``tol``.
    """
    s1, s2, s3 = np.asarray(s, dtype=float)
    shift = abs(s1) + abs(s2) + abs(s3)
    prev = None
    n = 16
    while n <= max_n:
        ang = 2.0 * np.pi * np.arange(n) / n
        x, w = np.polynomial.legendre.leggauss(n)
        ca, sa = np.cos(ang)[:, None], np.sin(ang)[:, None]
        cg, sg = np.cos(ang)[None, :], np.sin(ang)[None, :]
        total = 0.0
        for cb, wb in zip(x, w):
            r11 = ca * cb * cg - sa * sg
            r22 = -sa * cb * sg + ca * cg
            total += wb * np.exp(s1 * r11 + s2 * r22 + s3 * cb - shift).sum()
        val = np.log(total / (2.0 * n * n)) + shift
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return float(val)
        prev = val
        n *= 2
    return float(prev)


@dataclass
class FitDiagnostics:
    """Counters accumulated by :func:`fit_from_moment`."""

    fits: int = 0
    clamps: int = 0
    nonconvergences: int = 0
    newton_iterations: int = 0

    def merge(self, other):
        self.fits += other.fits
        self.clamps += other.clamps
        self.nonconvergences += other.nonconvergences
        self.newton_iterations += other.newton_iterations

    def as_dict(self):
        return dict(fits=self.fits, clamps=self.clamps,
                    nonconvergences=self.nonconvergences,
                    newton_iterations=self.newton_iterations)


class MatrixFisher:
    """Matrix Fisher distribution with cached proper SVD and moment data.

    Build from a parameter matrix with ``MatrixFisher(f)`` or from known
    factors with :meth:`from_svd`. Instances are treated as immutable.
    """

    __slots__ = ("f", "svd", "logc", "d")

    def __init__(self, f, *, _svd=None, _logc=None, _d=None):
        f = np.array(f, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(f)):
            raise OverflowGuard("non-finite parameter matrix")
        svd = _svd if _svd is not None else so3.proper_svd(f)
        if _logc is None:
            _logc, _d = _moments(svd.s)
        f.setflags(write=False)
        self.f = f
        self.svd = svd
        self.logc = float(_logc)
        self.d = np.asarray(_d, dtype=float)

    @classmethod
    def from_svd(cls, u, s, v, logc=None, d=None):
        s = np.asarray(s, dtype=float)
        svd = so3.ProperSVD(np.asarray(u, dtype=float), s, np.asarray(v, dtype=float))
        return cls(svd.matrix(), _svd=svd, _logc=logc, _d=d)

    @property
    def s(self):
        return self.svd.s

    @property
    def u(self):
        return self.svd.u

    @property
    def v(self):
        return self.svd.v

    @property
    def mode_is_unique(self):
        return self.s[1] + self.s[2] > DEGENERATE_TOL

    def __repr__(self):
        return f"MatrixFisher(s={np.array2string(self.s, precision=4)})"


def log_density(mf, r):
    """``tr(F^T R) - log c(F)``; ``r`` may be a stack of rotations."""
    r = np.asarray(r, dtype=float)
    return np.einsum("ij,...ij->...", mf.f, r) - mf.logc


def first_moment(mf):
    """E(R) = U diag(d) V^T."""
    return (mf.u * mf.d) @ mf.v.T


def mode(mf, strict=False):
    """Density maximizer U V^T.

    When s2 + s3 is (numerically) zero the maximizer is not unique; the gauge
    representative is returned unless ``strict`` is set.
    """
    if strict and not mf.mode_is_unique:
        raise DegenerateMode(f"s2 + s3 = {mf.s[1] + mf.s[2]:.3g}")
    return mf.svd.rotation()


def clamp_moment_diagonal(d):
    """Pull ``d`` into the attainable moment set.

    The attainable set (first moments of rotation-valued variables, in proper
    singular value coordinates) is a tetrahedron; for ordered d the binding
    face is d1 + d2 - d3 <= 1. Returns ``(d, clamped)``.
    """
    d = np.asarray(d, dtype=float)
    face = d[0] + d[1] - d[2]
    if face <= 1.0 - MOMENT_MARGIN:
        return d, False
    if face > 1.0 + CLAMP_LIMIT:
        raise NonAttainableMoment(f"moment diagonal {d} lies outside the attainable set")
    return d * ((1.0 - MOMENT_MARGIN) / face), True


def fit_from_moment(m, warm_s=None, diagnostics=None):
    """Matrix Fisher distribution whose first moment is ``m``.

    Solves grad log c(s) = d for the proper singular values d of ``m`` by
    damped Newton iteration. ``warm_s`` seeds the solver (e.g. the previous
    step's concentration). Counters go to ``diagnostics`` when given.
    """
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise NonAttainableMoment("non-finite moment matrix")
    svd = so3.proper_svd(m)
    d, clamped = clamp_moment_diagonal(svd.s)
    if warm_s is None:
        res = kernels.fit_s(d[0], d[1], d[2], tol=1e-11, maxiter=MAX_NEWTON_ITER)
    else:
        w = np.asarray(warm_s, dtype=float)
        res = kernels.fit_s(d[0], d[1], d[2], w[0], w[1], w[2], True,
                            1e-11, MAX_NEWTON_ITER)
    s1, s2, s3, logc, iters, converged = res
    if diagnostics is not None:
        diagnostics.fits += 1
        diagnostics.clamps += int(clamped)
        diagnostics.newton_iterations += iters
        diagnostics.nonconvergences += int(not converged)
    if not converged:
        raise NoConvergence(f"moment inversion failed for d = {d}")
    s = _check_s((s1, s2, s3))
    return MatrixFisher.from_svd(svd.u, s, svd.v, logc=logc, d=d)


def _bingham_b(lam):
    # root of sum 1/(b + 2 lam_i) = 1 on (0, 4]
    g = lambda b: np.sum(1.0 / (b + 2.0 * lam)) - 1.0
    if g(4.0) >= 0.0:
        return 4.0
    return brentq(g, 1e-12, 4.0, xtol=1e-14)


def _sample_acg(s, rng, n):
    # Bingham on unit quaternions: density ~ exp(-q^T A q)
    lam = 2.0 * np.array([0.0, s[1] + s[2], s[0] + s[2], s[0] + s[1]])
    lam = np.maximum(lam, 0.0)
    b = _bingham_b(lam)
    omega = 1.0 + 2.0 * lam / b
    log_bound = -0.5 * (4.0 - b) + 2.0 * np.log(4.0 / b)
    out = np.empty((0, 4))
    while out.shape[0] < n:
        batch = max(16, int(1.3 * (n - out.shape[0])) + 8)
        y = rng.standard_normal((batch, 4)) / np.sqrt(omega)
        q = y / np.linalg.norm(y, axis=1, keepdims=True)
        quad_a = (q * q) @ lam
        quad_o = (q * q) @ omega
        log_ratio = -quad_a + 2.0 * np.log(quad_o) - log_bound
        keep = np.log(rng.uniform(size=batch)) < log_ratio
        out = np.concatenate([out, q[keep]])
    return so3.quat_to_rot(out[:n])


def _sample_uniform_rejection(s, rng, n):
    total = float(np.sum(s))
    if total > REJECTION_MAX_SUM:
        raise EfficiencyGuard(f"s1 + s2 + s3 = {total:.3g} exceeds {REJECTION_MAX_SUM:g}")
    out = []
    have = 0
    while have < n:
        r = so3.sample_uniform(rng, max(64, 2 * (n - have)))
        tr = r[:, 0, 0] * s[0] + r[:, 1, 1] * s[1] + r[:, 2, 2] * s[2]
        keep = rng.uniform(size=len(r)) < np.exp(tr - total)
        out.append(r[keep])
        have += int(keep.sum())
    return np.concatenate(out)[:n]


def sample(mf, rng, size=None, method="bingham"):
    """Exact draws from ``mf``.

    ``method="bingham"`` maps the distribution to a Bingham law on unit
    quaternions and uses an angular central Gaussian envelope, which stays
    efficient at any concentration. ``method="uniform"`` proposes Haar-uniform
    rotations and accepts with probability exp(tr(S Q) - sum(s)); it is only
    allowed for s1 + s2 + s3 <= 40.
    """
    n = 1 if size is None else int(size)
    s = mf.s
    if method == "bingham":
        q = _sample_acg(s, rng, n)
    elif method == "uniform":
        q = _sample_uniform_rejection(s, rng, n)
    else:
        raise ValueError(f"unknown method {method!r}")
    r = mf.u @ q @ mf.v.T
    return r[0] if size is None else r

