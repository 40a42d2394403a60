"""Pure numpy implementation of the matrix Fisher moment kernels.

The normalizing constant (normalized Haar measure, c(0) = 1) of a matrix
Fisher distribution with singular values s is evaluated through the 1-D
Bessel representation

    c(s) = int_{-1}^{1} 1/2 I0((s1-s2)(1-u)/2) I0((s1+s2)(1+u)/2) exp(s3 u) du

after mapping s onto the canonical chamber s1 >= s2 >= |s3|. With
t = 1 - u and exponentially scaled Bessel functions the integrand peaks at
t = 0 with width ~1/(s2+s3); composite Gauss-Legendre panels are graded
geometrically (ratio 4) towards both ends of [0, 2] so that any concentration is
resolved to machine precision.

Gradient and Hessian of log c come from differentiating under the integral.
The compiled extension ``_kernels`` mirrors this module function by function.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import i0e, i1e

GL_ORDER = 14
EXP_CUTOFF = 45.0
WARM_ACCEPT = 1e-4
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


def _canonical(s1, s2, s3):
    """Signed permutation mapping ``s`` to s1 >= s2 >= |s3|.

    Returns (c, order, tau) with ``c[k] = tau[k] * s[order[k]]`` and
    ``prod(tau) = +1`` so the map is realized by a proper rotation.
    """
    s = (s1, s2, s3)
    order = sorted(range(3), key=lambda i: -abs(s[i]))
    t0 = -1.0 if s[order[0]] < 0 else 1.0
    t1 = -1.0 if s[order[1]] < 0 else 1.0
    tau = (t0, t1, t0 * t1)
    c = tuple(tau[k] * s[order[k]] for k in range(3))
    return c, order, tau


def _breakpoints(c1, c2, c3):
    lam = max(c2 + c3, 0.5 * (c1 - c2), 1.0)
    k_lo = min(int(np.ceil(0.5 * np.log2(32.0 * lam))), 100)
    bp = [0.0] + [2.0 * 4.0 ** -k for k in range(k_lo, 0, -1)]
    upper = 2.0
    if c2 + c3 > 0.0:
        upper = min(2.0, EXP_CUTOFF / (c2 + c3))
    bp = [b for b in bp if b < upper] + [upper]
    if upper == 2.0 and c1 + c2 > 2.0:
        k_hi = int(np.ceil(0.5 * np.log2(8.0 * (c1 + c2))))
        bp += [2.0 - 2.0 * 4.0 ** -k for k in range(1, k_hi + 1)]
    return tuple(sorted(set(bp)))


@lru_cache(maxsize=512)
def _nodes(bp):
    bp = np.asarray(bp)
    lo, hi = bp[:-1], bp[1:]
    half = 0.5 * (hi - lo)
    t = (half[:, None] * _GL_X + 0.5 * (hi + lo)[:, None]).ravel()
    w = (half[:, None] * _GL_W).ravel()
    return t, w


def _integrands(c1, c2, c3, hessian):
    t, w = _nodes(_breakpoints(c1, c2, c3))
    a = 0.5 * (c1 - c2) * t
    b = 0.5 * (c1 + c2) * (2.0 - t)
    e = 0.5 * np.exp(-(c2 + c3) * t)
    u = 1.0 - t
    p = 0.5 * t
    q = 1.0 - p
    a0, b0 = i0e(a), i0e(b)
    a1, b1 = i1e(a), i1e(b)
    f = e * a0 * b0
    g1 = e * (a1 * p * b0 + a0 * b1 * q)
    g2 = e * (-a1 * p * b0 + a0 * b1 * q)
    jac = w @ f
    d = np.array([w @ g1, w @ g2, w @ (u * f)]) / jac
    logc = c1 + c2 + c3 + np.log(jac)
    if not hessian:
        return logc, d, None
    a2 = _bessel_i1_prime_scaled(a, a0, a1)
    b2 = _bessel_i1_prime_scaled(b, b0, b1)
    pp = e * a2 * p * p * b0
    qq = e * a0 * b2 * q * q
    pq = 2.0 * e * a1 * b1 * p * q
    h = np.empty((3, 3))
    h[0, 0] = w @ (pp + pq + qq)
    h[1, 1] = w @ (pp - pq + qq)
    h[0, 1] = h[1, 0] = w @ (qq - pp)
    h[0, 2] = h[2, 0] = w @ (u * g1)
    h[1, 2] = h[2, 1] = w @ (u * g2)
    h[2, 2] = w @ (u * u * f)
    h = h / jac - np.outer(d, d)
    return logc, d, h


def _bessel_i1_prime_scaled(x, x0, x1):
    # exp(-x) * I1'(x) = i0e(x) - i1e(x)/x, with its series at the origin
    small = x < 1e-6
    xs = np.where(small, 1.0, x)
    return np.where(small, np.exp(-x) * (0.5 + 0.1875 * x * x), x0 - x1 / xs)


def log_c(s1, s2, s3):
    c, _, _ = _canonical(s1, s2, s3)
    return float(_integrands(*c, hessian=False)[0])


def moments(s1, s2, s3):
    """Return ``(log c, d1, d2, d3)`` with ``d = grad log c``."""
    c, order, tau = _canonical(s1, s2, s3)
    logc, dc, _ = _integrands(*c, hessian=False)
    d = [0.0, 0.0, 0.0]
    for k in range(3):
        d[order[k]] = tau[k] * dc[k]
    return float(logc), d[0], d[1], d[2]


def moments_hess(s1, s2, s3):
    """Return ``(log c, d, H)`` with ``H`` the Hessian of log c."""
    c, order, tau = _canonical(s1, s2, s3)
    logc, dc, hc = _integrands(*c, hessian=True)
    sgn = np.zeros((3, 3))
    for k in range(3):
        sgn[k, order[k]] = tau[k]
    d = sgn.T @ dc
    h = sgn.T @ hc @ sgn
    return float(logc), d, h


def initial_guesses(d1, d2, d3):
    """Low- and high-concentration starting points for the moment inversion."""
    guesses = []
    e1, e2, e3 = 1.0 - d1, 1.0 - d2, 1.0 - d3
    x1, x2, x3 = e2 + e3 - e1, e1 + e3 - e2, e1 + e2 - e3
    if x1 > 0.0 and x2 > 0.0 and x3 > 0.0:
        y1, y2, y3 = 1.0 / x1, 1.0 / x2, 1.0 / x3
        guesses.append((0.5 * (y2 + y3 - y1), 0.5 * (y1 + y3 - y2), 0.5 * (y1 + y2 - y3)))
    guesses.append((3.0 * d1, 3.0 * d2, 3.0 * d3))
    return guesses


def fit_s(d1, d2, d3, w1=0.0, w2=0.0, w3=0.0, use_warm=False, tol=1e-11, maxiter=100):
    """Solve ``grad log c(s) = d`` by damped Newton iteration.

    Returns ``(s1, s2, s3, log c, iterations, converged)``.
    """
    target = np.array([d1, d2, d3])
    starts = initial_guesses(d1, d2, d3)
    if use_warm:
        starts.insert(0, (w1, w2, w3))
    best = None
    # screen starting points with the cheaper gradient-only evaluation
    for st in starts:
        s = np.array(st, dtype=float)
        logc, d1_, d2_, d3_ = moments(*s)
        r = np.array([d1_, d2_, d3_]) - target
        nr = np.max(np.abs(r))
        if best is None or nr < best[0]:
            best = (nr, s, logc, r)
        if nr < WARM_ACCEPT:
            break
    nr, s, logc, r = best
    if nr > tol:
        h = moments_hess(*s)[2]
    it = 0
    while nr > tol and it < maxiter:
        it += 1
        step = np.linalg.solve(h, -r)
        alpha = 1.0
        accepted = False
        for _ in range(60):
            s_new = s + alpha * step
            logc_new, d_new, h_new = moments_hess(*s_new)
            r_new = d_new - target
            nr_new = np.max(np.abs(r_new))
            if nr_new < nr:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        s, logc, r, h, nr = s_new, logc_new, r_new, h_new, nr_new
    return float(s[0]), float(s[1]), float(s[2]), float(logc), it, bool(nr <= tol)
