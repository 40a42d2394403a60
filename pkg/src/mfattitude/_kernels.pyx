# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled matrix Fisher moment kernels.

Same algorithm and call signatures as ``_kernels_py``; see that module for
the quadrature layout.
"""
import numpy as np

from libc.math cimport exp, log, ceil, log2, fabs, fmin, fmax
from scipy.special.cython_special cimport i0e, i1e

cdef enum:
    GL_ORDER = 14
    MAX_BP = 256

cdef double EXP_CUTOFF = 45.0
cdef double WARM_ACCEPT = 1e-4
cdef double GL_X[GL_ORDER]
cdef double GL_W[GL_ORDER]

_x, _w = np.polynomial.legendre.leggauss(GL_ORDER)
for _i in range(GL_ORDER):
    GL_X[_i] = _x[_i]
    GL_W[_i] = _w[_i]


cdef struct Canon:
    double c[3]
    int order[3]
    double tau[3]


cdef Canon _canonical(double s1, double s2, double s3) nogil:
    cdef Canon out
    cdef double s[3]
    cdef double a[3]
    cdef int i, j, tmp
    s[0] = s1; s[1] = s2; s[2] = s3
    for i in range(3):
        a[i] = fabs(s[i])
        out.order[i] = i
    # stable insertion sort by descending |s|
    for i in range(1, 3):
        j = i
        while j > 0 and a[out.order[j - 1]] < a[out.order[j]]:
            tmp = out.order[j - 1]
            out.order[j - 1] = out.order[j]
            out.order[j] = tmp
            j -= 1
    out.tau[0] = -1.0 if s[out.order[0]] < 0 else 1.0
    out.tau[1] = -1.0 if s[out.order[1]] < 0 else 1.0
    out.tau[2] = out.tau[0] * out.tau[1]
    for i in range(3):
        out.c[i] = out.tau[i] * s[out.order[i]]
    return out


cdef int _breakpoints(double c1, double c2, double c3, double* bp) nogil:
    cdef double lam = fmax(fmax(c2 + c3, 0.5 * (c1 - c2)), 1.0)
    cdef int k_lo = <int>ceil(0.5 * log2(32.0 * lam))
    cdef int k_hi, k, n = 0, i, j
    cdef double upper = 2.0, b, tmp
    if c2 + c3 > 0.0:
        upper = fmin(2.0, EXP_CUTOFF / (c2 + c3))
    if k_lo > 100:
        k_lo = 100
    bp[n] = 0.0
    n += 1
    k = k_lo
    while k >= 1:
        b = 2.0 * 4.0 ** (-k)
        if b < upper:
            bp[n] = b
            n += 1
        k -= 1
    bp[n] = upper
    n += 1
    if upper == 2.0 and c1 + c2 > 2.0:
        k_hi = <int>ceil(0.5 * log2(8.0 * (c1 + c2)))
        if k_hi > MAX_BP - n - 1:
            k_hi = MAX_BP - n - 1
        for k in range(1, k_hi + 1):
            b = 2.0 - 2.0 * 4.0 ** (-k)
            if b > 1.0:
                bp[n] = b
                n += 1
        # insertion sort: the tail points arrive in ascending order after 2.0
        for i in range(1, n):
            tmp = bp[i]
            j = i
            while j > 0 and bp[j - 1] > tmp:
                bp[j] = bp[j - 1]
                j -= 1
            bp[j] = tmp
    return n


cdef inline double _i1p_scaled(double x, double x0, double x1) nogil:
    # exp(-x) * I1'(x) from x0 = i0e(x), x1 = i1e(x)
    if x < 1e-6:
        return exp(-x) * (0.5 + 0.1875 * x * x)
    return x0 - x1 / x


cdef double _integrate(double c1, double c2, double c3, double* d, double* h, bint hessian) nogil:
    """Fills d[3] (and h[9] when requested) in canonical coordinates; returns log c."""
    cdef double bp[MAX_BP]
    cdef int nb = _breakpoints(c1, c2, c3, bp)
    cdef int pi, gi
    cdef double lo, hi, half, mid, t, w, a, b, e, u, p, q
    cdef double a0, b0, a1, b1, a2, b2, f, g1, g2, pp, qq, pq
    cdef double jac = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef double h11 = 0.0, h22 = 0.0, h12 = 0.0, h13 = 0.0, h23 = 0.0, h33 = 0.0
    cdef double diff = 0.5 * (c1 - c2), summ = 0.5 * (c1 + c2), decay = c2 + c3
    for pi in range(nb - 1):
        lo = bp[pi]
        hi = bp[pi + 1]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        for gi in range(GL_ORDER):
            t = half * GL_X[gi] + mid
            w = half * GL_W[gi]
            a = diff * t
            b = summ * (2.0 - t)
            e = 0.5 * exp(-decay * t)
            u = 1.0 - t
            p = 0.5 * t
            q = 1.0 - p
            a0 = i0e(a)
            b0 = i0e(b)
            a1 = i1e(a)
            b1 = i1e(b)
            f = e * a0 * b0
            g1 = e * (a1 * p * b0 + a0 * b1 * q)
            g2 = e * (-a1 * p * b0 + a0 * b1 * q)
            jac += w * f
            s1 += w * g1
            s2 += w * g2
            s3 += w * u * f
            if hessian:
                a2 = _i1p_scaled(a, a0, a1)
                b2 = _i1p_scaled(b, b0, b1)
                pp = e * a2 * p * p * b0
                qq = e * a0 * b2 * q * q
                pq = 2.0 * e * a1 * b1 * p * q
                h11 += w * (pp + pq + qq)
                h22 += w * (pp - pq + qq)
                h12 += w * (qq - pp)
                h13 += w * u * g1
                h23 += w * u * g2
                h33 += w * u * u * f
    d[0] = s1 / jac
    d[1] = s2 / jac
    d[2] = s3 / jac
    if hessian:
        h[0] = h11 / jac - d[0] * d[0]
        h[4] = h22 / jac - d[1] * d[1]
        h[8] = h33 / jac - d[2] * d[2]
        h[1] = h[3] = h12 / jac - d[0] * d[1]
        h[2] = h[6] = h13 / jac - d[0] * d[2]
        h[5] = h[7] = h23 / jac - d[1] * d[2]
    return c1 + c2 + c3 + log(jac)


cdef double _eval(double s1, double s2, double s3, double* d, double* h, bint hessian) nogil:
    """Moments at arbitrary s: maps to the canonical chamber and back."""
    cdef Canon cn = _canonical(s1, s2, s3)
    cdef double dc[3]
    cdef double hc[9]
    cdef int i, j
    cdef double logc = _integrate(cn.c[0], cn.c[1], cn.c[2], dc, hc, hessian)
    for i in range(3):
        d[cn.order[i]] = cn.tau[i] * dc[i]
    if hessian:
        for i in range(3):
            for j in range(3):
                h[3 * cn.order[i] + cn.order[j]] = cn.tau[i] * cn.tau[j] * hc[3 * i + j]
    return logc


cdef bint _solve3(double* a, double* b, double* x) nogil:
    """Gaussian elimination with partial pivoting on a copy of a (row-major)."""
    cdef double m[3][4]
    cdef int i, j, k, piv
    cdef double tmp, fac
    for i in range(3):
        for j in range(3):
            m[i][j] = a[3 * i + j]
        m[i][3] = b[i]
    for k in range(3):
        piv = k
        for i in range(k + 1, 3):
            if fabs(m[i][k]) > fabs(m[piv][k]):
                piv = i
        if m[piv][k] == 0.0:
            return False
        if piv != k:
            for j in range(4):
                tmp = m[k][j]
                m[k][j] = m[piv][j]
                m[piv][j] = tmp
        for i in range(k + 1, 3):
            fac = m[i][k] / m[k][k]
            for j in range(k, 4):
                m[i][j] -= fac * m[k][j]
    for i in range(2, -1, -1):
        tmp = m[i][3]
        for j in range(i + 1, 3):
            tmp -= m[i][j] * x[j]
        x[i] = tmp / m[i][i]
    return True


cdef inline double _maxabs3(double* r) nogil:
    return fmax(fmax(fabs(r[0]), fabs(r[1])), fabs(r[2]))


def log_c(double s1, double s2, double s3):
    cdef double d[3]
    return _eval(s1, s2, s3, d, NULL, False)


def moments(double s1, double s2, double s3):
    cdef double d[3]
    cdef double logc = _eval(s1, s2, s3, d, NULL, False)
    return logc, d[0], d[1], d[2]


def moments_hess(double s1, double s2, double s3):
    cdef double d[3]
    cdef double h[9]
    cdef double logc = _eval(s1, s2, s3, d, h, True)
    return (logc, np.array([d[0], d[1], d[2]]),
            np.array([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]]))


def initial_guesses(double d1, double d2, double d3):
    guesses = [(3.0 * d1, 3.0 * d2, 3.0 * d3)]
    cdef double e1 = 1.0 - d1, e2 = 1.0 - d2, e3 = 1.0 - d3
    cdef double x1 = e2 + e3 - e1, x2 = e1 + e3 - e2, x3 = e1 + e2 - e3
    cdef double y1, y2, y3
    if x1 > 0.0 and x2 > 0.0 and x3 > 0.0:
        y1 = 1.0 / x1
        y2 = 1.0 / x2
        y3 = 1.0 / x3
        guesses.append((0.5 * (y2 + y3 - y1), 0.5 * (y1 + y3 - y2), 0.5 * (y1 + y2 - y3)))
    return guesses


def fit_s(double d1, double d2, double d3, double w1=0.0, double w2=0.0, double w3=0.0,
          bint use_warm=False, double tol=1e-11, int maxiter=100):
    cdef double target[3]
    cdef double starts[3][3]
    cdef int nstart = 0, k, i, it = 0, halvings
    cdef double e1 = 1.0 - d1, e2 = 1.0 - d2, e3 = 1.0 - d3
    cdef double x1 = e2 + e3 - e1, x2 = e1 + e3 - e2, x3 = e1 + e2 - e3
    cdef double s[3]
    cdef double s_new[3]
    cdef double dv[3]
    cdef double hv[9]
    cdef double h_new[9]
    cdef double r[3]
    cdef double r_new[3]
    cdef double step[3]
    cdef double neg_r[3]
    cdef double logc = 0.0, logc_new, nr = 1e300, nr_new, alpha
    cdef double best_nr = 1e300, best_logc = 0.0
    cdef double best_s[3]
    cdef double best_r[3]
    cdef bint accepted
    target[0] = d1; target[1] = d2; target[2] = d3
    if use_warm:
        starts[nstart][0] = w1; starts[nstart][1] = w2; starts[nstart][2] = w3
        nstart += 1
    if x1 > 0.0 and x2 > 0.0 and x3 > 0.0:
        starts[nstart][0] = 0.5 * (1.0 / x2 + 1.0 / x3 - 1.0 / x1)
        starts[nstart][1] = 0.5 * (1.0 / x1 + 1.0 / x3 - 1.0 / x2)
        starts[nstart][2] = 0.5 * (1.0 / x1 + 1.0 / x2 - 1.0 / x3)
        nstart += 1
    starts[nstart][0] = 3.0 * d1; starts[nstart][1] = 3.0 * d2; starts[nstart][2] = 3.0 * d3
    nstart += 1
    # screen starting points with the cheaper gradient-only evaluation
    for k in range(nstart):
        logc = _eval(starts[k][0], starts[k][1], starts[k][2], dv, hv, False)
        for i in range(3):
            r[i] = dv[i] - target[i]
        nr = _maxabs3(r)
        if nr < best_nr:
            best_nr = nr
            best_logc = logc
            for i in range(3):
                best_s[i] = starts[k][i]
                best_r[i] = r[i]
        if nr < WARM_ACCEPT:
            break
    nr = best_nr
    logc = best_logc
    for i in range(3):
        s[i] = best_s[i]
        r[i] = best_r[i]
    if nr > tol:
        _eval(s[0], s[1], s[2], dv, hv, True)
    while nr > tol and it < maxiter:
        it += 1
        for i in range(3):
            neg_r[i] = -r[i]
        if not _solve3(hv, neg_r, step):
            break
        alpha = 1.0
        accepted = False
        for halvings in range(60):
            for i in range(3):
                s_new[i] = s[i] + alpha * step[i]
            logc_new = _eval(s_new[0], s_new[1], s_new[2], dv, h_new, True)
            for i in range(3):
                r_new[i] = dv[i] - target[i]
            nr_new = _maxabs3(r_new)
            if nr_new < nr:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        nr = nr_new
        logc = logc_new
        for i in range(3):
            s[i] = s_new[i]
            r[i] = r_new[i]
        for i in range(9):
            hv[i] = h_new[i]
    return s[0], s[1], s[2], logc, it, nr <= tol
