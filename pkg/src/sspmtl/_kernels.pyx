# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: layered-medium ray sums, grazing-angle bisection and
cyclic Jacobi sweeps. Mirrors ``_kernels_py`` function for function."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, log1p, cos, acos, M_PI

cnp.import_array()

DEF ISO_EPS = 1e-9
DEF GUARD = 1e-10
DEF ANGLE_TOL = 1e-11

BACKEND = "cython"


cdef int _sums(const double[:] z, const double[:] s, Py_ssize_t i0, Py_ssize_t i1,
               double cos_theta, double* rng, double* tim, bint with_time=True) noexcept nogil:
    """Range and time over nodes lo..hi. Returns the turning node index or -1.

    With ``with_time`` false only the range is accumulated.
    """
    cdef Py_ssize_t lo = i0 if i0 < i1 else i1
    cdef Py_ssize_t hi = i1 if i0 < i1 else i0
    cdef double a = cos_theta / s[i0]
    cdef double g0, g1, c0, c1, dz, ds, q, x
    cdef double r = 0.0, t = 0.0
    cdef Py_ssize_t d
    c0 = a * s[lo]
    g0 = 1.0 - c0 * c0
    if g0 <= 0.0:
        return <int>lo
    g0 = sqrt(g0)
    for d in range(lo, hi):
        c1 = a * s[d + 1]
        g1 = 1.0 - c1 * c1
        if g1 <= 0.0:
            return <int>(d + 1)
        g1 = sqrt(g1)
        dz = z[d + 1] - z[d]
        r += dz * a * (s[d] + s[d + 1]) / (g0 + g1)
        if not with_time:
            g0 = g1
            continue
        ds = s[d + 1] - s[d]
        q = 1.0 + g0 + a * a * s[d] * (s[d] + s[d + 1]) / (g0 + g1)
        if fabs(ds) < ISO_EPS:
            t += dz / (s[d] * g0)
        else:
            x = -ds * q / (s[d + 1] * (1.0 + g0))
            t += fabs(dz * log1p(x) / ds)
        g0 = g1
    rng[0] = r
    tim[0] = t
    return -1


def ray_sums(const double[:] z, const double[:] s, Py_ssize_t i0, Py_ssize_t i1,
             double cos_theta):
    cdef double r = 0.0, t = 0.0
    cdef int turn = _sums(z, s, i0, i1, cos_theta, &r, &t)
    return r, t, turn


cdef double _theta_floor(const double[:] s, Py_ssize_t i0, Py_ssize_t i1) noexcept nogil:
    cdef Py_ssize_t lo = i0 if i0 < i1 else i1
    cdef Py_ssize_t hi = i1 if i0 < i1 else i0
    cdef double smax = s[i0]
    cdef Py_ssize_t d
    for d in range(lo, hi + 1):
        if s[d] > smax:
            smax = s[d]
    if smax <= s[i0]:
        return 0.0
    return acos(s[i0] / smax)


cdef int _solve(const double[:] z, const double[:] s, Py_ssize_t i0, Py_ssize_t i1,
                double target, double tol, int max_iter,
                double* theta_out, double* time_out, double* hmax_out) noexcept nogil:
    """Bisection for the grazing angle. Status 0 ok, 1 unreachable, 2 residual."""
    cdef double lo = _theta_floor(s, i0, i1) + GUARD
    cdef double hi = M_PI / 2.0
    cdef double r = 0.0, t = 0.0, mid
    cdef int k, turn
    turn = _sums(z, s, i0, i1, cos(lo), &r, &t)
    while turn >= 0 and lo < hi:
        lo += 10.0 * (lo - _theta_floor(s, i0, i1)) + GUARD
        turn = _sums(z, s, i0, i1, cos(lo), &r, &t)
    hmax_out[0] = r
    if target > r:
        return 1
    if target <= 0.0:
        _sums(z, s, i0, i1, 0.0, &r, &t)
        theta_out[0] = hi
        time_out[0] = t
        return 0
    for k in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= ANGLE_TOL:
            break
        _sums(z, s, i0, i1, cos(mid), &r, &t, False)
        if r > target:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    _sums(z, s, i0, i1, cos(mid), &r, &t)
    theta_out[0] = mid
    time_out[0] = t
    if fabs(r - target) >= tol:
        return 2
    return 0


def solve_angle(const double[:] z, const double[:] s, Py_ssize_t i0, Py_ssize_t i1,
                double target, double tol=1e-3, int max_iter=200):
    cdef double theta = 0.0, t = 0.0, hmax = 0.0
    cdef int status = _solve(z, s, i0, i1, target, tol, max_iter, &theta, &t, &hmax)
    return theta, t, status, hmax


def solve_many(const double[:] z, const double[:] s, Py_ssize_t i0,
               const long[:] i1, const double[:] targets,
               double tol=1e-3, int max_iter=200):
    """Vector of direct-path solutions sharing one source node."""
    cdef Py_ssize_t n = targets.shape[0], k
    theta = np.empty(n)
    times = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    hmax = np.empty(n)
    cdef double[:] th = theta
    cdef double[:] tt = times
    cdef long[:] st = status
    cdef double[:] hm = hmax
    cdef double a, b, c
    with nogil:
        for k in range(n):
            st[k] = _solve(z, s, i0, i1[k], targets[k], tol, max_iter, &a, &b, &c)
            th[k] = a
            tt[k] = b
            hm[k] = c
    return theta, times, status, hmax


def jacobi_eigh(a_in, double tol_rel=1e-12, int max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns, sweeps used), unsorted.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.array(a_in, dtype=np.float64, order="C")
    cdef Py_ssize_t n = A.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V = np.eye(n)
    cdef double[:, ::1] a = A
    cdef double[:, ::1] v = V
    cdef double fro = 0.0, off, apq, theta, t, c, sn, akp, akq, g
    cdef Py_ssize_t i, j, p, q, k
    cdef int sweep = 0
    for i in range(n):
        for j in range(n):
            fro += a[i, j] * a[i, j]
    fro = sqrt(fro)
    if fro == 0.0:
        return np.zeros(n), V, 0
    with nogil:
        while sweep < max_sweeps:
            off = 0.0
            for i in range(n):
                for j in range(n):
                    if i != j:
                        off += a[i, j] * a[i, j]
            if sqrt(off) <= tol_rel * fro:
                break
            sweep += 1
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    g = 100.0 * fabs(apq)
                    if fabs(a[p, p]) + g == fabs(a[p, p]) and fabs(a[q, q]) + g == fabs(a[q, q]):
                        a[p, q] = 0.0
                        a[q, p] = 0.0
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if fabs(theta) > 1e150:
                        t = 0.5 / theta
                    elif theta >= 0:
                        t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                    else:
                        t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    sn = t * c
                    for k in range(n):
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp - sn * akq
                        a[k, q] = sn * akp + c * akq
                    for k in range(n):
                        akp = a[p, k]
                        akq = a[q, k]
                        a[p, k] = c * akp - sn * akq
                        a[q, k] = sn * akp + c * akq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        akp = v[k, p]
                        akq = v[k, q]
                        v[k, p] = c * akp - sn * akq
                        v[k, q] = sn * akp + c * akq
    return np.diagonal(A).copy(), V, sweep
