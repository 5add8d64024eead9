# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: row-cyclic Jacobi eigensolver and the projected
gradient QP with its exact constraint projections.

Same call signatures and return values as ``_kernels_py``.
"""

import numpy as np

from libc.math cimport fabs, sqrt

BACKEND = "cython"

DEF BISECT_ITERS = 200


cdef double _off_norm(double[:, ::1] a, Py_ssize_t n) nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(n):
            if i != j:
                s += a[i, j] * a[i, j]
    return sqrt(s)


def jacobi_eigh(a_in, double tol, int max_sweeps):
    cdef double[:, ::1] a = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a.shape[0]
    # eigenvectors are accumulated as rows so that rotations touch
    # contiguous memory; transposed on return
    vt_arr = np.eye(n)
    cdef double[:, ::1] vt = vt_arr
    cdef Py_ssize_t p, q, k
    cdef double apq, app, aqq, theta, t, c, s, akp, akq, off
    cdef int sweeps = 0
    with nogil:
        off = _off_norm(a, n)
        while off > tol and sweeps < max_sweeps:
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    app = a[p, p]
                    aqq = a[q, q]
                    theta = (aqq - app) / (2.0 * apq)
                    if theta >= 0.0:
                        t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                    else:
                        t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        akp = a[p, k]
                        akq = a[q, k]
                        a[p, k] = c * akp - s * akq
                        a[q, k] = s * akp + c * akq
                    for k in range(n):
                        a[k, p] = a[p, k]
                        a[k, q] = a[q, k]
                    a[p, p] = app - t * apq
                    a[q, q] = aqq + t * apq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        akp = vt[p, k]
                        akq = vt[q, k]
                        vt[p, k] = c * akp - s * akq
                        vt[q, k] = s * akp + c * akq
            sweeps += 1
            off = _off_norm(a, n)
    w = np.array([a[k, k] for k in range(n)], dtype=np.float64)
    return w, np.ascontiguousarray(vt_arr.T), sweeps, off


cdef inline double _clip(double x, double b) nogil:
    if x > b:
        return b
    if x < -b:
        return -b
    return x


cdef inline double _softv(double x, double lam) nogil:
    if x > lam:
        return x - lam
    if x < -lam:
        return x + lam
    return 0.0


cdef void _box_proj(double[::1] v, double bound, double[::1] out) nogil:
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double lo = v[0], hi = v[0], mid, tot, x, tau
    cdef int it, nfree, nup, nlow
    for i in range(n):
        if v[i] < lo:
            lo = v[i]
        if v[i] > hi:
            hi = v[i]
    lo = lo - bound - 1.0
    hi = hi + bound + 1.0
    mid = 0.5 * (lo + hi)
    for it in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        tot = 0.0
        for i in range(n):
            tot += _clip(v[i] - mid, bound)
        if tot > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * (fabs(mid) if fabs(mid) > 1.0 else 1.0):
            break
    tau = 0.5 * (lo + hi)
    nfree = 0
    nup = 0
    nlow = 0
    tot = 0.0
    for i in range(n):
        x = v[i] - tau
        if x >= bound:
            nup += 1
        elif x <= -bound:
            nlow += 1
        else:
            nfree += 1
            tot += v[i]
    if nfree > 0:
        tau = (tot + bound * (nup - nlow) - 1.0) / nfree
    for i in range(n):
        out[i] = _clip(v[i] - tau, bound)


cdef double _soft_tau(double[::1] v, double lam) nogil:
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double lo = v[0], hi = v[0], mid, tot
    cdef int it
    for i in range(n):
        if v[i] < lo:
            lo = v[i]
        if v[i] > hi:
            hi = v[i]
    lo = lo - lam - 1.0
    hi = hi + lam + 1.0
    mid = 0.5 * (lo + hi)
    for it in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        tot = 0.0
        for i in range(n):
            tot += _softv(v[i] - mid, lam)
        if tot > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * (fabs(mid) if fabs(mid) > 1.0 else 1.0):
            break
    return 0.5 * (lo + hi)


cdef void _l1_proj(double[::1] v, double bound, double[::1] out) nogil:
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double tot = 0.0, shift, norm1, lo, hi, lam, tau, x, vmin, vmax
    cdef double nf, ss, det, r1, r2, tau_x, lam_x
    cdef int it
    cdef bint ok
    for i in range(n):
        tot += v[i]
    shift = (tot - 1.0) / n
    norm1 = 0.0
    for i in range(n):
        out[i] = v[i] - shift
        norm1 += fabs(out[i])
    if norm1 <= bound:
        return
    vmin = v[0]
    vmax = v[0]
    for i in range(n):
        if v[i] < vmin:
            vmin = v[i]
        if v[i] > vmax:
            vmax = v[i]
    lo = 0.0
    hi = vmax - vmin + 1.0
    lam = 0.5 * (lo + hi)
    for it in range(BISECT_ITERS):
        lam = 0.5 * (lo + hi)
        tau = _soft_tau(v, lam)
        norm1 = 0.0
        for i in range(n):
            norm1 += fabs(_softv(v[i] - tau, lam))
        if norm1 > bound:
            lo = lam
        else:
            hi = lam
        if hi - lo <= 1e-16 * (lam if lam > 1.0 else 1.0):
            break
    lam = 0.5 * (lo + hi)
    tau = _soft_tau(v, lam)
    nf = 0.0
    ss = 0.0
    r1 = 0.0
    r2 = 0.0
    for i in range(n):
        x = v[i] - tau
        if fabs(x) > lam:
            nf += 1.0
            r1 += v[i]
            if x > 0:
                ss += 1.0
                r2 += v[i]
            else:
                ss -= 1.0
                r2 -= v[i]
    r1 -= 1.0
    r2 -= bound
    det = nf * nf - ss * ss
    if nf > 0 and fabs(det) > 1e-12 * nf * nf:
        tau_x = (nf * r1 - ss * r2) / det
        lam_x = (nf * r2 - ss * r1) / det
        ok = lam_x >= 0
        if ok:
            for i in range(n):
                if (fabs(v[i] - tau_x) > lam_x) != (fabs(v[i] - tau) > lam):
                    ok = False
                    break
        if ok:
            for i in range(n):
                out[i] = _softv(v[i] - tau_x, lam_x)
            return
    for i in range(n):
        out[i] = _softv(v[i] - tau, lam)


def project_box_hyperplane(v_in, double bound):
    cdef double[::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    out = np.empty(v.shape[0])
    _box_proj(v, bound, out)
    return out


def project_l1_hyperplane(v_in, double bound):
    cdef double[::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    out = np.empty(v.shape[0])
    _l1_proj(v, bound, out)
    return out


def pgd_qp(mu_in, sigma_in, double eta, double step, int kind, double bound,
           w0, double tol, int max_iter):
    cdef double[::1] mu = np.ascontiguousarray(mu_in, dtype=np.float64)
    cdef double[:, ::1] sig = np.ascontiguousarray(sigma_in, dtype=np.float64)
    w_arr = np.array(w0, dtype=np.float64, copy=True)
    cdef double[::1] w = w_arr
    cdef Py_ssize_t d = w.shape[0], i, j
    cdef double[::1] x = np.empty(d)
    cdef double[::1] y = np.empty(d)
    cdef double acc, tot, move
    cdef int it = 0
    with nogil:
        for it in range(1, max_iter + 1):
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += sig[i, j] * w[j]
                x[i] = w[i] + step * (mu[i] - eta * acc)
            if kind == 0:
                tot = 0.0
                for i in range(d):
                    tot += x[i]
                tot = (tot - 1.0) / d
                for i in range(d):
                    y[i] = x[i] - tot
            elif kind == 1:
                _box_proj(x, bound, y)
            else:
                _l1_proj(x, bound, y)
            move = 0.0
            for i in range(d):
                move += (y[i] - w[i]) * (y[i] - w[i])
                w[i] = y[i]
            if sqrt(move) < tol:
                break
    return w_arr, it
