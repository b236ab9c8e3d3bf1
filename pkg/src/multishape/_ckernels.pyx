# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled alignment kernels.

Same contract as :mod:`multishape._pykernels` (see its module docstring for
the coefficient layout and the shift objective). Trigonometric sums use the
angle-addition recurrence, so one ``sin``/``cos`` pair is evaluated per point
instead of one per frequency.
"""
import numpy as np

from libc.math cimport sin, cos, atan, fmod, fabs, M_PI
from libc.stdlib cimport malloc, free

cdef double TWO_PI = 2.0 * M_PI
cdef double ROT_EPS = 1e-14
cdef double TIE_EPS = 1e-14


cdef inline double _g(double d, const double[:] tr, const double[:] sk) noexcept nogil:
    cdef Py_ssize_t l, L = tr.shape[0]
    cdef double c1 = cos(TWO_PI * d)
    cdef double s1 = sin(TWO_PI * d)
    cdef double c = c1, s = s1, tmp, acc = 0.0
    for l in range(L):
        acc += 2.0 * (l + 1) * (tr[l] * s - sk[l] * c)
        tmp = c * c1 - s * s1
        s = s * c1 + c * s1
        c = tmp
    return acc


cdef inline double _h(double d, const double[:] tr, const double[:] sk) noexcept nogil:
    cdef Py_ssize_t l, L = tr.shape[0]
    cdef double c1 = cos(TWO_PI * d)
    cdef double s1 = sin(TWO_PI * d)
    cdef double c = c1, s = s1, tmp, acc = 0.0
    for l in range(L):
        acc += tr[l] * c + sk[l] * s
        tmp = c * c1 - s * s1
        s = s * c1 + c * s1
        c = tmp
    return -2.0 * acc


cdef int _best_shift(const double[:] tr, const double[:] sk, int n_scan, double xtol,
                     double* out_delta, double* out_val) noexcept nogil:
    cdef double* roots = <double*> malloc(n_scan * sizeof(double))
    cdef double* vals = <double*> malloc(n_scan * sizeof(double))
    cdef int i, n = 0
    cdef double g0, ga, gb, lo, hi, mid, vmin, r
    g0 = _g(0.0, tr, sk)
    ga = g0
    for i in range(n_scan):
        if i == n_scan - 1:
            gb = g0
        else:
            gb = _g((i + 1.0) / n_scan, tr, sk)
        if ga < 0.0 and gb >= 0.0:
            lo = (<double> i) / n_scan
            hi = (i + 1.0) / n_scan
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                if _g(mid, tr, sk) < 0.0:
                    lo = mid
                else:
                    hi = mid
            r = fmod(0.5 * (lo + hi), 1.0)
            roots[n] = r
            vals[n] = _h(r, tr, sk)
            n += 1
        ga = gb
    if n == 0:
        out_delta[0] = 0.0
        out_val[0] = _h(0.0, tr, sk)
    else:
        vmin = vals[0]
        for i in range(1, n):
            if vals[i] < vmin:
                vmin = vals[i]
        out_delta[0] = 2.0
        for i in range(n):
            if vals[i] <= vmin + TIE_EPS and roots[i] < out_delta[0]:
                out_delta[0] = roots[i]
                out_val[0] = vals[i]
    free(roots)
    free(vals)
    return n


def best_shift(trace, skew, int n_scan, double xtol):
    cdef const double[:] tr = np.ascontiguousarray(trace, dtype=np.float64)
    cdef const double[:] sk = np.ascontiguousarray(skew, dtype=np.float64)
    cdef double d = 0.0, v = 0.0
    cdef int n
    with nogil:
        n = _best_shift(tr, sk, n_scan, xtol, &d, &v)
    return d, v, n


cdef void _shift_template(const double[:, :, :] tmpl, const double[:] delta,
                          double[:, :, :] out) noexcept nogil:
    cdef Py_ssize_t j, r, l, p = tmpl.shape[0], L = (tmpl.shape[2] - 1) // 2
    cdef double c1, s1, c, s, tmp, a_s, a_c
    for j in range(p):
        c1 = cos(TWO_PI * delta[j])
        s1 = sin(TWO_PI * delta[j])
        for r in range(2):
            out[j, r, 0] = tmpl[j, r, 0]
        c = c1
        s = s1
        for l in range(L):
            for r in range(2):
                a_s = tmpl[j, r, 1 + 2 * l]
                a_c = tmpl[j, r, 2 + 2 * l]
                out[j, r, 1 + 2 * l] = a_s * c + a_c * s
                out[j, r, 2 + 2 * l] = -a_s * s + a_c * c
            tmp = c * c1 - s * s1
            s = s * c1 + c * s1
            c = tmp


cdef double _objective(const double[:, :, :] shifted, const double[:, :, :] target,
                       double theta) noexcept nogil:
    cdef Py_ssize_t j, m, p = shifted.shape[0], K = shifted.shape[2]
    cdef double c = cos(theta), s = sin(theta), dx, dy, acc = 0.0
    for j in range(p):
        for m in range(K):
            dx = c * shifted[j, 0, m] - s * shifted[j, 1, m] - target[j, 0, m]
            dy = s * shifted[j, 0, m] + c * shifted[j, 1, m] - target[j, 1, m]
            acc += dx * dx + dy * dy
    return acc


cdef int _best_rotation(const double[:, :, :] shifted, const double[:, :, :] target,
                        double* theta, double* obj) noexcept nogil:
    cdef Py_ssize_t j, m, p = shifted.shape[0], K = shifted.shape[2]
    cdef double h00 = 0.0, h01 = 0.0, h10 = 0.0, h11 = 0.0
    cdef double num, den, t1, t2, f1, f2
    for j in range(p):
        for m in range(K):
            h00 += shifted[j, 0, m] * target[j, 0, m]
            h01 += shifted[j, 0, m] * target[j, 1, m]
            h10 += shifted[j, 1, m] * target[j, 0, m]
            h11 += shifted[j, 1, m] * target[j, 1, m]
    num = h01 - h10
    den = h00 + h11
    if fabs(num) < ROT_EPS and fabs(den) < ROT_EPS:
        theta[0] = 0.0
        obj[0] = _objective(shifted, target, 0.0)
        return 1
    if den != 0.0:
        t1 = atan(num / den)
    else:
        t1 = 0.5 * M_PI
    t1 = fmod(t1 + TWO_PI, TWO_PI)
    t2 = fmod(t1 + M_PI, TWO_PI)
    f1 = _objective(shifted, target, t1)
    f2 = _objective(shifted, target, t2)
    if fabs(f1 - f2) <= TIE_EPS:
        theta[0] = t1 if t1 < t2 else t2
        obj[0] = f1 if f1 < f2 else f2
    elif f1 < f2:
        theta[0] = t1
        obj[0] = f1
    else:
        theta[0] = t2
        obj[0] = f2
    return 0


cdef void _shift_stats(const double[:, :, :] tmpl, const double[:, :, :] target, double theta,
                       double[:, :] trace, double[:, :] skew) noexcept nogil:
    cdef Py_ssize_t j, l, p = tmpl.shape[0], L = (tmpl.shape[2] - 1) // 2
    cdef double c = cos(theta), s = sin(theta)
    cdef double bs0, bs1, bc0, bc1
    for j in range(p):
        for l in range(L):
            # rotated template columns (sin, cos) of frequency l + 1
            bs0 = c * tmpl[j, 0, 1 + 2 * l] - s * tmpl[j, 1, 1 + 2 * l]
            bs1 = s * tmpl[j, 0, 1 + 2 * l] + c * tmpl[j, 1, 1 + 2 * l]
            bc0 = c * tmpl[j, 0, 2 + 2 * l] - s * tmpl[j, 1, 2 + 2 * l]
            bc1 = s * tmpl[j, 0, 2 + 2 * l] + c * tmpl[j, 1, 2 + 2 * l]
            trace[j, l] = (bs0 * target[j, 0, 1 + 2 * l] + bs1 * target[j, 1, 1 + 2 * l]
                           + bc0 * target[j, 0, 2 + 2 * l] + bc1 * target[j, 1, 2 + 2 * l])
            skew[j, l] = (bc0 * target[j, 0, 1 + 2 * l] + bc1 * target[j, 1, 1 + 2 * l]
                          - bs0 * target[j, 0, 2 + 2 * l] - bs1 * target[j, 1, 2 + 2 * l])


def best_rotation(template, target, delta):
    cdef const double[:, :, :] tm = np.ascontiguousarray(template, dtype=np.float64)
    cdef const double[:, :, :] tg = np.ascontiguousarray(target, dtype=np.float64)
    cdef const double[:] dl = np.ascontiguousarray(delta, dtype=np.float64)
    cdef double[:, :, :] sh = np.empty_like(np.asarray(tm))
    cdef double theta = 0.0, obj = 0.0
    cdef int degen
    with nogil:
        _shift_template(tm, dl, sh)
        degen = _best_rotation(sh, tg, &theta, &obj)
    return theta, obj, bool(degen)


def shift_template(template, delta):
    cdef const double[:, :, :] tm = np.ascontiguousarray(template, dtype=np.float64)
    cdef const double[:] dl = np.ascontiguousarray(delta, dtype=np.float64)
    out = np.empty_like(np.asarray(tm))
    cdef double[:, :, :] sh = out
    with nogil:
        _shift_template(tm, dl, sh)
    return out


def shift_stats(template, target, double theta):
    cdef const double[:, :, :] tm = np.ascontiguousarray(template, dtype=np.float64)
    cdef const double[:, :, :] tg = np.ascontiguousarray(target, dtype=np.float64)
    cdef Py_ssize_t p = tm.shape[0], L = (tm.shape[2] - 1) // 2
    trace = np.empty((p, L))
    skew = np.empty((p, L))
    cdef double[:, :] trv = trace
    cdef double[:, :] skv = skew
    with nogil:
        _shift_stats(tm, tg, theta, trv, skv)
    return trace, skew


def icf_run(template, target, delta0, double tol, int max_iter, int n_scan, double xtol):
    cdef const double[:, :, :] tm = np.ascontiguousarray(template, dtype=np.float64)
    cdef const double[:, :, :] tg = np.ascontiguousarray(target, dtype=np.float64)
    cdef Py_ssize_t j, p = tm.shape[0], L = (tm.shape[2] - 1) // 2
    delta_arr = np.mod(np.array(delta0, dtype=np.float64), 1.0)
    hist_arr = np.empty(max_iter + 1)
    cdef double[:] delta = delta_arr
    cdef double[:] hist = hist_arr
    cdef double[:, :, :] sh = np.empty_like(np.asarray(tm))
    cdef double[:, :] trace = np.empty((p, L))
    cdef double[:, :] skew = np.empty((p, L))
    cdef double theta = 0.0, obj = 0.0, new_obj = 0.0, d = 0.0, v = 0.0, decrease
    cdef int it, n_iter = 0, flags = 0
    with nogil:
        _shift_template(tm, delta, sh)
        if _best_rotation(sh, tg, &theta, &obj):
            flags |= 1
        hist[0] = obj
        for it in range(max_iter):
            n_iter = it + 1
            _shift_stats(tm, tg, theta, trace, skew)
            for j in range(p):
                if _best_shift(trace[j], skew[j], n_scan, xtol, &d, &v) == 0:
                    flags |= 2
                delta[j] = d
            _shift_template(tm, delta, sh)
            if _best_rotation(sh, tg, &theta, &new_obj):
                flags |= 1
            hist[n_iter] = new_obj
            decrease = obj - new_obj
            obj = new_obj
            if decrease < tol:
                break
    return theta, delta_arr, obj, n_iter, hist_arr[:n_iter + 1].copy(), flags
