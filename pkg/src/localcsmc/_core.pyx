# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled sweeps for the Gaussian random-walk preset.

Mirrors ``kernels._fused_np``: same pre-drawn randomness, same draw
order, same inverse-CDF convention.  Only the floating-point reduction
order over dimensions differs (sequential here, pairwise in NumPy).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093454835


cdef inline Py_ssize_t _draw(double[::1] p, Py_ssize_t n, double u):
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        acc += p[i]
        if u < acc:
            return i
    return n - 1


cdef inline void _softmax(double[::1] lw, double[::1] out, Py_ssize_t n):
    cdef double m = lw[0]
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(1, n):
        if lw[i] > m:
            m = lw[i]
    for i in range(n):
        out[i] = exp(lw[i] - m)
        s += out[i]
    for i in range(n):
        out[i] /= s


cdef void _rosenbluth_teller0(double[::1] lw, double[::1] out, Py_ssize_t n):
    # reference at index 0; h_i = lw[i] - lw[0], computed shift-safe
    cdef double shift = 0.0
    cdef double h, total, s0, e, acc
    cdef Py_ssize_t i
    for i in range(1, n):
        h = lw[i] - lw[0]
        if h > shift:
            shift = h
    s0 = exp(-shift)
    total = s0
    for i in range(1, n):
        out[i] = exp(lw[i] - lw[0] - shift)
        total += out[i]
    acc = 0.0
    for i in range(1, n):
        e = out[i]
        e = e / (total - (e if e < s0 else s0))
        out[i] = e if e < 1.0 else 1.0
        acc += out[i]
    acc = 1.0 - acc
    if acc < 0.0:
        acc = 0.0
    if acc > 1.0:
        acc = 1.0
    out[0] = acc


cdef inline double _log_g(double[:, ::1] z, Py_ssize_t n, double[:, ::1] y,
                          Py_ssize_t t, double r, Py_ssize_t d):
    cdef double s = 0.0
    cdef double diff
    cdef Py_ssize_t i
    for i in range(d):
        diff = y[t, i] - z[n, i]
        s += diff * diff
    return -0.5 * d * (LOG_2PI + log(r)) - s / (2.0 * r)


cdef inline double _log_m_pair(double[:, ::1] zp, Py_ssize_t m, double[:, ::1] zc,
                               Py_ssize_t n, Py_ssize_t d):
    cdef double s = 0.0
    cdef double diff
    cdef Py_ssize_t i
    for i in range(d):
        diff = zc[n, i] - zp[m, i]
        s += diff * diff
    return -0.5 * d * LOG_2PI - 0.5 * s


cdef inline double _log_m_to(double[:, ::1] zp, Py_ssize_t m, double[:, ::1] tgt,
                             Py_ssize_t row, Py_ssize_t d):
    cdef double s = 0.0
    cdef double diff
    cdef Py_ssize_t i
    for i in range(d):
        diff = tgt[row, i] - zp[m, i]
        s += diff * diff
    return -0.5 * d * LOG_2PI - 0.5 * s


cdef inline double _log_m1(double[:, ::1] z, Py_ssize_t n, double v1, Py_ssize_t d):
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(d):
        s += z[n, i] * z[n, i]
    return -0.5 * d * (LOG_2PI + log(v1)) - s / (2.0 * v1)


cdef _select_tail(double[:, :, ::1] z, cnp.int64_t[:, ::1] anc, double[:, ::1] lw,
                  double u_fin, u_bw_obj, bint forced_move):
    """Final-time selection plus trace or backward sampling.

    Backward weights add the transition density toward the already
    selected particle at t+1, matching the NumPy backend.
    """
    cdef Py_ssize_t T = lw.shape[0]
    cdef Py_ssize_t n_tot = lw.shape[1]
    cdef Py_ssize_t D = z.shape[2]
    k_arr = np.empty(T, dtype=np.int64)
    cdef cnp.int64_t[::1] k = k_arr
    cdef double[::1] final = np.empty(n_tot)
    cdef double[::1] bwt = np.empty(n_tot)
    cdef Py_ssize_t t, n

    if forced_move:
        _rosenbluth_teller0(lw[T - 1], final, n_tot)
    else:
        _softmax(lw[T - 1], final, n_tot)
    k[T - 1] = _draw(final, n_tot, u_fin)

    if u_bw_obj is None:
        for t in range(T - 2, -1, -1):
            k[t] = anc[t, k[t + 1]]
        return k_arr, None

    cdef double[::1] u_bw = u_bw_obj
    bw_arr = np.empty((T - 1, n_tot))
    cdef double[:, ::1] bw = bw_arr
    for t in range(T - 2, -1, -1):
        for n in range(n_tot):
            bwt[n] = lw[t, n] + _log_m_to(z[t], n, z[t + 1], k[t + 1], D)
        _softmax(bwt, bw[t], n_tot)
        k[t] = _draw(bw[t], n_tot, u_bw[t])
    return k_arr, bw_arr


def icsmc_sweep(double[:, ::1] x, double[:, ::1] y, double v1, double r,
                double[:, :, ::1] eps, double[:, ::1] u_anc, u_as_obj,
                double u_fin, u_bw_obj, bint forced_move):
    cdef Py_ssize_t T = eps.shape[0]
    cdef Py_ssize_t N = eps.shape[1]
    cdef Py_ssize_t D = eps.shape[2]
    cdef Py_ssize_t n_tot = N + 1

    z_arr = np.empty((T, n_tot, D))
    anc_arr = np.zeros((max(T - 1, 0), n_tot), dtype=np.int64)
    lw_arr = np.empty((T, n_tot))
    cdef double[:, :, ::1] z = z_arr
    cdef cnp.int64_t[:, ::1] anc = anc_arr
    cdef double[:, ::1] lw = lw_arr

    cdef bint has_as = u_as_obj is not None
    cdef double[::1] u_as = u_as_obj if has_as else np.empty(0)

    cdef double[::1] probs = np.empty(n_tot)
    cdef double[::1] bwt = np.empty(n_tot)
    cdef double sv1 = sqrt(v1)
    cdef Py_ssize_t t, n, i, a

    for i in range(D):
        z[0, 0, i] = x[0, i]
    for n in range(1, n_tot):
        for i in range(D):
            z[0, n, i] = sv1 * eps[0, n - 1, i]
    for n in range(n_tot):
        lw[0, n] = _log_g(z[0], n, y, 0, r, D)

    for t in range(1, T):
        _softmax(lw[t - 1], probs, n_tot)
        if has_as:
            for n in range(n_tot):
                bwt[n] = lw[t - 1, n] + _log_m_to(z[t - 1], n, x, t, D)
            _softmax(bwt, bwt, n_tot)
            anc[t - 1, 0] = _draw(bwt, n_tot, u_as[t - 1])
        for n in range(1, n_tot):
            anc[t - 1, n] = _draw(probs, n_tot, u_anc[t - 1, n - 1])
        for i in range(D):
            z[t, 0, i] = x[t, i]
        for n in range(1, n_tot):
            a = anc[t - 1, n]
            for i in range(D):
                z[t, n, i] = z[t - 1, a, i] + eps[t, n - 1, i]
        for n in range(n_tot):
            lw[t, n] = _log_g(z[t], n, y, t, r, D)

    k_arr, bw_arr = _select_tail(z, anc, lw, u_fin, u_bw_obj, forced_move)
    return z_arr, anc_arr, k_arr, lw_arr, bw_arr


def rwcsmc_sweep(double[:, ::1] x, double[:, ::1] y, double v1, double r,
                 double[::1] ell, double[:, :, ::1] eps_centre,
                 double[:, :, ::1] eps, double[:, ::1] u_anc, u_as_obj,
                 double u_fin, u_bw_obj, bint forced_move):
    cdef Py_ssize_t T = eps.shape[0]
    cdef Py_ssize_t N = eps.shape[1]
    cdef Py_ssize_t D = eps.shape[2]
    cdef Py_ssize_t n_tot = N + 1

    z_arr = np.empty((T, n_tot, D))
    anc_arr = np.zeros((max(T - 1, 0), n_tot), dtype=np.int64)
    om_arr = np.empty((T, n_tot))
    cdef double[:, :, ::1] z = z_arr
    cdef cnp.int64_t[:, ::1] anc = anc_arr
    cdef double[:, ::1] omega = om_arr

    cdef bint has_as = u_as_obj is not None
    cdef double[::1] u_as = u_as_obj if has_as else np.empty(0)

    cdef double[::1] probs = np.empty(n_tot)
    cdef double[::1] bwt = np.empty(n_tot)
    cdef double scale
    cdef Py_ssize_t t, n, i, a

    for t in range(T):
        scale = sqrt(ell[t] / (2.0 * D))
        for i in range(D):
            z[t, 0, i] = x[t, i]
        for n in range(1, n_tot):
            for i in range(D):
                z[t, n, i] = x[t, i] + scale * (eps_centre[t, 0, i] + eps[t, n - 1, i])

    for n in range(n_tot):
        omega[0, n] = _log_m1(z[0], n, v1, D) + _log_g(z[0], n, y, 0, r, D)

    for t in range(1, T):
        _softmax(omega[t - 1], probs, n_tot)
        if has_as:
            for n in range(n_tot):
                bwt[n] = omega[t - 1, n] + _log_m_to(z[t - 1], n, x, t, D)
            _softmax(bwt, bwt, n_tot)
            anc[t - 1, 0] = _draw(bwt, n_tot, u_as[t - 1])
        for n in range(1, n_tot):
            anc[t - 1, n] = _draw(probs, n_tot, u_anc[t - 1, n - 1])
        for n in range(n_tot):
            a = anc[t - 1, n]
            omega[t, n] = _log_m_pair(z[t - 1], a, z[t], n, D) + \
                _log_g(z[t], n, y, t, r, D)

    k_arr, bw_arr = _select_tail(z, anc, omega, u_fin, u_bw_obj, forced_move)
    return z_arr, anc_arr, k_arr, om_arr, bw_arr


def rwehmm_sweep(double[:, ::1] x, double[:, ::1] y, double v1, double r,
                 double[::1] ell, double[:, :, ::1] eps_centre,
                 double[:, :, ::1] eps, double[::1] u_bw):
    cdef Py_ssize_t T = eps.shape[0]
    cdef Py_ssize_t N = eps.shape[1]
    cdef Py_ssize_t D = eps.shape[2]
    cdef Py_ssize_t n_tot = N + 1

    z_arr = np.empty((T, n_tot, D))
    lw_arr = np.empty((T, n_tot))
    trans_arr = np.empty((max(T - 1, 0), n_tot, n_tot))
    cdef double[:, :, ::1] z = z_arr
    cdef double[:, ::1] lw = lw_arr
    cdef double[:, :, ::1] trans = trans_arr

    cdef double scale, m, s, v
    cdef Py_ssize_t t, n, i, mm

    for t in range(T):
        scale = sqrt(ell[t] / (2.0 * D))
        for i in range(D):
            z[t, 0, i] = x[t, i]
        for n in range(1, n_tot):
            for i in range(D):
                z[t, n, i] = x[t, i] + scale * (eps_centre[t, 0, i] + eps[t, n - 1, i])

    # forward pass, normalised per step
    for n in range(n_tot):
        lw[0, n] = _log_m1(z[0], n, v1, D) + _log_g(z[0], n, y, 0, r, D)
    _log_normalise(lw[0], n_tot)
    for t in range(1, T):
        for mm in range(n_tot):
            for n in range(n_tot):
                trans[t - 1, mm, n] = _log_m_pair(z[t - 1], mm, z[t], n, D)
        for n in range(n_tot):
            m = lw[t - 1, 0] + trans[t - 1, 0, n]
            for mm in range(1, n_tot):
                v = lw[t - 1, mm] + trans[t - 1, mm, n]
                if v > m:
                    m = v
            s = 0.0
            for mm in range(n_tot):
                s += exp(lw[t - 1, mm] + trans[t - 1, mm, n] - m)
            lw[t, n] = m + log(s) + _log_g(z[t], n, y, t, r, D)
        _log_normalise(lw[t], n_tot)

    # backward draws
    k_arr = np.empty(T, dtype=np.int64)
    bw_arr = np.empty((T, n_tot))
    cdef cnp.int64_t[::1] k = k_arr
    cdef double[:, ::1] bw = bw_arr
    cdef double[::1] bwt = np.empty(n_tot)

    _softmax(lw[T - 1], bw[T - 1], n_tot)
    k[T - 1] = _draw(bw[T - 1], n_tot, u_bw[T - 1])
    for t in range(T - 2, -1, -1):
        for n in range(n_tot):
            bwt[n] = lw[t, n] + trans[t, n, k[t + 1]]
        _softmax(bwt, bw[t], n_tot)
        k[t] = _draw(bw[t], n_tot, u_bw[t])
    return z_arr, k_arr, lw_arr, bw_arr


cdef inline void _log_normalise(double[::1] lw, Py_ssize_t n):
    cdef double m = lw[0]
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(1, n):
        if lw[i] > m:
            m = lw[i]
    for i in range(n):
        s += exp(lw[i] - m)
    s = m + log(s)
    for i in range(n):
        lw[i] -= s
