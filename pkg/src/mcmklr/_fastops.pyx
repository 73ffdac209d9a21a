# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the _pyops kernels.

Single pass per call, no temporaries, Kahan-compensated reductions.
Semantics must stay bit-compatible with _pyops up to summation order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, log1p

cnp.import_array()

P_CLAMP = 1e-15

cdef double _PMIN = 1e-15
cdef double _PMAX = 1.0 - 1e-15


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def probs_and_logloss(const double[::1] z, const double[::1] y, const double[::1] mask):
    cdef Py_ssize_t i, n = z.shape[0]
    p_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] p = p_arr
    cdef double s = 0.0, c = 0.0, t, term, pi
    for i in range(n):
        pi = _sigmoid(z[i])
        if pi < _PMIN:
            pi = _PMIN
        elif pi > _PMAX:
            pi = _PMAX
        p[i] = pi
        if mask[i] != 0.0:
            term = -(y[i] * log(pi) + (1.0 - y[i]) * log1p(-pi))
            term -= c
            t = s + term
            c = (t - s) - term
            s = t
    return p_arr, s


def trial_logloss(const double[::1] z, const double[::1] dz, double r,
                  const double[::1] y, const double[::1] mask):
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double s = 0.0, c = 0.0, t, term, pi
    for i in range(n):
        if mask[i] != 0.0:
            pi = _sigmoid(z[i] + r * dz[i])
            if pi < _PMIN:
                pi = _PMIN
            elif pi > _PMAX:
                pi = _PMAX
            term = -(y[i] * log(pi) + (1.0 - y[i]) * log1p(-pi))
            term -= c
            t = s + term
            c = (t - s) - term
            s = t
    return s


def tau_sum(const double[::1] p, const double[::1] mask):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double s = 0.0, c = 0.0, t, term
    for i in range(n):
        if mask[i] != 0.0:
            term = p[i] * (1.0 - p[i]) - c
            t = s + term
            c = (t - s) - term
            s = t
    return s


def spectral_shifted_divide(const double complex[::1] num, const double[::1] v,
                            double shift, double floor):
    cdef Py_ssize_t i, n = num.shape[0]
    out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double den
    cdef Py_ssize_t clamped = 0
    for i in range(n):
        den = v[i] + shift
        if fabs(den) < floor:
            den = -floor if den < 0.0 else floor
            clamped += 1
        out[i] = num[i] / den
    return out_arr, int(clamped)


def exp_vote(const double[:, ::1] sqd, double sigma, const double[::1] alpha):
    cdef Py_ssize_t b = sqd.shape[0], m = sqd.shape[1], i, j
    out_arr = np.empty(b, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double s, c, t, term
    for i in range(b):
        s = 0.0
        c = 0.0
        for j in range(m):
            term = exp(-sigma * sqd[i, j]) * alpha[j] - c
            t = s + term
            c = (t - s) - term
            s = t
        out[i] = s
    return out_arr
