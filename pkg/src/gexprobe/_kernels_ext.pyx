# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for gamma and dollar-GEX evaluation.

Mirrors ``gexprobe._kernels_py`` function for function. Reductions run in
contract index order so results do not depend on scheduling.
"""
from libc.math cimport exp, log, sqrt

import numpy as np

cdef double INV_SQRT_2PI = 0.39894228040143267794
# one trading hour in years; used when an expired contract sits exactly at the strike
cdef double SENTINEL_TTE = 1.0 / (252.0 * 6.5)


cdef inline double _gamma(double s, double k, double t, double v, double r) nogil:
    cdef double vol_t, d1
    if t <= 0.0:
        if s != k:
            return 0.0
        t = SENTINEL_TTE
    vol_t = v * sqrt(t)
    d1 = (log(s / k) + (r + 0.5 * v * v) * t) / vol_t
    return INV_SQRT_2PI * exp(-0.5 * d1 * d1) / (s * vol_t)


def gamma_array(double spot, double[::1] strikes, double[::1] tte,
                double[::1] iv, double rate=0.0):
    cdef Py_ssize_t n = strikes.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _gamma(spot, strikes[i], tte[i], iv[i], rate)
    return out


def net_gex(double spot, double[::1] strikes, double[::1] tte,
            double[::1] iv, double[::1] weights, double rate=0.0):
    """Dollar GEX at ``spot``; ``weights`` are signed open interest."""
    cdef Py_ssize_t n = strikes.shape[0], i
    cdef double acc = 0.0
    with nogil:
        for i in range(n):
            if weights[i] != 0.0:
                acc += weights[i] * _gamma(spot, strikes[i], tte[i], iv[i], rate)
    return acc * 100.0 * spot * spot


def gex_curve(double[::1] grid, double[::1] strikes, double[::1] tte,
              double[::1] iv, double[::1] weights, double rate=0.0):
    """Dollar GEX at every grid level.

    Per-contract terms that do not depend on the level (log strike, drift,
    vol-time) are computed once, leaving one ``exp`` per grid cell. Each
    level's sum still runs in contract index order.
    """
    cdef Py_ssize_t m = grid.shape[0], n = strikes.shape[0], j, i, live = 0
    cdef double acc, s, logs, d1, t, vol_t
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    logk_a = np.empty(n, dtype=np.float64)
    drift_a = np.empty(n, dtype=np.float64)
    inv_a = np.empty(n, dtype=np.float64)
    coef_a = np.empty(n, dtype=np.float64)
    kk_a = np.empty(n, dtype=np.float64)
    exp_a = np.zeros(n, dtype=np.uint8)
    cdef double[::1] logk = logk_a, drift = drift_a, inv = inv_a, coef = coef_a, kk = kk_a
    cdef unsigned char[::1] expired = exp_a
    with nogil:
        for i in range(n):
            if weights[i] == 0.0:
                continue
            t = tte[i]
            if t <= 0.0:
                expired[live] = 1
                t = SENTINEL_TTE
            vol_t = iv[i] * sqrt(t)
            kk[live] = strikes[i]
            logk[live] = log(strikes[i])
            drift[live] = (rate + 0.5 * iv[i] * iv[i]) * t
            inv[live] = 1.0 / vol_t
            coef[live] = weights[i] / vol_t
            live += 1
        for j in range(m):
            s = grid[j]
            logs = log(s)
            acc = 0.0
            for i in range(live):
                if expired[i] and s != kk[i]:
                    continue
                d1 = (logs - logk[i] + drift[i]) * inv[i]
                acc += coef[i] * exp(-0.5 * d1 * d1)
            # gamma carries 1/s, dollar GEX multiplies by 100 s^2
            o[j] = acc * INV_SQRT_2PI * 100.0 * s
    return out
