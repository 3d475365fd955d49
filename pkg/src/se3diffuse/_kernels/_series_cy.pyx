# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled rotational heat-kernel series (hot loops).

Mirrors series_np exactly: same truncation, same small-angle branches.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, sin


def series_f(theta, double eps, int lmax, double theta_small=1e-4):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] th = np.ascontiguousarray(
        np.asarray(theta, dtype=np.float64).reshape(-1))
    cdef Py_ssize_t n = th.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(lmax + 1, dtype=np.float64)
    cdef Py_ssize_t i
    cdef int l
    cdef double lf, acc, t, inv_sh, limit0
    limit0 = 0.0
    for l in range(lmax + 1):
        lf = <double> l
        w[l] = (2.0 * lf + 1.0) * exp(-eps * lf * (lf + 1.0))
        limit0 += w[l] * (2.0 * lf + 1.0)
    for i in range(n):
        t = th[i]
        if t < theta_small:
            out[i] = limit0
            continue
        inv_sh = 1.0 / sin(0.5 * t)
        acc = 0.0
        for l in range(lmax + 1):
            lf = <double> l
            acc += w[l] * sin((lf + 0.5) * t)
        out[i] = acc * inv_sh
    return out.reshape(np.shape(theta))


def series_df(theta, double eps, int lmax):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] th = np.ascontiguousarray(
        np.asarray(theta, dtype=np.float64).reshape(-1))
    cdef Py_ssize_t n = th.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(lmax + 1, dtype=np.float64)
    cdef Py_ssize_t i
    cdef int l
    cdef double lf, acc, t, inv_cm
    for l in range(lmax + 1):
        lf = <double> l
        w[l] = (2.0 * lf + 1.0) * exp(-eps * lf * (lf + 1.0))
    for i in range(n):
        t = th[i]
        inv_cm = 1.0 / (cos(t) - 1.0)
        acc = 0.0
        for l in range(lmax + 1):
            lf = <double> l
            acc += w[l] * ((lf + 1.0) * sin(lf * t) - lf * sin((lf + 1.0) * t))
        out[i] = acc * inv_cm
    return out.reshape(np.shape(theta))


def series_moment(double eps, int lmax):
    cdef int l
    cdef double lf, wl, num = 0.0, den = 0.0
    for l in range(lmax + 1):
        lf = <double> l
        wl = (2.0 * lf + 1.0) * exp(-eps * lf * (lf + 1.0))
        num += wl * (2.0 * lf + 1.0) * lf * (lf + 1.0)
        den += wl * (2.0 * lf + 1.0)
    return num / (3.0 * den)
