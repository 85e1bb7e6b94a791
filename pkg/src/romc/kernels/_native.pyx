# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled distance kernels for the bundled benchmark models.

Same signatures and semantics as romc.kernels._numpy; see that module for
documentation.  Scalar results may differ from the numpy backend in the
last few ulps because the accumulation order differs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "native"

cdef double TOY_C = 0.5 - 0.5 ** 4


def ma2_series(double theta1, double theta2, noise):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0] - 2
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t t
    for t in range(n):
        y[t] = w[t + 2] + theta1 * w[t + 1] + theta2 * w[t]
    return y


def autocov_summaries(series):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(series, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    if n < 3:
        raise ValueError("series must have at least 3 observations")
    cdef double s1 = 0.0, s2 = 0.0
    cdef Py_ssize_t t
    for t in range(1, n):
        s1 += y[t] * y[t - 1]
    for t in range(2, n):
        s2 += y[t] * y[t - 2]
    return np.array([s1 / (n - 1), s2 / (n - 2)])


def ma2_distance_batch(thetas, noise, double s1_obs, double s2_obs):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] th = np.ascontiguousarray(thetas, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(noise, dtype=np.float64)
    if w.shape[0] < 5:
        raise ValueError("noise must yield a series of at least 3 observations")
    cdef Py_ssize_t m = th.shape[0]
    cdef Py_ssize_t n = w.shape[0] - 2
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef double t1, t2, s1, s2, y0, y1, y2
    cdef Py_ssize_t i, t
    for i in range(m):
        t1 = th[i, 0]
        t2 = th[i, 1]
        # y_t = w[t+2] + t1*w[t+1] + t2*w[t]; roll three consecutive values
        y0 = w[2] + t1 * w[1] + t2 * w[0]
        y1 = w[3] + t1 * w[2] + t2 * w[1]
        s1 = y1 * y0
        s2 = 0.0
        for t in range(2, n):
            y2 = w[t + 2] + t1 * w[t + 1] + t2 * w[t]
            s1 += y2 * y1
            s2 += y2 * y0
            y0 = y1
            y1 = y2
        s1 = s1 / (n - 1) - s1_obs
        s2 = s2 / (n - 2) - s2_obs
        out[i] = s1 * s1 + s2 * s2
    return out


def toy_location(theta):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t = np.ascontiguousarray(
        np.atleast_1d(theta), dtype=np.float64)
    cdef Py_ssize_t n = t.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double v, a
    cdef Py_ssize_t i
    for i in range(n):
        v = t[i]
        a = -v if v < 0 else v
        out[i] = v * v * v * v if a <= 0.5 else a - TOY_C
    return out


def toy_distance_batch(thetas, double u, double y_obs):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t = np.ascontiguousarray(
        np.atleast_1d(thetas), dtype=np.float64)
    cdef Py_ssize_t n = t.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double v, a, loc, r
    cdef Py_ssize_t i
    for i in range(n):
        v = t[i]
        a = -v if v < 0 else v
        loc = v * v * v * v if a <= 0.5 else a - TOY_C
        r = loc + u - y_obs
        out[i] = r * r
    return out
