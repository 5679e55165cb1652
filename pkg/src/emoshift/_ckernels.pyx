# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-shift feature kernel.

Same contract as ``melcepstrum.shifted_features_py``: for every scale in
``scales`` the base filter centers are multiplied by it, triangular filter
energies are accumulated over the (sparse) filter support only, then
log -> DCT -> delta -> pooled mean/std.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, cos, log, sqrt, M_PI

cnp.import_array()


def shifted_features(
    const double[:, ::1] power,
    const double[::1] base_centers,
    const double[::1] scales,
    int n_coef,
    int d,
    double log_floor,
):
    cdef Py_ssize_t T = power.shape[0]
    cdef Py_ssize_t B = power.shape[1]
    cdef Py_ssize_t F = base_centers.shape[0] - 2
    cdef Py_ssize_t S = scales.shape[0]
    cdef Py_ssize_t s, m, t, k, j, k0, k1, nd
    cdef double lo, mid, hi, acc, scale, wk, mean, var, diff

    if n_coef < 1 or n_coef >= F:
        raise ValueError("need 1 <= n_coef < filter count")
    if T < d + 2 or d < 1:
        raise ValueError("too few frames for the differentiation shift")

    out_arr = np.empty((S, 3 * n_coef), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] basis = np.empty((n_coef, F), dtype=np.float64)
    cdef double[:, ::1] logE = np.empty((T, F), dtype=np.float64)
    cdef double[:, ::1] mfcc = np.empty((T, n_coef), dtype=np.float64)
    cdef double[::1] w = np.empty(B, dtype=np.float64)

    for m in range(n_coef):
        for k in range(F):
            basis[m, k] = cos((m + 1) * (k + 0.5) * M_PI / F)

    nd = T - d
    for s in range(S):
        scale = scales[s]
        for m in range(F):
            lo = scale * base_centers[m]
            mid = scale * base_centers[m + 1]
            hi = scale * base_centers[m + 2]
            k0 = <Py_ssize_t>ceil(lo)
            if k0 < 0:
                k0 = 0
            k1 = <Py_ssize_t>ceil(hi)  # exclusive
            if k1 > B:
                k1 = B
            for k in range(k0, k1):
                if k < mid:
                    w[k] = 2.0 * (k - lo) / ((hi - lo) * (mid - lo))
                else:
                    w[k] = 2.0 * (hi - k) / ((hi - lo) * (hi - mid))
            for t in range(T):
                acc = 0.0
                for k in range(k0, k1):
                    acc += power[t, k] * w[k]
                if acc < log_floor:
                    acc = log_floor
                logE[t, m] = log(acc)

        for t in range(T):
            for j in range(n_coef):
                acc = 0.0
                for m in range(F):
                    acc += logE[t, m] * basis[j, m]
                mfcc[t, j] = acc

        for j in range(n_coef):
            mean = 0.0
            for t in range(T):
                mean += mfcc[t, j]
            mean /= T
            var = 0.0
            for t in range(T):
                diff = mfcc[t, j] - mean
                var += diff * diff
            out[s, j] = mean
            out[s, n_coef + j] = sqrt(var / T)

            mean = 0.0
            for t in range(d, T):
                mean += mfcc[t, j] - mfcc[t - d, j]
            mean /= nd
            var = 0.0
            for t in range(d, T):
                diff = (mfcc[t, j] - mfcc[t - d, j]) - mean
                var += diff * diff
            out[s, 2 * n_coef + j] = sqrt(var / nd)

    return out_arr
