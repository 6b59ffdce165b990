# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled grid kernels; same contract as the numpy versions in _pykernels."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double[6] W_MID = [11.0 / 1440, -93.0 / 1440, 802.0 / 1440, 802.0 / 1440, -93.0 / 1440, 11.0 / 1440]
cdef double[6] W_0 = [475.0 / 1440, 1427.0 / 1440, -798.0 / 1440, 482.0 / 1440, -173.0 / 1440, 27.0 / 1440]
cdef double[6] W_1 = [-27.0 / 1440, 637.0 / 1440, 1022.0 / 1440, -258.0 / 1440, 77.0 / 1440, -11.0 / 1440]


def stencil_derivatives(f, double h):
    cdef double[::1] a = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], i
    if n < 6:
        raise ValueError("need at least 6 samples")
    d1_arr = np.empty(n)
    d2_arr = np.empty(n)
    cdef double[::1] d1 = d1_arr
    cdef double[::1] d2 = d2_arr
    cdef double c1 = 1.0 / (12 * h), c2 = 1.0 / (12 * h * h)
    for i in range(2, n - 2):
        d1[i] = (a[i - 2] - 8 * a[i - 1] + 8 * a[i + 1] - a[i + 2]) * c1
        d2[i] = (-a[i - 2] + 16 * a[i - 1] - 30 * a[i] + 16 * a[i + 1] - a[i + 2]) * c2
    d1[0] = (-25 * a[0] + 48 * a[1] - 36 * a[2] + 16 * a[3] - 3 * a[4]) * c1
    d1[1] = (-3 * a[0] - 10 * a[1] + 18 * a[2] - 6 * a[3] + a[4]) * c1
    d2[0] = (45 * a[0] - 154 * a[1] + 214 * a[2] - 156 * a[3] + 61 * a[4] - 10 * a[5]) * c2
    d2[1] = (10 * a[0] - 15 * a[1] - 4 * a[2] + 14 * a[3] - 6 * a[4] + a[5]) * c2
    cdef Py_ssize_t m = n - 1
    d1[m] = -(-25 * a[m] + 48 * a[m - 1] - 36 * a[m - 2] + 16 * a[m - 3] - 3 * a[m - 4]) * c1
    d1[m - 1] = -(-3 * a[m] - 10 * a[m - 1] + 18 * a[m - 2] - 6 * a[m - 3] + a[m - 4]) * c1
    d2[m] = (45 * a[m] - 154 * a[m - 1] + 214 * a[m - 2] - 156 * a[m - 3] + 61 * a[m - 4] - 10 * a[m - 5]) * c2
    d2[m - 1] = (10 * a[m] - 15 * a[m - 1] - 4 * a[m - 2] + 14 * a[m - 3] - 6 * a[m - 4] + a[m - 5]) * c2
    return d1_arr, d2_arr


cdef void _intervals(const double[::1] a, double h, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0], i, j
    cdef double s
    for i in range(2, n - 3):
        s = 0.0
        for j in range(6):
            s += W_MID[j] * a[i - 2 + j]
        out[i] = s * h
    s = 0.0
    for j in range(6):
        s += W_0[j] * a[j]
    out[0] = s * h
    s = 0.0
    for j in range(6):
        s += W_1[j] * a[j]
    out[1] = s * h
    s = 0.0
    for j in range(6):
        s += W_0[j] * a[n - 1 - j]
    out[n - 2] = s * h
    s = 0.0
    for j in range(6):
        s += W_1[j] * a[n - 1 - j]
    out[n - 3] = s * h


def interval_integrals(f, double h):
    cdef double[::1] a = np.ascontiguousarray(f, dtype=np.float64)
    if a.shape[0] < 6:
        raise ValueError("need at least 6 samples")
    out = np.empty(a.shape[0] - 1)
    _intervals(a, h, out)
    return out


def cumulative_integral(f, double h):
    cdef double[::1] a = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], i
    if n < 6:
        raise ValueError("need at least 6 samples")
    seg_arr = np.empty(n - 1)
    cdef double[::1] seg = seg_arr
    _intervals(a, h, seg)
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    out[0] = 0.0
    for i in range(1, n):
        out[i] = out[i - 1] + seg[i - 1]
    return out_arr
