# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled longest-common-subsequence kernel (row-rolling DP)."""

import numpy as np


def lcs_length(a, b):
    """Length of the longest common subsequence of two int sequences."""
    cdef long long[::1] x = np.ascontiguousarray(a, dtype=np.int64)
    cdef long long[::1] y = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = y.shape[0]
    if n == 0 or m == 0:
        return 0
    if m > n:
        x, y = y, x
        n, m = m, n
    cdef long long[::1] prev = np.zeros(m + 1, dtype=np.int64)
    cdef long long[::1] cur = np.zeros(m + 1, dtype=np.int64)
    cdef Py_ssize_t i, j
    cdef long long xi, up, left
    for i in range(1, n + 1):
        xi = x[i - 1]
        cur[0] = 0
        for j in range(1, m + 1):
            if xi == y[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                up = prev[j]
                left = cur[j - 1]
                cur[j] = up if up >= left else left
        prev, cur = cur, prev
    return int(prev[m])
