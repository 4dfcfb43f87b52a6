# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: assignment solver and pairwise track costs.

Contract and tie-break rules are identical to _kernels_py; see there.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()


def solve_lap(cost):
    """Shortest-augmenting-path assignment on an (m, n) cost matrix, m <= n."""
    C_arr = np.ascontiguousarray(cost, dtype=np.float64)
    cdef double[:, ::1] C = C_arr
    cdef Py_ssize_t m = C.shape[0]
    cdef Py_ssize_t n = C.shape[1]
    if m == 0 or n == 0 or m > n:
        raise ValueError(f"solve_lap requires 0 < m <= n, got {m}x{n}")

    u_arr = np.zeros(m + 1, dtype=np.float64)
    v_arr = np.zeros(n + 1, dtype=np.float64)
    p_arr = np.zeros(n + 1, dtype=np.int64)
    way_arr = np.zeros(n + 1, dtype=np.int64)
    minv_arr = np.empty(n + 1, dtype=np.float64)
    used_arr = np.zeros(n + 1, dtype=np.uint8)

    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef cnp.int64_t[::1] p = p_arr
    cdef cnp.int64_t[::1] way = way_arr
    cdef double[::1] minv = minv_arr
    cdef cnp.uint8_t[::1] used = used_arr

    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur

    for i in range(1, m + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = C[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break

    row_to_col = np.full(m, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] rtc = row_to_col
    for j in range(1, n + 1):
        if p[j] != 0:
            rtc[p[j] - 1] = j - 1
    return row_to_col


def pairwise_track_cost(mask_a, pos_a, mask_b, pos_b, double c):
    """Time-averaged capped distances between all track pairs of two batches."""
    ma_arr = np.ascontiguousarray(mask_a, dtype=np.uint8)
    mb_arr = np.ascontiguousarray(mask_b, dtype=np.uint8)
    pa_arr = np.ascontiguousarray(pos_a, dtype=np.float64)
    pb_arr = np.ascontiguousarray(pos_b, dtype=np.float64)

    cdef cnp.uint8_t[:, ::1] A = ma_arr
    cdef cnp.uint8_t[:, ::1] B = mb_arr
    cdef double[:, :, ::1] PA = pa_arr
    cdef double[:, :, ::1] PB = pb_arr

    cdef Py_ssize_t Ma = A.shape[0]
    cdef Py_ssize_t Mb = B.shape[0]
    cdef Py_ssize_t W = A.shape[1]

    out_arr = np.zeros((Ma, Mb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    cdef Py_ssize_t m, n, w
    cdef int union_count
    cdef double s, dx, dy, d
    cdef bint am, bn

    for m in range(Ma):
        for n in range(Mb):
            s = 0.0
            union_count = 0
            for w in range(W):
                am = A[m, w] != 0
                bn = B[n, w] != 0
                if am and bn:
                    dx = PA[m, w, 0] - PB[n, w, 0]
                    dy = PA[m, w, 1] - PB[n, w, 1]
                    d = sqrt(dx * dx + dy * dy)
                    s += d if d < c else c
                    union_count += 1
                elif am or bn:
                    s += c
                    union_count += 1
            if union_count > 0:
                out[m, n] = s / union_count
    return out_arr
