# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled assignment kernel: shortest augmenting path over a dense matrix.

Solves min-cost row-to-column bijection in O(n^3) by growing one
augmenting path per row under a dual-feasible potential.  Forbidden edges
carry a sentinel at the float64 maximum; a path cost reaching a quarter
of that value means the remaining columns are only reachable through
forbidden edges, which is reported as infeasible.

The numpy fallback in ``_lap_fallback`` performs the identical arithmetic
in the identical order, so both backends return bit-identical results.
"""

import numpy as np

from libc.float cimport DBL_MAX
from libc.math cimport INFINITY


def lap_solve(const double[:, ::1] cost):
    """Return col4row, the int64 column assigned to each row, or None.

    None signals that no assignment of finite cost exists.
    """
    cdef Py_ssize_t n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("cost matrix must be square")

    u_arr = np.zeros(n, dtype=np.float64)
    v_arr = np.zeros(n, dtype=np.float64)
    shortest_arr = np.empty(n, dtype=np.float64)
    col4row_arr = np.full(n, -1, dtype=np.int64)
    row4col_arr = np.full(n, -1, dtype=np.int64)
    path_arr = np.full(n, -1, dtype=np.int64)
    done_rows_arr = np.zeros(n, dtype=np.uint8)
    done_cols_arr = np.zeros(n, dtype=np.uint8)

    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] shortest = shortest_arr
    cdef long long[::1] col4row = col4row_arr
    cdef long long[::1] row4col = row4col_arr
    cdef long long[::1] path = path_arr
    cdef unsigned char[::1] done_rows = done_rows_arr
    cdef unsigned char[::1] done_cols = done_cols_arr

    cdef double threshold = DBL_MAX / 4.0
    cdef Py_ssize_t cur_row, i, j, jmin, sink
    cdef double min_val, lowest, r
    cdef long long nxt

    for cur_row in range(n):
        for j in range(n):
            shortest[j] = INFINITY
            path[j] = -1
            done_cols[j] = 0
            done_rows[j] = 0
        min_val = 0.0
        sink = -1
        i = cur_row
        while sink == -1:
            done_rows[i] = 1
            lowest = INFINITY
            jmin = -1
            for j in range(n):
                if done_cols[j]:
                    continue
                r = min_val + cost[i, j] - u[i] - v[j]
                if r < shortest[j]:
                    shortest[j] = r
                    path[j] = i
                if shortest[j] < lowest:
                    lowest = shortest[j]
                    jmin = j
            if lowest >= threshold:
                return None
            min_val = lowest
            j = jmin
            done_cols[j] = 1
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]

        u[cur_row] = u[cur_row] + min_val
        for i in range(n):
            if done_rows[i] and i != cur_row:
                u[i] = u[i] + (min_val - shortest[col4row[i]])
        for j in range(n):
            if done_cols[j]:
                v[j] = v[j] - (min_val - shortest[j])

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            nxt = col4row[i]
            col4row[i] = j
            if i == cur_row:
                break
            j = nxt

    return col4row_arr
