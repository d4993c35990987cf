# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: pairwise mean-of-closest blocks and rectangular LAPJV.

Mirrors ``_pykernels`` step for step (same scan order, same tie-breaking).
Both kernels release the GIL, so per-example work can run on threads.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

NAME = "cython"

ctypedef cnp.int64_t i64


cdef void _mc_pair(const double[:, ::1] a, i64 a0, i64 a1,
                   const double[:, ::1] b, i64 b0, i64 b1,
                   double* row_min, double* col_min, double* out) noexcept nogil:
    cdef i64 p, q, na = a1 - a0, nb = b1 - b0
    cdef double dx, dy, dz, d, s_ab = 0.0, s_ba = 0.0
    for q in range(nb):
        col_min[q] = INFINITY
    for p in range(na):
        row_min[p] = INFINITY
        for q in range(nb):
            dx = a[a0 + p, 0] - b[b0 + q, 0]
            dy = a[a0 + p, 1] - b[b0 + q, 1]
            dz = a[a0 + p, 2] - b[b0 + q, 2]
            d = dx * dx + dy * dy + dz * dz
            if d < row_min[p]:
                row_min[p] = d
            if d < col_min[q]:
                col_min[q] = d
    for p in range(na):
        s_ab += sqrt(row_min[p])
    for q in range(nb):
        s_ba += sqrt(col_min[q])
    out[0] = 0.5 * (s_ab / na + s_ba / nb)


def mc_block(a_points, a_offsets, b_points, b_offsets):
    """Mean-of-closest distance between every streamline of A and of B."""
    cdef const double[:, ::1] pa = np.ascontiguousarray(a_points, dtype=np.float64)
    cdef const double[:, ::1] pb = np.ascontiguousarray(b_points, dtype=np.float64)
    cdef const i64[::1] oa = np.ascontiguousarray(a_offsets, dtype=np.int64)
    cdef const i64[::1] ob = np.ascontiguousarray(b_offsets, dtype=np.int64)
    cdef Py_ssize_t n_a = oa.shape[0] - 1, n_b = ob.shape[0] - 1, i, j
    out_arr = np.empty((n_a, n_b), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef i64 max_a = 1, max_b = 1
    for i in range(n_a):
        max_a = max(max_a, oa[i + 1] - oa[i])
    for j in range(n_b):
        max_b = max(max_b, ob[j + 1] - ob[j])
    cdef double* row_min = <double*> malloc(max_a * sizeof(double))
    cdef double* col_min = <double*> malloc(max_b * sizeof(double))
    if row_min == NULL or col_min == NULL:
        free(row_min)
        free(col_min)
        raise MemoryError()
    try:
        with nogil:
            for i in range(n_a):
                for j in range(n_b):
                    _mc_pair(pa, oa[i], oa[i + 1], pb, ob[j], ob[j + 1],
                             row_min, col_min, &out[i, j])
    finally:
        free(row_min)
        free(col_min)
    return out_arr


cdef Py_ssize_t _column_reduction(const double[:, ::1] c, i64[::1] x, i64[::1] y,
                                  double[::1] v, i64[::1] free_rows) noexcept nogil:
    cdef Py_ssize_t n = c.shape[0], i, j, i1, j1, n_free = 0
    cdef double m, h
    cdef i64* matches = <i64*> malloc(n * sizeof(i64))
    for i in range(n):
        matches[i] = 0
    for j in range(n - 1, -1, -1):
        i1 = 0
        m = c[0, j]
        for i in range(1, n):
            if c[i, j] < m:
                m = c[i, j]
                i1 = i
        v[j] = m
        matches[i1] += 1
        if matches[i1] == 1:
            x[i1] = j
            y[j] = i1
        elif v[j] < v[x[i1]]:
            j1 = x[i1]
            x[i1] = j
            y[j] = i1
            y[j1] = -1
    for i in range(n):
        if matches[i] == 0:
            free_rows[n_free] = i
            n_free += 1
        elif matches[i] == 1 and n > 1:
            j1 = x[i]
            m = INFINITY
            for j in range(n):
                if j != j1:
                    h = c[i, j] - v[j]
                    if h < m:
                        m = h
            v[j1] -= m
    free(matches)
    return n_free


cdef Py_ssize_t _augmenting_row_reduction(const double[:, ::1] c, i64[::1] free_rows,
                                          Py_ssize_t n_free, i64[::1] x, i64[::1] y,
                                          double[::1] v, double eps) noexcept nogil:
    cdef Py_ssize_t n_cols = c.shape[1], current = 0, new_n = 0, j, j1, j2, i, i0
    cdef long long rr_cnt = 0
    cdef double h, u1, u2
    cdef bint lowers
    # new free rows are written to the front of free_rows; never overtakes current
    while current < n_free:
        rr_cnt += 1
        i = free_rows[current]
        current += 1
        u1 = c[i, 0] - v[0]
        j1 = 0
        u2 = INFINITY
        j2 = -1
        for j in range(1, n_cols):
            h = c[i, j] - v[j]
            if h < u2:
                if h >= u1:
                    u2 = h
                    j2 = j
                else:
                    u2 = u1
                    u1 = h
                    j2 = j1
                    j1 = j
        i0 = y[j1]
        lowers = (u2 - u1) > eps
        if rr_cnt < current * n_cols:
            if lowers:
                v[j1] -= u2 - u1
            elif i0 >= 0:
                j1 = j2
                i0 = y[j2]
            if i0 >= 0:
                if lowers:
                    current -= 1
                    free_rows[current] = i0
                else:
                    free_rows[new_n] = i0
                    new_n += 1
        elif i0 >= 0:
            free_rows[new_n] = i0
            new_n += 1
        if i0 >= 0:
            x[i0] = -1
        x[i] = j1
        y[j1] = i
    return new_n


cdef int _shortest_augmenting_path(const double[:, ::1] c, Py_ssize_t cur,
                                   i64[::1] x, i64[::1] y, double[::1] u, double[::1] v,
                                   double* shortest, i64* path, char* sr, char* sc,
                                   char* unassigned) noexcept nogil:
    cdef Py_ssize_t n_rows = c.shape[0], n_cols = c.shape[1], i, j, idx, sink = -1, tmp
    cdef double min_val = 0.0, lowest, r
    for j in range(n_cols):
        shortest[j] = INFINITY
        path[j] = -1
        sc[j] = 0
        unassigned[j] = y[j] < 0
    for i in range(n_rows):
        sr[i] = 0
    i = cur
    while sink < 0:
        sr[i] = 1
        lowest = INFINITY
        idx = -1
        for j in range(n_cols):
            if sc[j]:
                continue
            r = min_val + c[i, j] - u[i] - v[j]
            if r < shortest[j]:
                path[j] = i
                shortest[j] = r
            if idx < 0 or shortest[j] < lowest or (
                    shortest[j] == lowest and unassigned[j] and not unassigned[idx]):
                lowest = shortest[j]
                idx = j
        if idx < 0:
            return -1
        min_val = lowest
        sc[idx] = 1
        if y[idx] < 0:
            sink = idx
        else:
            i = y[idx]

    u[cur] += min_val
    for i in range(n_rows):
        if sr[i] and i != cur:
            u[i] += min_val - shortest[x[i]]
    for j in range(n_cols):
        if sc[j]:
            v[j] -= min_val - shortest[j]

    j = sink
    while True:
        i = path[j]
        y[j] = i
        tmp = x[i]
        x[i] = j
        j = tmp
        if i == cur:
            break
    return 0


def lapjv(cost, double eps=1e-10):
    """Rectangular Jonker-Volgenant on a finite non-negative ``(L, Nc)`` cost
    array with ``L <= Nc``. Returns ``row_to_col`` as an int64 array."""
    cdef const double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n_rows = c.shape[0], n_cols = c.shape[1], i, k, n_free
    x_arr = np.full(n_rows, -1, dtype=np.int64)
    cdef i64[::1] x = x_arr
    if n_cols == 1:
        x[0] = 0
        return x_arr
    cdef i64[::1] y = np.full(n_cols, -1, dtype=np.int64)
    cdef double[::1] v = np.zeros(n_cols)
    cdef double[::1] u = np.zeros(n_rows)
    cdef i64[::1] free_rows = np.empty(n_rows, dtype=np.int64)
    cdef double* shortest = NULL
    cdef i64* path = NULL
    cdef char* sr = NULL
    cdef char* sc = NULL
    cdef char* unassigned = NULL
    cdef int status = 0

    with nogil:
        if n_rows == n_cols:
            n_free = _column_reduction(c, x, y, v, free_rows)
        else:
            # v must stay <= 0 on columns that end up unassigned
            for i in range(n_rows):
                free_rows[i] = i
            n_free = n_rows
        for k in range(2):
            if n_free == 0:
                break
            n_free = _augmenting_row_reduction(c, free_rows, n_free, x, y, v, eps)
        for i in range(n_rows):
            if x[i] >= 0:
                u[i] = c[i, x[i]] - v[x[i]]
    if n_free:
        # process leftover free rows in ascending order
        order = np.sort(np.asarray(free_rows[:n_free]))
        for k in range(n_free):
            free_rows[k] = order[k]
        shortest = <double*> malloc(n_cols * sizeof(double))
        path = <i64*> malloc(n_cols * sizeof(i64))
        sr = <char*> malloc(n_rows)
        sc = <char*> malloc(n_cols)
        unassigned = <char*> malloc(n_cols)
        try:
            if not (shortest and path and sr and sc and unassigned):
                raise MemoryError()
            with nogil:
                for k in range(n_free):
                    status = _shortest_augmenting_path(c, free_rows[k], x, y, u, v,
                                                       shortest, path, sr, sc, unassigned)
                    if status != 0:
                        break
            if status != 0:
                raise ValueError("cost matrix is infeasible")
        finally:
            free(shortest)
            free(path)
            free(sr)
            free(sc)
            free(unassigned)
    return x_arr
