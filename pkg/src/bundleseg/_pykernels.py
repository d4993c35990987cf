"""Pure numpy fallback for the compiled kernels in ``_ckernels.pyx``.

Both modules implement the same two functions with the same tie-breaking,
so assignments agree exactly between backends; distance blocks agree to
floating-point summation order.
"""
import numpy as np

NAME = "python"


def mc_block(a_points, a_offsets, b_points, b_offsets):
    """Mean-of-closest distance between every streamline of A and of B.

    Streamlines are given packed: ``points[offsets[i]:offsets[i+1]]``.
    Returns a float64 ``(len(A), len(B))`` array.
    """
    n_a = len(a_offsets) - 1
    n_b = len(b_offsets) - 1
    out = np.empty((n_a, n_b))
    if n_b == 0:
        return out
    b_starts = b_offsets[:-1]
    b_counts = np.diff(b_offsets).astype(np.float64)
    for i in range(n_a):
        pa = a_points[a_offsets[i]:a_offsets[i + 1]]
        # squared distances from each point of sa to every packed point of B
        diff = pa[:, None, :] - b_points[None, :, :]
        sq = diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2
        # directed a -> b_j: nearest point of b_j for each point of sa
        near_a = np.sqrt(np.minimum.reduceat(sq, b_starts, axis=1))
        d_ab = near_a.mean(axis=0)
        # directed b_j -> a: nearest point of sa for each point of b_j
        near_b = np.sqrt(sq.min(axis=0))
        d_ba = np.add.reduceat(near_b, b_starts) / b_counts
        out[i] = 0.5 * (d_ab + d_ba)
    return out


def _column_reduction(c, x, y, v):
    n = c.shape[0]
    matches = np.zeros(n, dtype=np.int64)
    for j in range(n - 1, -1, -1):
        i1 = int(np.argmin(c[:, j]))
        v[j] = c[i1, j]
        matches[i1] += 1
        if matches[i1] == 1:
            x[i1] = j
            y[j] = i1
        elif v[j] < v[x[i1]]:
            j1 = x[i1]
            x[i1] = j
            y[j] = i1
            y[j1] = -1
    free = []
    for i in range(n):
        if matches[i] == 0:
            free.append(i)
        elif matches[i] == 1 and n > 1:
            # reduction transfer
            j1 = x[i]
            h = c[i] - v
            h[j1] = np.inf
            v[j1] -= h.min()
    return free


def _augmenting_row_reduction(c, free, x, y, v, eps):
    n_cols = c.shape[1]
    n_free = len(free)
    free = list(free)
    new_free = []
    current = 0
    rr_cnt = 0
    while current < n_free:
        rr_cnt += 1
        i = free[current]
        current += 1
        h = c[i] - v
        j1 = int(np.argmin(h))
        u1 = h[j1]
        h[j1] = np.inf
        j2 = int(np.argmin(h))
        u2 = h[j2]
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
                    free[current] = i0
                else:
                    new_free.append(i0)
        elif i0 >= 0:
            new_free.append(i0)
        if i0 >= 0:
            x[i0] = -1
        x[i] = j1
        y[j1] = i
    return new_free


def _shortest_augmenting_path(c, cur, x, y, u, v):
    n_rows, n_cols = c.shape
    shortest = np.full(n_cols, np.inf)
    path = np.full(n_cols, -1, dtype=np.int64)
    scanned_rows = np.zeros(n_rows, dtype=bool)
    scanned_cols = np.zeros(n_cols, dtype=bool)
    unassigned = y < 0
    min_val = 0.0
    i = cur
    sink = -1
    while sink < 0:
        scanned_rows[i] = True
        r = min_val + c[i] - u[i] - v
        better = (r < shortest) & ~scanned_cols
        path[better] = i
        shortest[better] = r[better]
        masked = np.where(scanned_cols, np.inf, shortest)
        lowest = masked.min()
        ties = np.flatnonzero((masked == lowest) & ~scanned_cols)
        free_ties = ties[unassigned[ties]]
        j = int(free_ties[0]) if free_ties.size else int(ties[0])
        min_val = lowest
        scanned_cols[j] = True
        if y[j] < 0:
            sink = j
        else:
            i = int(y[j])

    u[cur] += min_val
    rows = np.flatnonzero(scanned_rows)
    rows = rows[rows != cur]
    u[rows] += min_val - shortest[x[rows]]
    cols = np.flatnonzero(scanned_cols)
    v[cols] -= min_val - shortest[cols]

    j = sink
    while True:
        i = int(path[j])
        y[j] = i
        x[i], j = j, x[i]
        if i == cur:
            break


def lapjv(cost, eps=1e-10):
    """Rectangular Jonker-Volgenant on a finite non-negative ``(L, Nc)`` cost
    array with ``L <= Nc``. Returns ``row_to_col`` as an int64 array."""
    c = np.ascontiguousarray(cost, dtype=np.float64)
    n_rows, n_cols = c.shape
    x = np.full(n_rows, -1, dtype=np.int64)
    y = np.full(n_cols, -1, dtype=np.int64)
    v = np.zeros(n_cols)
    if n_cols == 1:
        x[0] = 0
        return x
    if n_rows == n_cols:
        free = _column_reduction(c, x, y, v)
    else:
        # v must stay <= 0 on columns that end up unassigned, so no column
        # reduction in the rectangular case
        free = list(range(n_rows))
    for _ in range(2):
        if not free:
            break
        free = _augmenting_row_reduction(c, free, x, y, v, eps)

    u = np.zeros(n_rows)
    assigned = x >= 0
    u[assigned] = c[assigned, x[assigned]] - v[x[assigned]]
    for cur in sorted(free):
        _shortest_augmenting_path(c, cur, x, y, u, v)
    return x
