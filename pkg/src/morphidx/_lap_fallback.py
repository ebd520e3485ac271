"""Pure-numpy assignment kernel with the same contract as the compiled one.

Implements the identical shortest-augmenting-path algorithm, vectorizing
the per-row edge relaxation.  Arithmetic is performed in the same order
as the compiled kernel, so the two backends return bit-identical
assignments and can be swapped freely.
"""

import numpy as np

_THRESHOLD = np.finfo(np.float64).max / 4.0


def lap_solve(cost: np.ndarray):
    """Return col4row, the int64 column assigned to each row, or None.

    None signals that no assignment of finite cost exists.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    n = cost.shape[0]

    u = np.zeros(n, dtype=np.float64)
    v = np.zeros(n, dtype=np.float64)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)

    for cur_row in range(n):
        shortest = np.full(n, np.inf)
        path = np.full(n, -1, dtype=np.int64)
        done_rows = np.zeros(n, dtype=bool)
        done_cols = np.zeros(n, dtype=bool)
        min_val = 0.0
        sink = -1
        i = cur_row
        while sink == -1:
            done_rows[i] = True
            open_cols = (~done_cols).nonzero()[0]
            cand = min_val + cost[i, open_cols] - u[i] - v[open_cols]
            better = cand < shortest[open_cols]
            shortest[open_cols[better]] = cand[better]
            path[open_cols[better]] = i

            local = int(np.argmin(shortest[open_cols]))
            lowest = float(shortest[open_cols[local]])
            if lowest >= _THRESHOLD:
                return None
            min_val = lowest
            j = int(open_cols[local])
            done_cols[j] = True
            if row4col[j] == -1:
                sink = j
            else:
                i = int(row4col[j])

        u[cur_row] += min_val
        scanned = done_rows.copy()
        scanned[cur_row] = False
        if scanned.any():
            u[scanned] += min_val - shortest[col4row[scanned]]
        v[done_cols] -= min_val - shortest[done_cols]

        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            nxt = int(col4row[i])
            col4row[i] = j
            if i == cur_row:
                break
            j = nxt

    return col4row
