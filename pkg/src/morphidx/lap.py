"""Assignment-solver front end selecting the best available backend.

The compiled kernel is preferred; when the extension was not built (or
``MORPHIDX_NO_EXT`` suppressed it) the numpy fallback is used.  Both
return bit-identical assignments; ``LAP_BACKEND`` names the active one.
"""

import os

import numpy as np

from .errors import InfeasibleAssignmentError

if os.environ.get("MORPHIDX_NO_EXT"):
    from ._lap_fallback import lap_solve as _lap_solve

    LAP_BACKEND = "fallback"
else:
    try:
        from ._lap import lap_solve as _lap_solve

        LAP_BACKEND = "compiled"
    except ImportError:
        from ._lap_fallback import lap_solve as _lap_solve

        LAP_BACKEND = "fallback"

# Entries at or above this value act as forbidden edges.
FORBIDDEN_EDGE_THRESHOLD = np.finfo(np.float64).max / 4.0


def solve_lap(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost bijection over a square float64 cost matrix.

    Parameters
    ----------
    cost : (n, n) array of finite reals.  Forbidden edges are marked with
        the float64 maximum sentinel (anything >= a quarter of it counts).

    Returns
    -------
    col4row : (n,) int64 array mapping each row to its assigned column.

    Raises
    ------
    InfeasibleAssignmentError
        If every bijection is forced through a forbidden edge.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite; mark forbidden edges with the sentinel")
    result = _lap_solve(cost)
    if result is None:
        raise InfeasibleAssignmentError("no finite-cost assignment exists")
    return result


def assignment_cost(cost: np.ndarray, col4row: np.ndarray) -> float:
    """Total cost of an assignment, summed in fixed row order."""
    n = cost.shape[0]
    return float(cost[np.arange(n), col4row].sum())
