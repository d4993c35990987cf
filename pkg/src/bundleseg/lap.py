"""Square and rectangular linear assignment.

``solve_rlap`` assigns every row of an ``(L, Nc)`` cost matrix (``L <= Nc``)
to a distinct column at minimum total cost, using a Jonker-Volgenant solver
(column reduction for square inputs, augmenting row reduction, then shortest
augmenting paths). ``brute_force_lap`` enumerates all injections and exists
only as a test oracle.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import EmptyMatrix, NonFiniteCost, ShapeError, TooLargeForOracle

# dual-feasibility tolerance for the augmenting row reduction
EPS = 1e-10
ORACLE_MAX_COLS = 9


@dataclass(frozen=True)
class Assignment:
    row_to_col: tuple
    total_cost: float

    def __post_init__(self):
        cols = tuple(int(j) for j in self.row_to_col)
        if len(set(cols)) != len(cols):
            raise ShapeError("assignment is not injective")
        object.__setattr__(self, "row_to_col", cols)
        object.__setattr__(self, "total_cost", float(self.total_cost))

    def __len__(self):
        return len(self.row_to_col)


def as_cost_matrix(c) -> np.ndarray:
    """Validate and convert to a float64 ``(L, Nc)`` array with ``1 <= L <= Nc``."""
    m = np.asarray(c, dtype=np.float64)
    if m.ndim == 1 and m.size:
        m = m[None, :]
    if m.ndim != 2:
        raise ShapeError(f"cost matrix must be 2-D, got {m.ndim}-D")
    if m.size == 0:
        raise EmptyMatrix("cost matrix is empty")
    if not np.all(np.isfinite(m)):
        raise NonFiniteCost("cost matrix contains non-finite values")
    if m.shape[0] > m.shape[1]:
        raise ShapeError(f"more rows than columns: {m.shape}")
    return m


def assignment_cost(c, a: Assignment) -> float:
    """Recompute the objective for ``a`` from the matrix."""
    m = np.asarray(c, dtype=np.float64)
    if m.ndim != 2 or len(a.row_to_col) != m.shape[0]:
        raise ShapeError("assignment does not match matrix rows")
    cols = np.asarray(a.row_to_col, dtype=np.int64)
    if cols.size and (cols.min() < 0 or cols.max() >= m.shape[1]):
        raise ShapeError("assignment column out of range")
    return float(m[np.arange(m.shape[0]), cols].sum())


def _finish(m: np.ndarray, row_to_col) -> Assignment:
    cols = np.asarray(row_to_col, dtype=np.int64)
    return Assignment(tuple(cols.tolist()), float(m[np.arange(m.shape[0]), cols].sum()))


def solve_rlap(c, *, padded: bool = False, kernels=None) -> Assignment:
    """Minimum-cost injective assignment of rows to columns.

    Parameters
    ----------
    c : array_like, shape (L, Nc)
        Finite costs with ``L <= Nc``.
    padded : bool
        Solve by padding to a square matrix with zero-cost dummy rows instead
        of the native rectangular path. Used as a cross-check in tests.
    kernels : module, optional
        Kernel backend; defaults to the one selected at import.

    Returns
    -------
    Assignment
        ``total_cost`` is summed from the original (unshifted) costs.
    """
    m = as_cost_matrix(c)
    kernels = kernels or _backend.kernels
    # the solver assumes non-negative costs
    shifted = m - m.min()
    if padded and m.shape[0] < m.shape[1]:
        square = np.zeros((m.shape[1], m.shape[1]))
        square[: m.shape[0]] = shifted
        x = kernels.lapjv(square, EPS)[: m.shape[0]]
    else:
        x = kernels.lapjv(shifted, EPS)
    return _finish(m, x)


def solve_lap(c, *, kernels=None) -> Assignment:
    """Square LAP; same as :func:`solve_rlap` but insists on ``L == Nc``."""
    m = as_cost_matrix(c)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"square matrix required, got {m.shape}")
    return solve_rlap(m, kernels=kernels)


def brute_force_lap(c) -> Assignment:
    """Exhaustive minimum over all injections; first minimum in lexicographic order wins."""
    m = as_cost_matrix(c)
    n_rows, n_cols = m.shape
    if n_cols > ORACLE_MAX_COLS:
        raise TooLargeForOracle(f"{n_cols} columns exceeds the oracle limit of {ORACLE_MAX_COLS}")
    perms = np.array(list(itertools.permutations(range(n_cols), n_rows)), dtype=np.int64)
    costs = m[np.arange(n_rows), perms].sum(axis=1)
    best = perms[int(np.argmin(costs))]
    return _finish(m, best)
