"""Dense two-phase simplex method for the small LPs of the max-increase objective.

Problems here have a few dozen variables at most, so the tableau is kept
dense and pivoting follows Bland's rule, which cannot cycle.
"""

from __future__ import annotations

from typing import NamedTuple, Optional, Sequence

import numpy as np

PIVOT_TOL = 1e-11
FEASIBILITY_TOL = 1e-9
MAX_PIVOTS = 50_000


class LPError(RuntimeError):
    """The LP could not be solved; for the LPs built here this is a bug."""


class LPInfeasible(LPError):
    pass


class LPUnbounded(LPError):
    pass


class LPResult(NamedTuple):
    solution: np.ndarray
    value: float


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _run_simplex(T: np.ndarray, basis: list, costs: np.ndarray, allowed: int) -> None:
    """Maximize ``costs @ x`` on tableau ``T`` (last column = rhs) in place.

    Only columns below ``allowed`` may enter the basis.
    """
    for _ in range(MAX_PIVOTS):
        reduced = costs[:allowed] - costs[basis] @ T[:, :allowed]
        candidates = np.flatnonzero(reduced > PIVOT_TOL)
        if candidates.size == 0:
            return
        col = int(candidates[0])
        column = T[:, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            raise LPUnbounded(f"objective unbounded along column {col}")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise LPError("pivot limit reached")


def solve_lp(
    costs: Sequence[float],
    A_ub: Optional[np.ndarray] = None,
    b_ub: Optional[Sequence[float]] = None,
    A_eq: Optional[np.ndarray] = None,
    b_eq: Optional[Sequence[float]] = None,
    free: Optional[Sequence[int]] = None,
) -> LPResult:
    """Maximize ``costs @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x == b_eq``.

    Variables are nonnegative except those listed in ``free``.  Returns an
    optimal basic solution and its value.  Raises :class:`LPInfeasible` or
    :class:`LPUnbounded` when no optimum exists.
    """
    c = np.asarray(costs, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    if A_ub.shape != (b_ub.size, n) or A_eq.shape != (b_eq.size, n):
        raise ValueError("constraint shapes do not match the cost vector")
    free = sorted(set(free or ()))

    # split free variables x = u - v with u, v >= 0
    A_ub_s = np.hstack([A_ub, -A_ub[:, free]])
    A_eq_s = np.hstack([A_eq, -A_eq[:, free]])
    c_s = np.concatenate([c, -c[free]])
    n_split = c_s.size

    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    n_struct = n_split + m_ub  # structural + slack columns
    A = np.zeros((m, n_struct))
    A[:m_ub, :n_split] = A_ub_s
    A[:m_ub, n_split:] = np.eye(m_ub)
    A[m_ub:, :n_split] = A_eq_s
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # phase 1: artificial variable per row
    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n_struct, n_struct + m))
    phase1 = np.concatenate([np.zeros(n_struct), -np.ones(m)])
    _run_simplex(T, basis, phase1, n_struct + m)
    if T[:, -1] @ phase1[basis] < -FEASIBILITY_TOL:
        raise LPInfeasible("constraints admit no feasible point")

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = []
    for row in range(m):
        if basis[row] < n_struct:
            keep.append(row)
            continue
        nonzero = np.flatnonzero(np.abs(T[row, :n_struct]) > PIVOT_TOL)
        if nonzero.size:
            _pivot(T, row, int(nonzero[0]))
            basis[row] = int(nonzero[0])
            keep.append(row)
    T = np.hstack([T[keep, :n_struct], T[keep, -1:]])
    basis = [basis[r] for r in keep]

    phase2 = np.concatenate([c_s, np.zeros(m_ub)])
    _run_simplex(T, basis, phase2, n_struct)

    x_s = np.zeros(n_struct)
    x_s[basis] = T[:, -1]
    x = x_s[:n].copy()
    x[free] -= x_s[n:n_split]
    return LPResult(x, float(c @ x))
