"""Dense two-phase simplex for small LPs.

Maximizes c'x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0. Bland's rule
is used for both entering and leaving choices, so cycling cannot occur. The
problems here are tiny (a few hundred rows), so a full tableau is fine.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InfeasibleProblem

__all__ = ["solve_lp"]

_TOL = 1e-9


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _iterate(T: np.ndarray, basis: np.ndarray, cost: np.ndarray,
             enterable: np.ndarray) -> str:
    """Run simplex pivots to optimality for `maximize cost'x`."""
    while True:
        reduced = cost - cost[basis] @ T[:, :-1]
        candidates = np.flatnonzero((reduced > _TOL) & enterable)
        if candidates.size == 0:
            return "optimal"
        enter = int(candidates[0])  # Bland: smallest eligible index
        col = T[:, enter]
        rows = np.flatnonzero(col > _TOL)
        if rows.size == 0:
            return "unbounded"
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + _TOL]
        leave = int(ties[np.argmin(basis[ties])])  # Bland on the basic variable
        _pivot(T, basis, leave, enter)


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None) -> np.ndarray:
    """Return an optimal vertex x >= 0 maximizing c'x, or raise.

    Raises InfeasibleProblem when no feasible point exists and ValueError
    when the objective is unbounded above.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, float))
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, float))

    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    # slack columns for the <= rows
    A = np.vstack([A_ub, A_eq])
    S = np.vstack([np.eye(m_ub), np.zeros((m_eq, m_ub))])
    M = np.hstack([A, S])
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    M[flip] *= -1.0
    b = np.abs(b)

    n_real = n + m_ub
    T = np.hstack([M, np.eye(m), b[:, None]])
    basis = np.arange(n_real, n_real + m)
    enterable = np.ones(T.shape[1] - 1, dtype=bool)

    # phase 1: drive the artificial variables to zero
    cost1 = np.concatenate([np.zeros(n_real), -np.ones(m)])
    status = _iterate(T, basis, cost1, enterable)
    if status != "optimal" or -(cost1[basis] @ T[:, -1]) > 1e-7:
        raise InfeasibleProblem("no feasible point satisfies the constraints")

    # pin artificials: never re-enter; pivot out any still basic at zero
    enterable[n_real:] = False
    drop_rows = []
    for i in range(m):
        if basis[i] >= n_real:
            pivots = np.flatnonzero(np.abs(T[i, :n_real]) > _TOL)
            if pivots.size:
                _pivot(T, basis, i, int(pivots[0]))
            else:
                drop_rows.append(i)  # redundant constraint
    if drop_rows:
        keep = [i for i in range(len(basis)) if i not in drop_rows]
        T = T[keep]
        basis = basis[keep]

    cost2 = np.concatenate([c, np.zeros(T.shape[1] - 1 - n)])
    status = _iterate(T, basis, cost2, enterable)
    if status == "unbounded":
        raise ValueError("objective is unbounded above")

    x = np.zeros(T.shape[1] - 1)
    x[basis] = T[:, -1]
    return x[:n]
