"""Dense two-phase simplex with Bland's anti-cycling rule.

Solves small problems of the form

    maximize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x[j] >= 0 for every j not listed in ``free``

Everything the package needs (matrix-game values, occupation-measure best
responses) is a few hundred variables at most, so a dense tableau is fine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9


class LPError(RuntimeError):
    """Raised when a problem that must be solvable turns out not to be."""


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float | None
    pivots: int

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    nz = np.nonzero(np.abs(colvals) > 0.0)[0]
    if nz.size:
        T[nz] -= np.outer(colvals[nz], T[row])


def _run(T: np.ndarray, basis: np.ndarray, ncols: int, tol: float, max_pivots: int) -> tuple[str, int]:
    """Maximize the objective stored (negated) in the last row of T.

    Columns ``>= ncols`` (besides the rhs) are never allowed to enter.
    """
    m = T.shape[0] - 1
    pivots = 0
    while pivots < max_pivots:
        reduced = T[m, :ncols]
        candidates = np.nonzero(reduced < -tol)[0]
        if candidates.size == 0:
            return "optimal", pivots
        col = int(candidates[0])  # Bland: lowest index improving column
        column = T[:m, col]
        rows = np.nonzero(column > tol)[0]
        if rows.size == 0:
            return "unbounded", pivots
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        # Bland: among tied rows leave the one whose basic variable has lowest index
        row = int(ties[np.argmin(basis[ties])])
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
    raise LPError(f"simplex exceeded {max_pivots} pivots")


def linprog_max(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    free=(),
    tol: float = FEAS_TOL,
    max_pivots: int = 50_000,
) -> LPResult:
    """Maximize ``c @ x`` subject to the given constraints (see module doc)."""
    c = np.asarray(c, dtype=float)
    n = c.size
    free = sorted(set(int(j) for j in free))

    # split free variables into positive and negative parts
    if free:
        extra = np.zeros((n, len(free)))
        for k, j in enumerate(free):
            extra[j, k] = -1.0
        expand = np.hstack([np.eye(n), extra])
    else:
        expand = np.eye(n)
    nv = expand.shape[1]
    cc = c @ expand

    blocks_A, blocks_b, slack_rows = [], [], 0
    if A_ub is not None and len(A_ub):
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float)) @ expand
        blocks_A.append(A_ub)
        blocks_b.append(np.asarray(b_ub, dtype=float).ravel())
        slack_rows = A_ub.shape[0]
    if A_eq is not None and len(A_eq):
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float)) @ expand
        blocks_A.append(A_eq)
        blocks_b.append(np.asarray(b_eq, dtype=float).ravel())
    if not blocks_A:
        if np.any(cc > tol):
            return LPResult("unbounded", None, None, 0)
        return LPResult("optimal", np.zeros(n), 0.0, 0)

    A = np.vstack(blocks_A)
    b = np.concatenate(blocks_b)
    m = A.shape[0]
    S = np.zeros((m, slack_rows))
    S[:slack_rows, :slack_rows] = np.eye(slack_rows)
    A = np.hstack([A, S])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    ncore = nv + slack_rows

    # phase 1: artificial variable on every row
    T = np.zeros((m + 1, ncore + m + 1))
    T[:m, :ncore] = A
    T[:m, ncore:ncore + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :ncore] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = np.arange(ncore, ncore + m)
    # phase 1 is bounded below by zero, so an "unbounded" verdict only means a
    # noise-level reduced cost survived; feasibility is decided by the residual
    _, p1 = _run(T, basis, ncore, tol, max_pivots)
    if -T[m, -1] > tol * max(1.0, np.abs(b).max()) * 10:
        return LPResult("infeasible", None, None, p1)

    # drive remaining artificials out of the basis, dropping redundant rows
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= ncore:
            nz = np.nonzero(np.abs(T[r, :ncore]) > tol)[0]
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
            else:
                keep[r] = False
    rows = np.nonzero(keep)[0]
    T2 = np.zeros((rows.size + 1, ncore + 1))
    T2[:-1, :ncore] = T[rows, :ncore]
    T2[:-1, -1] = T[rows, -1]
    basis = basis[rows]
    obj = np.zeros(ncore)
    obj[:nv] = cc
    T2[-1, :ncore] = -obj
    T2[-1, -1] = 0.0
    for r, j in enumerate(basis):
        if obj[j] != 0.0:
            T2[-1] += obj[j] * T2[r]
    status, p2 = _run(T2, basis, ncore, tol, max_pivots)
    if status != "optimal":
        return LPResult(status, None, None, p1 + p2)

    z = np.zeros(ncore)
    z[basis] = T2[:-1, -1]
    x = expand @ z[:nv]
    return LPResult("optimal", x, float(c @ x), p1 + p2)


def matrix_game(M) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and optimal mixed strategies of the zero-sum game where the row
    player maximizes ``M[row, col]``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    shift = M.min()
    P = M - shift + 1.0  # strictly positive payoff: value >= 1
    # row player: min sum(u) s.t. P^T u >= 1, u >= 0  ->  max -sum(u)
    res = linprog_max(-np.ones(rows), A_ub=-P.T, b_ub=-np.ones(cols))
    if not res.ok:
        raise LPError(f"matrix game (row side) LP {res.status}")
    value = 1.0 / res.x.sum()
    x = np.clip(res.x * value, 0.0, None)
    # column player: max sum(w) s.t. P w <= 1
    res2 = linprog_max(np.ones(cols), A_ub=P, b_ub=np.ones(rows))
    if not res2.ok:
        raise LPError(f"matrix game (column side) LP {res2.status}")
    y = np.clip(res2.x / res2.x.sum(), 0.0, None)
    return value + shift - 1.0, x / x.sum(), y / y.sum()
