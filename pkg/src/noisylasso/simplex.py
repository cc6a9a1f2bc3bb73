"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves   min c'x   s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.

Meant for small problems (a few hundred variables); larger LPs should go
through scipy's HiGHS interface instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    status: str
    iterations: int


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _optimize(T: np.ndarray, basis: list[int], ncols: int, max_iter: int, tol: float, it0: int) -> tuple[str, int]:
    m = len(basis)
    it = it0
    while True:
        cost = T[-1, :ncols]
        candidates = np.flatnonzero(cost < -tol)
        if candidates.size == 0:
            return "optimal", it
        if it >= max_iter:
            raise LPError(f"simplex iteration cap {max_iter} reached")
        j = int(candidates[0])
        col = T[:m, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return "unbounded", it
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, r, j)
        basis[r] = j
        it += 1


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter: int = 50_000,
            tol: float = 1e-10) -> LPResult:
    c = np.asarray(c, dtype=float)
    nx = c.size
    A_ub = np.zeros((0, nx)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, nx)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # standard form: [A_ub I; A_eq 0] [x; s] = b with b >= 0
    A = np.zeros((m, nx + m_ub))
    A[:m_ub, :nx] = A_ub
    A[:m_ub, nx:] = np.eye(m_ub)
    A[m_ub:, :nx] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    n_std = nx + m_ub

    # slack columns serve as the initial basis where possible, artificials elsewhere
    basis: list[int] = []
    art_rows = []
    for i in range(m):
        if i < m_ub and not neg[i]:
            basis.append(nx + i)
        else:
            basis.append(-1)
            art_rows.append(i)
    n_art = len(art_rows)
    ncols = n_std + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n_std] = A
    T[:m, -1] = b
    for a, i in enumerate(art_rows):
        T[i, n_std + a] = 1.0
        basis[i] = n_std + a

    it = 0
    if n_art:
        T[-1, :] = 0.0
        for i in art_rows:
            T[-1, :n_std] -= T[i, :n_std]
            T[-1, -1] -= T[i, -1]
        status, it = _optimize(T, basis, ncols, max_iter, tol, it)
        if -T[-1, -1] > tol * max(1.0, np.abs(b).max(initial=0.0)) * 1e3:
            return LPResult(np.full(nx, np.nan), np.nan, "infeasible", it)
        # drive remaining artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n_std:
                nz = np.flatnonzero(np.abs(T[i, :n_std]) > tol)
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
                else:
                    keep[i] = False
        rows = np.flatnonzero(keep)
        T = np.vstack([T[rows][:, list(range(n_std)) + [ncols]], np.zeros((1, n_std + 1))])
        basis = [basis[i] for i in rows]
        ncols = n_std

    cost = np.concatenate([c, np.zeros(m_ub)])
    mm = len(basis)
    cB = cost[basis]
    T[-1, :ncols] = cost - cB @ T[:mm, :ncols]
    T[-1, -1] = -cB @ T[:mm, -1]
    status, it = _optimize(T, basis, ncols, max_iter, tol, it)
    if status == "unbounded":
        return LPResult(np.full(nx, np.nan), -np.inf, "unbounded", it)
    x_std = np.zeros(ncols)
    x_std[basis] = T[:mm, -1]
    x = x_std[:nx]
    return LPResult(x, float(c @ x), "optimal", it)
