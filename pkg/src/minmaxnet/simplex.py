"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``
and ``x >= 0``.  Problems here have
at most a few hundred rows, so a dense tableau is the simplest correct
choice.  The pivot loop itself lives in the kernel backend.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend

PIVOT_TOL = 1e-12


class LPError(RuntimeError):
    pass


class InfeasibleLP(LPError):
    pass


class UnboundedLP(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    basis: np.ndarray
    pivots: int


def linprog_min(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol=PIVOT_TOL,
                max_iter=None, backend=None):
    """Minimise ``c @ x`` over ``A_ub x <= b_ub, A_eq x == b_eq, x >= 0``."""
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=np.float64).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=np.float64).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64).ravel()
    if b_ub.size != len(A_ub) or b_eq.size != len(A_eq):
        raise ValueError("constraint matrix and right-hand side lengths differ")
    m_ub, m_eq = len(A_ub), len(A_eq)
    m = m_ub + m_eq
    if m == 0:
        if np.any(c < 0):
            raise UnboundedLP("no constraints and a negative cost")
        return LPResult(np.zeros(n), 0.0, np.zeros(0, dtype=np.int64), 0)

    kern = _backend.get(backend)
    if max_iter is None:
        max_iter = 50 * (m + n) + 100

    A = np.vstack([A_ub, A_eq])
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    sign = np.where(flip, -1.0, 1.0)
    # equality rows and negative-rhs inequality rows start on an artificial
    needs_art = flip.copy()
    needs_art[m_ub:] = True
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    n_real = n + m_ub  # structural + slack columns, the only ones allowed to enter
    ncols = n_real + n_art
    # rows 0..m-1 constraints, row m phase-2 costs, row m+1 phase-1 costs
    T = np.zeros((m + 2, ncols + 1))
    T[:m, :n] = A * sign[:, None]
    T[np.arange(m_ub), n + np.arange(m_ub)] = sign[:m_ub]
    T[:m, -1] = b * sign
    basis = np.empty(m, dtype=np.int64)
    basis[:m_ub] = n + np.arange(m_ub)
    for i, r in enumerate(art_rows):
        T[r, n_real + i] = 1.0
        basis[r] = n_real + i
    T[m, :n] = c

    pivots = 0
    if n_art:
        T[m + 1, :n_real] = -T[art_rows, :n_real].sum(axis=0)
        T[m + 1, -1] = -T[art_rows, -1].sum()
        status, it = kern.simplex_pivot(T, basis, m, m + 1, n_real, tol, max_iter)
        pivots += it
        if status == 2:
            raise LPError("phase 1 hit the iteration limit")
        scale = max(1.0, np.abs(b).max())
        if -T[m + 1, -1] > 1e-9 * scale:
            raise InfeasibleLP(f"phase 1 optimum {-T[m + 1, -1]:.3e} > 0")
        # drive leftover (zero-valued) artificials out of the basis; a row
        # with no usable pivot is redundant and keeps its artificial at 0
        for r in np.flatnonzero(basis >= n_real):
            cand = np.flatnonzero(np.abs(T[r, :n_real]) > 1e-9)
            if cand.size:
                kern.pivot_on(T, r, cand[0])
                basis[r] = cand[0]
                pivots += 1

    status, it = kern.simplex_pivot(T, basis, m, m, n_real, tol, max_iter)
    pivots += it
    if status == 1:
        raise UnboundedLP("objective unbounded below")
    if status == 2:
        raise LPError("phase 2 hit the iteration limit")

    full = np.zeros(ncols)
    full[basis] = T[:m, -1]
    x = _polish(A, b, m_ub, basis, n_real, full[:n])
    return LPResult(x, float(c @ x), basis.copy(), pivots)


def _polish(A, b, m_ub, basis, n_real, x):
    """Re-solve the basic system from the original data for full accuracy."""
    m, n = A.shape
    cols = basis[basis < n_real]
    if cols.size != m:
        return x
    slack = np.zeros((m, m_ub))
    slack[np.arange(m_ub), np.arange(m_ub)] = 1.0
    M = np.hstack([A, slack])[:, cols]
    try:
        sol = np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        return x
    full = np.zeros(n_real)
    full[cols] = sol
    if np.any(full < -1e-9) or not np.all(np.isfinite(full)):
        return x
    return np.maximum(full[:n], 0.0)
