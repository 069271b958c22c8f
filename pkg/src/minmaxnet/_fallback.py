"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same two functions with the same in-place
semantics, so ``minmaxnet._backend`` can swap one for the other.
"""

import numpy as np


def jacobi_orthogonalize(a, v, tol, floor, max_sweeps):
    """One-sided (Hestenes) Jacobi on the columns of ``a``, in place.

    Rotations are accumulated into ``v``.  On return the columns of ``a``
    are mutually orthogonal and their norms are the singular values.
    Column pairs where either squared norm is at most ``floor`` are left
    alone (they are numerically zero).  Returns the number of sweeps used,
    or -1 if ``max_sweeps`` ran out.
    """
    n = a.shape[1]
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            ap = a[:, p]
            for q in range(p + 1, n):
                aq = a[:, q]
                alpha = ap @ ap
                beta = aq @ aq
                gamma = ap @ aq
                if alpha <= floor or beta <= floor:
                    continue
                if abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if abs(zeta) > 1e150:
                    t = 0.5 / zeta
                else:
                    t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                tmp = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                a[:, p] = tmp
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
                ap = a[:, p]
        if not rotated:
            return sweep + 1
    return -1


def simplex_pivot(T, basis, m, obj_row, n_enter, tol, max_iter):
    """Run Bland-rule simplex pivots on tableau ``T`` in place.

    Rows ``0..m-1`` are constraints, ``obj_row`` holds reduced costs of a
    minimisation, the last column is the right-hand side.  Only columns
    ``0..n_enter-1`` may enter the basis.

    Returns 0 at optimality, 1 if unbounded, 2 on the iteration limit,
    and the pivot count in a tuple ``(status, pivots)``.
    """
    rhs = T.shape[1] - 1
    for it in range(max_iter):
        d = T[obj_row, :n_enter]
        candidates = np.flatnonzero(d < -tol)
        if candidates.size == 0:
            return 0, it
        j = candidates[0]
        col = T[:m, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return 1, it
        ratios = T[rows, rhs] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, abs(best))]
        r = tied[np.argmin(basis[tied])]
        pivot_on(T, r, j)
        basis[r] = j
    return 2, max_iter


def pivot_on(T, r, j):
    T[r] /= T[r, j]
    factors = T[:, j].copy()
    factors[r] = 0.0
    T -= np.outer(factors, T[r])
