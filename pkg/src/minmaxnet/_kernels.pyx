# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_fallback``.

Same signatures and in-place semantics; see ``_fallback`` for the
documentation of each function.
"""

from libc.math cimport fabs, sqrt, copysign

import numpy as np


def jacobi_orthogonalize(double[:, ::1] a, double[:, ::1] v, double tol, double floor,
                         int max_sweeps):
    cdef Py_ssize_t rows = a.shape[0], n = a.shape[1], nv = v.shape[0]
    cdef Py_ssize_t p, q, i
    cdef int sweep
    cdef bint rotated
    cdef double alpha, beta, gamma, zeta, t, c, s, xp, xq
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(rows):
                    xp = a[i, p]
                    xq = a[i, q]
                    alpha += xp * xp
                    beta += xq * xq
                    gamma += xp * xq
                if alpha <= floor or beta <= floor:
                    continue
                if fabs(gamma) <= tol * sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if fabs(zeta) > 1e150:
                    t = 0.5 / zeta
                else:
                    t = copysign(1.0, zeta) / (fabs(zeta) + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for i in range(rows):
                    xp = a[i, p]
                    xq = a[i, q]
                    a[i, p] = c * xp - s * xq
                    a[i, q] = s * xp + c * xq
                for i in range(nv):
                    xp = v[i, p]
                    xq = v[i, q]
                    v[i, p] = c * xp - s * xq
                    v[i, q] = s * xp + c * xq
        if not rotated:
            return sweep + 1
    return -1


def pivot_on(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j):
    cdef Py_ssize_t rows = T.shape[0], cols = T.shape[1], i, k
    cdef double piv = T[r, j], f
    for k in range(cols):
        T[r, k] /= piv
    for i in range(rows):
        if i == r:
            continue
        f = T[i, j]
        if f == 0.0:
            continue
        for k in range(cols):
            T[i, k] -= f * T[r, k]


def simplex_pivot(double[:, ::1] T, long long[::1] basis, Py_ssize_t m, Py_ssize_t obj_row,
                  Py_ssize_t n_enter, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t rhs = T.shape[1] - 1
    cdef Py_ssize_t it, j, i, r
    cdef double best, ratio, lim
    for it in range(max_iter):
        j = -1
        for i in range(n_enter):
            if T[obj_row, i] < -tol:
                j = i
                break
        if j < 0:
            return 0, it
        best = 0.0
        r = -1
        for i in range(m):
            if T[i, j] > tol:
                ratio = T[i, rhs] / T[i, j]
                if r < 0 or ratio < best:
                    best = ratio
                    r = i
        if r < 0:
            return 1, it
        # among rows tied with the minimum ratio take the lowest basis index
        lim = best + tol * max(1.0, fabs(best))
        r = -1
        for i in range(m):
            if T[i, j] > tol and T[i, rhs] / T[i, j] <= lim:
                if r < 0 or basis[i] < basis[r]:
                    r = i
        pivot_on(T, r, j)
        basis[r] = j
    return 2, max_iter
