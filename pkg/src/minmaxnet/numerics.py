"""Small dense linear algebra: singular values and null-space bases.

Both come out of one-sided Jacobi orthogonalisation, which is accurate
for the small matrices used here and needs nothing beyond numpy.  The
inner rotation loop is one of the compiled kernels (see ``_backend``).
"""

import numpy as np

from . import _backend

JACOBI_TOL = 1e-15
JACOBI_MAX_SWEEPS = 80
RANK_RTOL = 1e-10


class ConvergenceError(RuntimeError):
    pass


def as_dense(a, name="matrix"):
    """Validate and return ``a`` as a 2-D float64 array with finite entries."""
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def jacobi_svd(a, backend=None):
    """One-sided Jacobi decomposition ``a @ v == u * sigma``.

    Returns ``(sigma, v)`` with ``sigma`` the column norms of ``a @ v``
    sorted in descending order and ``v`` orthogonal, columns permuted to
    match.  ``sigma`` has ``a.shape[1]`` entries; for wide matrices the
    trailing ones are (numerically) zero.
    """
    a = as_dense(a)
    n = a.shape[1]
    work = np.ascontiguousarray(a)
    v = np.eye(n)
    if n > 1 and a.shape[0] > 0:
        floor = (n * np.finfo(float).eps * np.linalg.norm(a)) ** 2
        sweeps = _backend.get(backend).jacobi_orthogonalize(
            work, v, JACOBI_TOL, floor, JACOBI_MAX_SWEEPS
        )
        if sweeps < 0:
            raise ConvergenceError("Jacobi sweeps did not converge")
    sigma = np.sqrt(np.einsum("ij,ij->j", work, work))
    order = np.argsort(-sigma, kind="stable")
    return sigma[order], v[:, order]


def singular_values(a, backend=None):
    """All ``min(rows, cols)`` singular values of ``a``, descending."""
    a = as_dense(a)
    rows, cols = a.shape
    if rows == 0 or cols == 0:
        return np.zeros(0)
    if cols > rows:
        a = a.T
    sigma, _ = jacobi_svd(a, backend=backend)
    return sigma[: min(rows, cols)]


def numerical_rank(sigma):
    if sigma.size == 0:
        return 0
    thresh = RANK_RTOL * max(sigma[0], 1.0)
    return int(np.count_nonzero(sigma > thresh))


def orthonormal_nullspace_basis(normals, n=None, backend=None):
    """Orthonormal basis of the subspace orthogonal to every row of ``normals``.

    ``n`` is only needed when ``normals`` has no rows.  The result ``g``
    has ``n - rank`` columns, ``g.T @ g == I`` and ``normals @ g == 0``.
    A singular value below ``1e-10 * max(sigma_max, 1)`` counts as zero.
    """
    normals = np.asarray(normals, dtype=np.float64)
    if normals.ndim == 1:
        if normals.size == 0:
            normals = normals.reshape(0, n if n is not None else 0)
        else:
            normals = normals.reshape(1, -1)
    if n is None:
        n = normals.shape[1]
    if normals.shape[1] != n:
        raise ValueError(f"normals have {normals.shape[1]} columns, expected {n}")
    if n < 1:
        raise ValueError("ambient dimension must be at least 1")
    if normals.shape[0] == 0:
        return np.eye(n)
    normals = as_dense(normals, "normals")
    sigma, v = jacobi_svd(normals, backend=backend)
    rank = numerical_rank(sigma)
    return np.ascontiguousarray(v[:, rank:])
