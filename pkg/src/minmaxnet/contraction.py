"""Per-region contraction certificates for the learning step.

On a fixed activation pattern the network is linear in its weights,
``y_hat = Phi @ theta``, and one unconstrained step maps the weight error
through ``F = I - Phi.T @ D @ Phi`` with ``D = diag(alpha**2)``.  Seen from
the measurements, the weighted residual ``alpha * (y_hat - y)`` moves
through ``S = I - D**0.5 @ Phi @ Phi.T @ D**0.5``.  Both are identity minus
a Gram matrix of the rows ``alpha_m * Phi_m``, so they share the spectrum
away from 1.  A largest singular value at most 1 certifies that the step
does not expand the error; strictly below 1 gives exponential convergence.
"""

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import numerics
from .model import activation_matrix, activation_pattern

IDENTITY = "identity"
ALPHA2 = "alpha2"
METRICS = (IDENTITY, ALPHA2)
MAX_METRIC_CONDITION = 1e12


class MetricError(ValueError):
    """The metric restricted to the tangential subspace is too ill-conditioned."""


@dataclass
class ContractionReport:
    sigma_min: float  # None when the tangential subspace is empty
    sigma_max: float
    metric_kind: str
    subspace_dim: int
    region_signature: str = ""

    @property
    def contractive(self):
        return self.sigma_max is None or self.sigma_max <= 1.0 + 1e-12

    def to_json(self):
        return json.dumps(asdict(self), indent=1)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")


def _alpha(dataset, alpha):
    return np.asarray(dataset.alpha if alpha is None else alpha, dtype=np.float64)


def _phi(net, dataset, patterns):
    if patterns is None:
        patterns = activation_pattern(net, dataset.X)
    return activation_matrix(net, dataset.X, patterns), patterns


def region_signature(patterns):
    """Short stable tag for an activation pattern."""
    P = np.ascontiguousarray(patterns, dtype=np.int64)
    return hashlib.sha1(P.tobytes() + str(P.shape).encode()).hexdigest()[:12]


def weight_space_matrix(net, dataset, patterns=None, alpha=None):
    """``I - sum_m alpha_m**2 * A(x_m) A(x_m)^T`` over the stacked weights."""
    Phi, _ = _phi(net, dataset, patterns)
    a = _alpha(dataset, alpha)
    B = a[:, None] * Phi
    return np.eye(Phi.shape[1]) - B.T @ B


def measurement_space_matrix(net, dataset, patterns=None, alpha=None):
    """``delta_nm - alpha_n * sum_j A_j(x_n)^T A_j(x_m) * alpha_m``, an M x M matrix."""
    Phi, _ = _phi(net, dataset, patterns)
    a = _alpha(dataset, alpha)
    B = a[:, None] * Phi
    return np.eye(len(a)) - B @ B.T


def _whitened_extremes(FG, out_root, metric, backend=None):
    """Extreme generalized singular values: ``max/min |R FG u| / |u|_metric``.

    ``out_root`` is a square root ``R`` of the metric on the output side
    (``R^T R`` is that metric); ``metric`` is the metric on the input side,
    whitened with its Cholesky factor ``L`` so the values are the singular
    values of ``R FG L^-T``.
    """
    sv = numerics.singular_values(metric, backend=backend)
    if sv.size and (sv[-1] <= 0.0 or sv[0] / sv[-1] > MAX_METRIC_CONDITION):
        cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        raise MetricError(
            f"metric is singular or ill-conditioned (condition {cond:.3g}); "
            "try the identity metric"
        )
    L = np.linalg.cholesky(metric)
    W = out_root @ np.linalg.solve(L, FG.T).T
    s = numerics.singular_values(W, backend=backend)
    return float(s[-1]), float(s[0])


def certify_step(net, dataset, patterns=None, active_normals=None, metric=IDENTITY,
                 alpha=None, backend=None):
    """Contraction report for the constrained step on the region ``patterns``.

    ``active_normals`` holds the active edge-constraint normals as rows
    (stacked weight space); the step then lives on their tangential
    subspace ``G`` and the report holds the extreme values of ``|F G u|``
    over unit ``u``.  With ``alpha2`` the map is the measurement-space
    residual map ``I - Phi G G^T Phi^T D`` in the metric ``D = diag(alpha**2)``.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    Phi, patterns = _phi(net, dataset, patterns)
    a = _alpha(dataset, alpha)
    n = Phi.shape[1]
    if active_normals is None:
        G = np.eye(n)
    else:
        G = numerics.orthonormal_nullspace_basis(np.asarray(active_normals).reshape(-1, n), n=n,
                                                 backend=backend)
    sig = region_signature(patterns)
    d = G.shape[1]
    if d == 0:
        return ContractionReport(None, None, metric, 0, sig)
    D = a * a
    if metric == IDENTITY:
        B = a[:, None] * Phi
        FG = G - B.T @ (B @ G)
        smin, smax = _whitened_extremes(FG, np.eye(n), G.T @ G, backend)
    else:
        PG = Phi @ G
        T = np.eye(len(a)) - PG @ PG.T * D[None, :]
        smin, smax = _whitened_extremes(T, np.diag(a), np.diag(D), backend)
    return ContractionReport(smin, smax, metric, d, sig)


def worst_region(reports):
    """The report with the largest ``sigma_max``: the global rate over visited regions."""
    live = [r for r in reports if r.sigma_max is not None]
    if not live:
        return None
    return max(live, key=lambda r: r.sigma_max)
