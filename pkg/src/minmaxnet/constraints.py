"""Edge constraints, active sets and Lagrange multipliers.

Every measurement ``m`` and neuron ``j`` contribute one linear inequality
per non-active basic neuron ``k``, keeping the active basic neuron ``k*``
extremal after the step::

    Min neuron:  x_m @ w_{j,k*} - x_m @ w_{j,k} <= 0
    Max neuron:  x_m @ w_{j,k}  - x_m @ w_{j,k*} <= 0

In the flattened parameter space each one is ``g_l @ theta + h_l <= 0``
with ``h_l = 0``.  The multipliers ``lambda_l <= 0`` of a step target
``f`` maximise ``sum(lambda)`` subject to
``g_l @ (f + sum_k g_k lambda_k) + h_l <= 0``, with every constraint that
carries a multiplier holding with equality after the step.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .model import MIN
from .simplex import InfeasibleLP, linprog_min

EPS_ACTIVE = 1e-9
EPS_FEASIBLE = 1e-9


class ConstraintConflict(RuntimeError):
    """The multiplier LP has no feasible point; the caller should shrink the step."""


@dataclass(frozen=True)
class ConstraintSpec:
    neuron: int
    measurement: int
    nonactive: int
    active: int
    normal: np.ndarray
    offset: float = 0.0

    def value(self, theta):
        return float(self.normal @ theta + self.offset)


class EdgeConstraints:
    """All edge constraints at one iterate.

    Row ``l`` says that basic neuron ``active[l]`` of neuron ``neuron[l]``
    stays extremal against ``nonactive[l]`` at input ``measurement[l]``.
    Each normal touches only two basic-neuron blocks, so values are
    computed from the basic-neuron outputs; the dense ``(L, n_params)``
    matrix is built on first access of :attr:`normals`, and
    :meth:`rows` gives any subset.  Indexing yields
    :class:`ConstraintSpec` objects.
    """

    def __init__(self, X, width, block_start, sign, neuron, measurement, nonactive, active):
        self.X = X
        self.width = width
        self.n_params = int(block_start[-1]) * width if len(block_start) else 0
        self._block_start = block_start  # first basic neuron of each neuron
        self.sign = sign
        self.neuron = neuron
        self.measurement = measurement
        self.nonactive = nonactive
        self.active = active
        self.offsets = np.zeros(len(neuron))
        self._dense = None

    def __len__(self):
        return len(self.neuron)

    def __getitem__(self, l):
        return ConstraintSpec(
            int(self.neuron[l]),
            int(self.measurement[l]),
            int(self.nonactive[l]),
            int(self.active[l]),
            self.rows([l])[0],
            float(self.offsets[l]),
        )

    def __iter__(self):
        return (self[l] for l in range(len(self)))

    def rows(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        G = np.zeros((idx.size, self.n_params))
        if idx.size == 0:
            return G
        base = self._block_start[self.neuron[idx]]
        pos = (base + self.active[idx]) * self.width
        neg = (base + self.nonactive[idx]) * self.width
        xs = self.X[self.measurement[idx]] * self.sign[idx, None]
        r = np.arange(idx.size)
        for c in range(self.width):
            G[r, pos + c] = xs[:, c]
            G[r, neg + c] = -xs[:, c]
        return G

    @property
    def normals(self):
        if self._dense is None:
            self._dense = self.rows(np.arange(len(self)))
        return self._dense

    def values(self, theta):
        Z = self.X @ np.asarray(theta, dtype=np.float64).reshape(-1, self.width).T
        base = self._block_start[self.neuron]
        m = self.measurement
        return self.sign * (Z[m, base + self.active] - Z[m, base + self.nonactive])


def build_edge_constraints(net, X, patterns):
    """Edge constraints for ``patterns`` (shape ``(M, J)``) at inputs ``X``."""
    X = np.asarray(X, dtype=np.float64)
    M = X.shape[0]
    rows_j, rows_m, rows_k, rows_ks = [], [], [], []
    for j, nr in enumerate(net.neurons):
        K = nr.n_basic
        if K < 2:
            continue
        ks = np.repeat(patterns[:, j], K - 1)
        ms = np.repeat(np.arange(M), K - 1)
        # every k except k* for each measurement, in ascending k order
        allk = np.tile(np.arange(K - 1), M)
        rows_j.append(np.full(ms.size, j))
        rows_m.append(ms)
        rows_k.append(allk + (allk >= ks))
        rows_ks.append(ks)
    block_start = np.concatenate(([0], np.cumsum(net.basic_counts()))).astype(np.int64)
    sign_of = np.array([1.0 if nr.kind == MIN else -1.0 for nr in net.neurons])
    if rows_j:
        neuron = np.concatenate(rows_j)
        parts = [np.concatenate(r) for r in (rows_m, rows_k, rows_ks)]
    else:
        neuron = np.zeros(0, dtype=np.int64)
        parts = [neuron.copy() for _ in range(3)]
    return EdgeConstraints(X, net.input_dim + 1, block_start, sign_of[neuron], neuron, *parts)


def active_set(normals, offsets, theta, eps_active=EPS_ACTIVE):
    """Indices of constraints holding with equality (within ``eps_active``)."""
    vals = normals @ theta + offsets
    return np.flatnonzero(np.abs(vals) <= eps_active)


@dataclass
class MultiplierSolution:
    indices: np.ndarray  # constraints that entered the LP
    lambdas: np.ndarray  # one per index, all <= 0
    theta: np.ndarray  # f + sum_l g_l lambda_l
    rounds: int = 0  # constraints added by the projection
    pivots: int = 0
    violation: float = 0.0  # max over all constraints after the step

    def nonzero(self, tol=0.0):
        keep = self.lambdas < -tol
        return self.indices[keep], self.lambdas[keep]


def _dedupe(normals, offsets, idx, eps):
    """Drop candidates whose (normal, offset) repeats an earlier one."""
    if idx.size < 2:
        return idx, np.zeros(0, dtype=np.int64)
    G = normals[idx]
    sq = np.einsum("ij,ij->i", G, G)
    gram = G @ G.T
    dist2 = sq[:, None] + sq[None, :] - 2.0 * gram
    same = (dist2 <= eps * eps) & (np.abs(offsets[idx][:, None] - offsets[idx][None, :]) <= eps)
    keep = np.ones(idx.size, dtype=bool)
    for a in range(idx.size):
        if keep[a]:
            later = np.flatnonzero(same[a, a + 1 :]) + a + 1
            keep[later] = False
    return idx[keep], idx[~keep]


def project_onto_constraints(f, G, h, tol=1e-12, dep_tol=1e-8, max_iter=None):
    """Closest point to ``f`` with ``G @ theta + h <= 0`` (dual active-set method).

    Goldfarb-Idnani iteration for the unit Hessian: starting from ``f``,
    the most violated constraint is added, dropping earlier ones whose
    multiplier would change sign, until nothing is violated by more than
    ``tol``.  Returns ``(theta, active, mu)`` with ``theta = f - G[active].T @ mu``
    and ``mu >= 0``.  Raises :class:`ConstraintConflict` when infeasible.
    """
    theta = f.copy()
    L = len(G)
    if max_iter is None:
        max_iter = 20 * L + 100
    active = []
    mu = np.zeros(0)
    norms = np.sqrt(np.einsum("ij,ij->i", G, G))
    for _ in range(max_iter):
        vals = G @ theta + h
        viol = np.where(norms > 0, vals, -np.inf)
        if active:
            viol[active] = -np.inf
        p = int(np.argmax(viol)) if L else -1
        if L == 0 or viol[p] <= tol:
            return theta, np.array(active, dtype=np.int64), mu
        gp = G[p]
        mu_p = 0.0
        while True:
            if active:
                N = G[active].T
                r = np.linalg.lstsq(N, gp, rcond=None)[0]
                z = gp - N @ r
            else:
                r = np.zeros(0)
                z = gp
            # moving theta along -z lowers constraint p; the multipliers of
            # the active set move by -t*r and must stay non-negative
            shrink = r > 0
            t_dual = np.inf
            drop = -1
            if shrink.any():
                ratios = mu[shrink] / r[shrink]
                i = int(np.argmin(ratios))
                t_dual = ratios[i]
                drop = int(np.flatnonzero(shrink)[i])
            zz = z @ gp
            value = gp @ theta + h[p]
            if zz > (dep_tol * norms[p]) ** 2:
                t_primal = value / zz
            else:
                t_primal = np.inf
            t = min(t_dual, t_primal)
            if not np.isfinite(t):
                raise ConstraintConflict(f"constraint {p} cannot be satisfied")
            if np.isfinite(t_primal):
                theta = theta - t * z
            mu = mu - t * r
            mu_p += t
            if t_primal <= t_dual:
                active.append(p)
                mu = np.append(np.maximum(mu, 0.0), mu_p)
                break
            del active[drop]
            mu = np.maximum(np.delete(mu, drop), 0.0)
    raise ConstraintConflict("projection did not converge")


def solve_multipliers(
    f,
    normals,
    offsets=None,
    candidates=None,
    eps_feasible=EPS_FEASIBLE,
    eps_active=EPS_ACTIVE,
    backend=None,
):
    """Lagrange multipliers pulling the step target ``f`` back inside the constraints.

    The post-step point is the closest point to ``f`` satisfying every
    constraint.  It is found by adding violated constraints one at a time
    (most violated first) and re-solving; the constraints tight at the
    result form the active set.  Among multiplier vectors reproducing that
    point, the simplex then picks the one maximising ``sum(lambda)`` with
    ``lambda <= 0``.

    ``candidates`` restricts which constraints are considered at all
    (default: every row of ``normals``).
    """
    f = np.asarray(f, dtype=np.float64)
    G_all = np.asarray(normals, dtype=np.float64).reshape(-1, f.size)
    h_all = np.zeros(len(G_all)) if offsets is None else np.asarray(offsets, dtype=np.float64)
    if candidates is None:
        pool = np.arange(len(G_all))
    else:
        pool = np.unique(np.asarray(candidates, dtype=np.int64))
    G, h = G_all[pool], h_all[pool]
    if len(G) == 0 or (G @ f + h).max() <= 0.0:
        return MultiplierSolution(np.zeros(0, dtype=np.int64), np.zeros(0), f.copy())

    if np.any(h != 0.0):
        # edge constraints (h = 0) are always feasible: theta = 0 satisfies them
        try:
            linprog_min(np.zeros(len(G)), -(G @ G.T), -(G @ f + h), backend=backend)
        except InfeasibleLP as exc:
            raise ConstraintConflict(str(exc)) from exc
    theta, working, mu = project_onto_constraints(f, G, h, tol=0.01 * eps_feasible)
    vals = G @ theta + h
    scale = max(1.0, float(np.abs(G @ f + h).max()))
    tight = np.flatnonzero(np.abs(vals) <= eps_active * scale)
    tight = np.union1d(tight, working)
    tight, _ = _dedupe(G, h, tight, eps_active)
    pivots = 0
    if tight.size:
        Gt = G[tight]
        # projection's own multipliers, spread onto the tight set
        own = np.zeros(tight.size)
        pos = np.searchsorted(tight, working)
        ok = (pos < tight.size) & (tight[np.minimum(pos, tight.size - 1)] == working)
        own[pos[ok]] = -mu[ok]
        # every representation f - theta = Gt^T x with x >= 0; posed in
        # weight space, since the Gram form squares the conditioning
        try:
            res = linprog_min(np.ones(tight.size), A_eq=Gt.T, b_eq=f - theta, backend=backend)
            pivots = res.pivots
            lam = -res.x
            cand = f + Gt.T @ lam
            if np.max(np.abs(cand - theta)) > eps_feasible * scale:
                raise InfeasibleLP("multiplier representation lost accuracy")
            theta = cand
        except InfeasibleLP:
            lam = own
            theta = f + Gt.T @ lam
    else:
        lam = np.zeros(0)
    violation = float(max(0.0, (G @ theta + h).max()))
    return MultiplierSolution(pool[tight], np.minimum(lam, 0.0), theta, len(working), pivots, violation)


def solve_edge_multipliers(f, edges, eps_feasible=EPS_FEASIBLE, eps_active=EPS_ACTIVE, backend=None):
    """:func:`solve_multipliers` over :class:`EdgeConstraints`, without the dense matrix.

    Starts from the constraints violated at ``f`` and adds any that the
    result still violates until none is left; the final set also takes
    every constraint tight at the result.  Indices refer to ``edges``.
    """
    f = np.asarray(f, dtype=np.float64)
    vals = edges.values(f)
    cand = np.flatnonzero(vals > 0.0)
    if cand.size == 0:
        return MultiplierSolution(np.zeros(0, dtype=np.int64), np.zeros(0), f.copy())
    scale = max(1.0, float(vals.max()))
    rounds = 0
    while True:
        sol = solve_multipliers(
            f, edges.rows(cand), edges.offsets[cand],
            eps_feasible=eps_feasible, eps_active=eps_active, backend=backend,
        )
        rounds += sol.rounds
        after = edges.values(sol.theta)
        extra = np.setdiff1d(np.flatnonzero(after > 0.01 * eps_feasible), cand)
        tight = np.setdiff1d(np.flatnonzero(np.abs(after) <= eps_active * scale), cand)
        if extra.size == 0:
            if tight.size == 0:
                break
            # constraints touching the result carry multipliers too; one
            # more solve with them included settles the representation
            cand = np.union1d(cand, tight)
            sol = solve_multipliers(
                f, edges.rows(cand), edges.offsets[cand],
                eps_feasible=eps_feasible, eps_active=eps_active, backend=backend,
            )
            rounds += sol.rounds
            after = edges.values(sol.theta)
            break
        cand = np.union1d(cand, extra)
    return MultiplierSolution(
        cand[sol.indices], sol.lambdas, sol.theta, rounds, sol.pivots,
        float(max(0.0, after.max())),
    )


def tangential_basis(normals, n=None, backend=None):
    """Orthonormal basis of directions parallel to every given constraint boundary."""
    return numerics.orthonormal_nullspace_basis(normals, n=n, backend=backend)
