"""Cost, gradient and the constrained discrete learning step.

One step moves the stacked weights along the negative gradient of the
weighted cost ``V = 0.5 * sum(alpha_m**2 * (y_hat(x_m) - y_m)**2)`` and
adds ``sum(g_l * lambda_l)`` over the active edge constraints so that no
measurement crosses from its active basic neuron to a neighbour.
"""

import csv
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import constraints as cons
from .model import MIN, activation_matrix, activation_pattern, evaluate, tied_candidates

log = logging.getLogger(__name__)

ALPHA_POLICIES = ("conservative", "spectral", "loose", "dataset")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainerConfig:
    alpha_scale: float = 1.0
    alpha_policy: str = "conservative"
    max_iters: int = 1000
    cost_tol: float = 1e-9
    grad_tol: float = 1e-10
    eps_active: float = cons.EPS_ACTIVE
    eps_feasible: float = cons.EPS_FEASIBLE
    max_halvings: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.alpha_scale <= 0:
            raise ValueError("alpha_scale must be positive")
        if self.alpha_policy not in ALPHA_POLICIES:
            raise ValueError(f"alpha_policy must be one of {ALPHA_POLICIES}")
        if min(self.cost_tol, self.grad_tol, self.eps_active, self.eps_feasible) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


@dataclass
class StepRecord:
    iter: int
    cost: float
    n_basic: int
    n_active: int
    min_lambda: float = 0.0
    max_violation: float = 0.0
    max_slack_with_lambda: float = 0.0  # complementarity residual
    halvings: int = 0
    reassigned: int = 0  # tied measurements moved by the boundary rules
    region_changed: bool = True  # pattern differs from the previous step's


@dataclass
class TrainState:
    net: object
    iter: int = 0
    cost_trace: list = field(default_factory=list)  # (iter, V)
    records: list = field(default_factory=list)
    active_history: deque = field(default_factory=lambda: deque(maxlen=25))
    patterns: np.ndarray = None  # pattern used by the last step
    alpha: np.ndarray = None  # step weights of the last step
    last_solution: object = None  # constraints.MultiplierSolution
    last_edges: object = None  # constraints.EdgeConstraints
    converged: bool = False

    def copy_with(self, net):
        return TrainState(
            net, self.iter, list(self.cost_trace), list(self.records),
            deque(self.active_history, maxlen=self.active_history.maxlen),
            self.patterns, self.alpha,
        )


def step_weights(net, dataset, config, patterns=None):
    """Per-measurement step weights ``alpha_m`` under the configured policy.

    ``conservative``: ``alpha_scale / (sqrt(M*J) * |x_m|)``; the Gram term
    of the measurement-space update then has trace at most 1.
    ``spectral``: ``c / |x_m|`` with ``c`` chosen so that the largest
    eigenvalue of that Gram term at the current activation pattern equals
    ``alpha_scale``.  ``loose``: ``alpha_scale / (J * |x_m|)``.
    ``dataset``: the stored alphas.
    """
    if config.alpha_policy == "dataset":
        return np.asarray(dataset.alpha, dtype=np.float64)
    norms = np.linalg.norm(dataset.X, axis=1)
    J = net.n_neurons
    if config.alpha_policy == "conservative":
        return config.alpha_scale / (np.sqrt(len(dataset) * J) * norms)
    if config.alpha_policy == "loose":
        return config.alpha_scale / (J * norms)
    if patterns is None:
        patterns = activation_pattern(net, dataset.X)
    B = activation_matrix(net, dataset.X, patterns) / norms[:, None]
    # the nonzero spectrum of B B^T equals that of B^T B; use the smaller
    gram = B @ B.T if B.shape[0] <= B.shape[1] else B.T @ B
    lam = float(np.linalg.eigvalsh(gram)[-1])
    return np.sqrt(config.alpha_scale / lam) / norms


def residuals(net, dataset):
    return evaluate(net, dataset.X) - dataset.y


def cost(net, dataset, alpha=None):
    """Weighted cost ``0.5 * sum(alpha**2 * residual**2)`` in dataset order."""
    a = dataset.alpha if alpha is None else np.asarray(alpha, dtype=np.float64)
    r = residuals(net, dataset)
    return 0.5 * float(np.sum(a * a * r * r))


def gradient(net, dataset, patterns=None, alpha=None):
    """``dV/dW``: per neuron, ``sum_m A_j(x_m) * alpha_m**2 * residual_m``, flattened."""
    a = dataset.alpha if alpha is None else np.asarray(alpha, dtype=np.float64)
    if patterns is None:
        patterns = activation_pattern(net, dataset.X)
    Phi = activation_matrix(net, dataset.X, patterns)
    r = Phi @ net.flat() - dataset.y
    return Phi.T @ (a * a * r)


def _moves_away(kind, z_new, c, cands, margin):
    others = [z_new[k] for k in cands if k != c]
    if kind == MIN:
        return all(z_new[c] < o - margin for o in others)
    return all(z_new[c] > o + margin for o in others)


def resolve_ties(net, X, patterns, weighted_res, f, eps_active):
    """Pick the active basic neuron for measurements sitting on an edge.

    Tied measurements of each neuron are visited starting from the one
    with the largest weighted residual (among those a split can serve, if
    any), then by distance from it.  Every candidate is tried on the
    unconstrained step ``f`` (with the choices made so far folded in):
    candidates that leave the edge win, lowest index first, except that
    at the starting measurement a set of bit-identical copies is tried
    newest first.  If none leaves, the current choice is kept and its edge
    constraint will become active.  A final sweep moves each tied
    measurement to whichever candidate is extremal at the resulting step,
    so the assignment is realisable by actual weights.  ``f`` is updated
    in place to match the returned patterns.
    """
    ties = tied_candidates(net, X, patterns, eps_active)
    if not ties:
        return patterns, 0
    patterns = patterns.copy()
    width = net.input_dim + 1
    off = net.offsets()
    moved = 0
    # per neuron, grow outward from the tied measurement with the largest
    # weighted residual (lowest m on ties)
    order = []
    for j in sorted({j for _, j in ties}):
        ms = np.array(sorted(m for m, jj in ties if jj == j))
        # prefer a seed the neuron can serve by splitting: a Max piece can
        # only rise above its sibling, a Min piece only drop below it
        want = weighted_res[ms] < 0 if net.neurons[j].kind != MIN else weighted_res[ms] > 0
        pool = ms[want] if want.any() else ms
        seed = pool[np.argmax(np.abs(weighted_res[pool]))]
        dist = np.linalg.norm(X[ms] - X[seed], axis=1)
        order += [(int(m), j) for m in ms[np.lexsort((ms, dist))]]
    seeds = {j: m for (m, j) in reversed(order)}
    for (m, j) in order:
        cands = ties[(m, j)]
        x = X[m]
        cur = patterns[m, j]
        contrib = weighted_res[m] * x
        base = off[j]
        W = f[base : base + net.neurons[j].n_basic * width].reshape(-1, width)
        choice = None
        W0 = net.neurons[j].weights[cands]
        # an exact copy splits off from its original: the seed goes to
        # the newest copy, the rest then sort themselves by proximity
        try_order = cands[::-1] if seeds[j] == m and np.all(W0 == W0[0]) else cands
        for c in try_order:
            Wc = W.copy()
            Wc[cur] += contrib
            Wc[c] -= contrib
            z = Wc[cands] @ x
            if _moves_away(net.neurons[j].kind, dict(zip(cands, z)), c, cands, eps_active):
                choice = c
                break
        if choice is None or choice == cur:
            continue
        W[cur] += contrib
        W[choice] -= contrib
        patterns[m, j] = choice
        moved += 1
    # one simultaneous sweep: every tied measurement takes the candidate
    # extremal at the aggregate step, so the assignment is realised by
    # actual weights and the edge constraints leave room to separate
    snap = f.copy()
    for (m, j) in order:
        cands = ties[(m, j)]
        cur = patterns[m, j]
        base = off[j]
        Ws = snap[base : base + net.neurons[j].n_basic * width].reshape(-1, width)
        z = Ws[cands] @ X[m]
        pick = int(np.argmin(z) if net.neurons[j].kind == MIN else np.argmax(z))
        best = cands[pick]
        if best == cur or abs(z[pick] - Ws[cur] @ X[m]) <= eps_active:
            continue
        W = f[base : base + net.neurons[j].n_basic * width].reshape(-1, width)
        contrib = weighted_res[m] * X[m]
        W[cur] += contrib
        W[best] -= contrib
        patterns[m, j] = best
        moved += 1
    return patterns, moved


def constrained_step(state, dataset, config, alpha=None):
    """One constrained learning iteration; returns the new state."""
    net = state.net
    X, y = dataset.X, dataset.y
    if alpha is None:
        alpha = step_weights(net, dataset, config)
    a2 = alpha * alpha
    theta = net.flat()
    P = activation_pattern(net, X)
    Phi = activation_matrix(net, X, P)
    res = Phi @ theta - y
    wres = a2 * res
    f = theta - Phi.T @ wres
    P, moved = resolve_ties(net, X, P, wres, f, config.eps_active)
    if moved:
        Phi = activation_matrix(net, X, P)
    grad = Phi.T @ wres
    edges = cons.build_edge_constraints(net, X, P)

    scale = 1.0
    for halvings in range(config.max_halvings + 1):
        f = theta - scale * grad
        try:
            sol = cons.solve_edge_multipliers(
                f, edges, eps_feasible=config.eps_feasible, eps_active=config.eps_active,
            )
            break
        except cons.ConstraintConflict:
            scale *= 0.5
    else:
        raise TrainingError(
            f"constraint conflict persists after {config.max_halvings} step halvings"
        )

    new_net = net.with_flat(sol.theta)
    V = cost(new_net, dataset, alpha)
    post = edges.values(sol.theta)
    nz = sol.lambdas < -config.eps_feasible
    rec = StepRecord(
        iter=state.iter + 1,
        cost=V,
        n_basic=new_net.n_basic,
        n_active=int(np.count_nonzero(sol.lambdas < 0)),
        min_lambda=float(sol.lambdas.min(initial=0.0)),
        max_violation=float(post.max(initial=0.0)),
        max_slack_with_lambda=float(np.abs(post[sol.indices[nz]]).max(initial=0.0)),
        halvings=halvings,
        reassigned=moved,
        region_changed=state.patterns is None
        or state.patterns.shape != P.shape
        or bool(np.any(state.patterns != P)),
    )
    out = state.copy_with(new_net)
    out.iter = state.iter + 1
    out.cost_trace.append((out.iter, V))
    out.records.append(rec)
    out.active_history.append(sol.indices[sol.lambdas < 0])
    out.patterns = P
    out.last_solution = sol
    out.last_edges = edges
    return out


def train(state, dataset, config, topology_hooks=None):
    """Iterate constrained steps until the cost or gradient tolerance, or ``max_iters``.

    ``topology_hooks`` is called after every step as
    ``hooks(state, dataset, alpha)`` and may return a new network (or
    ``None`` to keep the current one).  Step weights are recomputed only
    when the network changes, so the cost trace is comparable in between.
    """
    alpha = step_weights(state.net, dataset, config)
    if not state.cost_trace:
        state = state.copy_with(state.net)
        state.cost_trace.append((state.iter, cost(state.net, dataset, alpha)))
    start = state.iter
    while state.iter - start < config.max_iters:
        if state.cost_trace[-1][1] <= config.cost_tol:
            break
        before = state.net.flat()
        state = constrained_step(state, dataset, config, alpha)
        state.alpha = alpha
        step_norm = float(np.max(np.abs(state.net.flat() - before), initial=0.0))
        changed = False
        if topology_hooks is not None:
            new_net = topology_hooks(state, dataset, alpha)
            if new_net is not None:
                state.net = new_net
                changed = True
                alpha = step_weights(new_net, dataset, config)
                state.cost_trace[-1] = (state.iter, cost(new_net, dataset, alpha))
        # a vanishing gradient alone is not a fixed point: exact ties can
        # still split, so stop on the size of the constrained step itself
        if not changed and topology_hooks is None and step_norm <= config.grad_tol:
            break
    if topology_hooks is not None and hasattr(topology_hooks, "finalize"):
        new_net = topology_hooks.finalize(state, dataset, alpha)
        if new_net is not None:
            state.net = new_net
            alpha = step_weights(new_net, dataset, config)
            state.cost_trace[-1] = (state.iter, cost(new_net, dataset, alpha))
    state.alpha = alpha
    state.converged = state.cost_trace[-1][1] <= config.cost_tol
    return state


def write_cost_trace(state, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "cost", "basic_neuron_count", "active_constraints"])
        recs = {r.iter: r for r in state.records}
        first = state.records[0].n_basic if state.records else state.net.n_basic
        for it, V in state.cost_trace:
            r = recs.get(it)
            n_basic = r.n_basic if r is not None else first
            n_active = r.n_active if r is not None else 0
            w.writerow([it, repr(float(V)), n_basic, n_active])
