"""Network structure adaptation: prune, spawn and duplicate.

Spawning and duplication never change the network output at the moment
they are applied: a spawned neuron holds one all-zero basic neuron, and a
duplicated basic neuron is an exact copy (``min(a, a) == a``).
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .model import MAX, MIN, Network, Neuron, activation_pattern, evaluate

log = logging.getLogger(__name__)


class NoTarget(Exception):
    """Every residual is below tolerance; nothing needs inserting."""


@dataclass
class TopologyEvent:
    iter: int
    event: str  # spawn | duplicate | prune
    neuron: int
    basic: int
    detail: str = ""


def spawn_neuron(net, kind):
    """Add a neuron with a single zero basic neuron.

    Min neurons go after the last existing Min neuron, Max neurons at the
    end, so Min neurons always precede Max neurons.
    """
    if kind not in (MIN, MAX):
        raise ValueError(f"unknown neuron kind {kind!r}")
    new = Neuron(kind, np.zeros((1, net.input_dim + 1)))
    neurons = [nr.copy() for nr in net.neurons]
    if kind == MIN:
        pos = sum(1 for nr in neurons if nr.kind == MIN)
    else:
        pos = len(neurons)
    neurons.insert(pos, new)
    return Network(net.input_dim, neurons), pos


def duplicate_basic(net, j, k):
    """Append an exact copy of basic neuron ``k`` to neuron ``j``."""
    if not 0 <= j < net.n_neurons:
        raise IndexError(f"no neuron {j}")
    if not 0 <= k < net.neurons[j].n_basic:
        raise IndexError(f"neuron {j} has no basic neuron {k}")
    out = net.copy()
    nr = out.neurons[j]
    nr.weights = np.vstack([nr.weights, nr.weights[k]])
    return out


def select_duplication_target(
    net, dataset, residuals, alpha=None, tol=0.0, neuron=None, patterns=None, sided=False
):
    """Basic neuron active at the worst measurement.

    The worst measurement ``m*`` maximises ``alpha**2 * residual**2``
    (lowest ``m`` on ties).  Returns ``(j, k)`` with ``k`` the basic neuron
    of neuron ``j`` active at ``m*``; ``j`` is ``neuron`` if given, else 0.
    Raises :class:`NoTarget` when every weighted squared residual is at
    most ``tol``.

    With ``sided=True`` the search is limited to measurements a copy in
    neuron ``j`` can correct: a copy can only raise a Max neuron (so
    ``y_hat < y`` there) and only lower a Min neuron.  If no measurement
    qualifies the unrestricted worst one is used.
    """
    a = dataset.alpha if alpha is None else np.asarray(alpha, dtype=np.float64)
    residuals = np.asarray(residuals, dtype=np.float64)
    score = (a * residuals) ** 2
    m = int(np.argmax(score))
    if score[m] <= tol:
        raise NoTarget("all residuals below tolerance")
    j = 0 if neuron is None else neuron
    if sided:
        fixable = residuals < 0 if net.neurons[j].kind == MAX else residuals > 0
        side = np.where(fixable, score, -1.0)
        if side.max() > tol:
            m = int(np.argmax(side))
    if patterns is None:
        patterns = activation_pattern(net, dataset.X)
    return j, int(patterns[m, j])


def _duplicates(W, tol):
    """Indices of rows that repeat an earlier row (cosine and norm ratio within tol)."""
    norms = np.linalg.norm(W, axis=1)
    drop = set()
    for a in range(len(W)):
        if a in drop:
            continue
        for b in range(a + 1, len(W)):
            if b in drop:
                continue
            na, nb = norms[a], norms[b]
            if na == 0.0 or nb == 0.0:
                same = na == nb
            else:
                cos = W[a] @ W[b] / (na * nb)
                same = cos >= 1.0 - tol and abs(na / nb - 1.0) <= tol
            if same:
                drop.add(b)
    return sorted(drop)


def prune(net, dataset, activity_counts=None, prune_value_tol=1e-8, duplicate_tol=1e-8):
    """Remove dead structure, keeping dataset predictions within ``prune_value_tol``.

    ``activity_counts[j][k]`` counts how often basic neuron ``k`` of neuron
    ``j`` was active over the training window (default: at the current
    weights).  Removes, in order, basic neurons that never became active,
    near-duplicate basic neurons, and whole neurons whose output stays
    within ``prune_value_tol`` of zero on the dataset.  Each removal is
    only kept if predictions move by at most ``prune_value_tol``; the last
    basic neuron of the last neuron is never removed.
    """
    X = dataset.X
    base = evaluate(net, X)
    if activity_counts is None:
        P = activation_pattern(net, X)
        activity_counts = [np.bincount(P[:, j], minlength=nr.n_basic) for j, nr in enumerate(net.neurons)]
    events = []
    cur = net.copy()

    def ok(candidate):
        return np.max(np.abs(evaluate(candidate, X) - base)) <= prune_value_tol

    # basic neurons never active in the window
    for j in range(cur.n_neurons):
        counts = np.asarray(activity_counts[j])
        nr = cur.neurons[j]
        dead = [k for k in range(nr.n_basic) if counts[k] == 0]
        keep = [k for k in range(nr.n_basic) if k not in dead]
        if dead and keep:
            trial = cur.copy()
            trial.neurons[j].weights = nr.weights[keep]
            if ok(trial):
                cur = trial
                events.append(("prune", j, -1, f"inactive basics {dead}"))
            else:
                # fall back to one at a time
                for k in reversed(dead):
                    w = cur.neurons[j].weights
                    if len(w) < 2:
                        break
                    trial = cur.copy()
                    trial.neurons[j].weights = np.delete(w, k, axis=0)
                    if ok(trial):
                        cur = trial
                        events.append(("prune", j, k, "inactive basic"))
    # near-duplicates
    for j in range(cur.n_neurons):
        w = cur.neurons[j].weights
        dup = _duplicates(w, duplicate_tol)
        if dup and len(dup) < len(w):
            trial = cur.copy()
            trial.neurons[j].weights = np.delete(w, dup, axis=0)
            if ok(trial):
                cur = trial
                events.append(("prune", j, -1, f"duplicate basics {dup}"))
    # neurons with negligible output
    j = 0
    while j < cur.n_neurons and cur.n_neurons > 1:
        nr = cur.neurons[j]
        out = nr.combine(nr.basic_values(X))
        if np.max(np.abs(out)) <= prune_value_tol:
            trial = Network(cur.input_dim, [n.copy() for i, n in enumerate(cur.neurons) if i != j])
            if ok(trial):
                cur = trial
                events.append(("prune", j, -1, "zero output"))
                continue
        j += 1
    return cur, events


@dataclass
class TopologySchedule:
    """Trainer hook that grows and prunes the network.

    An insertion is due when the cost has plateaued (relative decrease
    below ``plateau_rtol`` over ``plateau_window`` iterations) or, if
    ``spawn_every > 0``, after that many iterations without a change.
    Each plateau opens an episode with a queue of candidates: duplicate
    the basic neuron active at the worst measurement in the newest
    neuron, then in the others (newest first), then spawn a neuron of the
    alternate kind.  A candidate that fails to lower the cost by
    ``plateau_rtol`` before the next trigger is pruned away (its copy
    stays a duplicate or never activates) and the next one is tried.  A
    spawned neuron gets its zero basic neuron duplicated at once, so it
    can bend in the next step.
    """

    spawn_every: int = 100
    plateau_window: int = 25
    plateau_rtol: float = 1e-4
    prune: bool = True
    prune_value_tol: float = 1e-8
    duplicate_tol: float = 1e-8
    target_tol: float = 0.0
    sided: bool = True
    max_basic: int = 64
    events: list = field(default_factory=list)

    def __post_init__(self):
        self._last_change = 0
        self._queue = []
        self._cost_at_insert = None
        self._newest = None  # (kind, rank among neurons of that kind)
        self._counts = None

    def _reset_counts(self, net):
        self._counts = [np.zeros(nr.n_basic, dtype=np.int64) for nr in net.neurons]

    def _plateau(self, state):
        w = self.plateau_window
        if state.iter - self._last_change < w or len(state.cost_trace) <= w:
            return False
        old = state.cost_trace[-1 - w][1]
        new = state.cost_trace[-1][1]
        return old - new <= self.plateau_rtol * old

    def _collect(self, state):
        net = state.net
        if self._counts is None or [len(c) for c in self._counts] != net.basic_counts():
            self._reset_counts(net)
        P = state.patterns
        if P is not None and P.shape[1] == net.n_neurons:
            for j in range(net.n_neurons):
                self._counts[j] += np.bincount(P[:, j], minlength=net.neurons[j].n_basic)

    def __call__(self, state, dataset, alpha):
        self._collect(state)
        since = state.iter - self._last_change
        periodic = self.spawn_every > 0 and since >= self.spawn_every
        if not (periodic or self._plateau(state)):
            return None
        return self.insert(state, dataset, alpha)

    def finalize(self, state, dataset, alpha):
        """Prune once more at the end of training."""
        if not self.prune:
            return None
        self._collect(state)
        net, evs = prune(state.net, dataset, self._counts, self.prune_value_tol, self.duplicate_tol)
        for ev, j, k, detail in evs:
            self._log(TopologyEvent(state.iter, ev, j, k, detail))
        return net if evs else None

    def _neuron_order(self, net):
        """Neuron indices, newest first: the last spawned neuron, then by position from the end."""
        order = list(range(net.n_neurons - 1, -1, -1))
        if self._newest is not None:
            kind, rank = self._newest
            same = [j for j, nr in enumerate(net.neurons) if nr.kind == kind]
            if rank < len(same):
                order.remove(same[rank])
                order.insert(0, same[rank])
        return order

    def _spawn_kind(self, net):
        kinds = [nr.kind for nr in net.neurons]
        if MIN not in kinds:
            return MIN
        if MAX not in kinds:
            return MAX
        newest = self._newest[0] if self._newest else kinds[-1]
        return MIN if newest == MAX else MAX

    def insert(self, state, dataset, alpha):
        it = state.iter
        V = state.cost_trace[-1][1]
        # the trainer re-evaluates the cost right after a change, with the
        # step weights of the new structure; compare against that value
        ref = [c for i, c in state.cost_trace if i == self._last_change]
        improved = not ref or self._cost_at_insert is None or V < (1.0 - self.plateau_rtol) * ref[-1]
        net = state.net
        if self.prune:
            net, evs = prune(net, dataset, self._counts, self.prune_value_tol, self.duplicate_tol)
            for ev, j, k, detail in evs:
                self._log(TopologyEvent(it, ev, j, k, detail))
        self._last_change = it
        self._reset_counts(net)
        res = evaluate(net, dataset.X) - dataset.y
        try:
            select_duplication_target(net, dataset, res, alpha, self.target_tol)
        except NoTarget:
            return net
        if net.n_basic >= self.max_basic:
            log.info("iter %d: basic neuron budget %d reached", it, self.max_basic)
            return net
        if improved or not self._queue:
            self._queue = [("duplicate", j) for j in self._neuron_order(net)] + [("spawn", None)]
        action, j = self._queue.pop(0)
        if action == "duplicate":
            _, k = select_duplication_target(net, dataset, res, alpha, neuron=j, sided=self.sided)
            net = duplicate_basic(net, j, k)
            self._log(TopologyEvent(it, "duplicate", j, k, f"K={net.neurons[j].n_basic}"))
        else:
            kind = self._spawn_kind(net)
            net, pos = spawn_neuron(net, kind)
            self._log(TopologyEvent(it, "spawn", pos, 0, kind))
            net = duplicate_basic(net, pos, 0)
            self._log(TopologyEvent(it, "duplicate", pos, 0, "K=2"))
            rank = sum(1 for nr in net.neurons[:pos] if nr.kind == kind)
            self._newest = (kind, rank)
            self._queue = []
        self._cost_at_insert = V
        self._reset_counts(net)
        return net

    def _log(self, ev):
        log.info("iter %d: %s neuron=%d basic=%d %s", ev.iter, ev.event, ev.neuron, ev.basic, ev.detail)
        self.events.append(ev)


def write_events(events, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "event", "neuron", "basic", "detail"])
        for ev in events:
            w.writerow([ev.iter, ev.event, ev.neuron, ev.basic, ev.detail])
