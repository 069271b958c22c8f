"""End-to-end benchmark scenarios with their pass/fail checks.

Used by ``minmaxnet bench`` and by the acceptance tests.  Every scenario
is deterministic: fixed data, fixed seeds.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import trainer as tr
from .dataset import Dataset, gen_corner, gen_polygon, gen_pyramid, pyramid_target
from .model import MAX, MIN, Network, Neuron, build_relu_pyramid_reference, evaluate, pyramid_minmax
from .topology import TopologySchedule

INVARIANT_TOL = 1e-9


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}: {self.name}" + (f" ({self.detail})" if self.detail else "")


@dataclass
class BenchResult:
    name: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0
    state: object = None
    schedule: object = None

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, passed, detail=""):
        self.checks.append(Check(name, bool(passed), detail))


def _grid(points=41, half_width=2.0):
    ds = gen_pyramid(half_width, points)
    return ds.X, ds.X[:, 1], ds.X[:, 2]


def pyramid_repr(points=41):
    t0 = time.perf_counter()
    X, x1, x2 = _grid(points)
    diff = float(np.max(np.abs(evaluate(pyramid_minmax(), X) - pyramid_target(x1, x2))))
    out = BenchResult("pyramid-repr")
    out.seconds = time.perf_counter() - t0
    out.add("MinMax pyramid equals the closed form on the grid", diff <= 1e-12, f"max diff {diff:.2e}")
    out.add("runtime below 1 s", out.seconds < 1.0, f"{out.seconds:.3f} s")
    return out


def relu_equiv(points=41):
    t0 = time.perf_counter()
    X, x1, x2 = _grid(points)
    relu = build_relu_pyramid_reference()(x1, x2)
    d_mm = float(np.max(np.abs(relu - evaluate(pyramid_minmax(), X))))
    d_cf = float(np.max(np.abs(relu - pyramid_target(x1, x2))))
    out = BenchResult("relu-equiv")
    out.seconds = time.perf_counter() - t0
    out.add("ReLU reference equals the MinMax pyramid", d_mm <= 1e-12, f"max diff {d_mm:.2e}")
    out.add("ReLU reference equals the closed form", d_cf <= 1e-12, f"max diff {d_cf:.2e}")
    out.add("runtime below 1 s", out.seconds < 1.0, f"{out.seconds:.3f} s")
    return out


def fig2_step(kind):
    """One step of the two-line edge scenario: w1=(0,1), w2=(0,-1), x'=0, y=1, alpha^2=0.1."""
    net = Network(1, [Neuron(kind, [[0.0, 1.0], [0.0, -1.0]])])
    ds = Dataset([[1.0, 0.0]], [1.0], [np.sqrt(0.1)])
    cfg = tr.TrainerConfig(alpha_policy="dataset")
    return tr.constrained_step(tr.TrainState(net), ds, cfg), ds


def fig2_edge():
    t0 = time.perf_counter()
    out = BenchResult("fig2-edge")
    st, ds = fig2_step(MIN)
    sol = st.last_solution
    lam = sol.lambdas[sol.lambdas < 0]
    z = st.net.neurons[0].basic_values(ds.X)[0]
    out.add("convex side: exactly one multiplier active", lam.size == 1, f"lambda {lam.tolist()}")
    out.add("convex side: lambda negative", lam.size == 1 and lam[0] < 0)
    out.add("convex side: both basic neurons on the edge", abs(z[0] - z[1]) <= 1e-9,
            f"z = {z.tolist()}")
    st, ds = fig2_step(MAX)
    sol = st.last_solution
    free = np.array([[0.1, 1.0], [0.0, -1.0]])
    out.add("concave side: empty active set", not np.any(sol.lambdas < 0))
    out.add("concave side: step equals the plain gradient step",
            np.max(np.abs(st.net.neurons[0].weights - free)) <= 1e-15)
    out.seconds = time.perf_counter() - t0
    out.add("runtime below 1 s", out.seconds < 1.0, f"{out.seconds:.3f} s")
    return out


def constraint_checks(result, tol=INVARIANT_TOL):
    """Feasibility, multiplier sign and complementarity over every recorded step."""
    recs = result.state.records
    viol = max((r.max_violation for r in recs), default=0.0)
    lam = max((r.min_lambda for r in recs), default=0.0)
    slack = max((r.max_slack_with_lambda for r in recs), default=0.0)
    result.add("no edge constraint violated after any step", viol <= tol, f"max {viol:.2e}")
    result.add("every multiplier non-positive", all(r.min_lambda <= 0.0 for r in recs),
               f"largest min-lambda {lam:.2e}")
    result.add("nonzero multipliers sit on tight constraints", slack <= tol, f"max slack {slack:.2e}")


def monotone_between_events(state, events=(), rtol=1e-12):
    """Whether steps that kept their region never raised the cost, and the worst increase.

    Iterations with a topology event are skipped: their trace entry is the
    cost after the change, under the new step weights.
    """
    costs = dict(state.cost_trace)
    changed = {e.iter for e in events}
    worst = 0.0
    for r in state.records:
        prev = costs.get(r.iter - 1)
        if r.region_changed or prev is None or r.iter in changed:
            continue
        worst = max(worst, (costs[r.iter] - prev) / max(prev, 1e-300))
    return worst <= rtol, worst


def polygon(max_iters=1000, alpha_policy="conservative", alpha_scale=1.0, spawn_every=100,
            plateau_window=25, cost_tol=1e-9, initial_kind=MIN):
    ds = gen_polygon()
    net = Network(1, [Neuron(initial_kind, [[0.0, 0.0]])])
    cfg = tr.TrainerConfig(alpha_scale=alpha_scale, alpha_policy=alpha_policy,
                           max_iters=max_iters, cost_tol=cost_tol)
    sch = TopologySchedule(spawn_every=spawn_every, plateau_window=plateau_window)
    t0 = time.perf_counter()
    st = tr.train(tr.TrainState(net), ds, cfg, sch)
    out = BenchResult("polygon", seconds=time.perf_counter() - t0, state=st, schedule=sch)
    V = st.cost_trace[-1][1]
    counts = {k: [nr.n_basic for nr in st.net.neurons if nr.kind == k] for k in (MIN, MAX)}
    out.add("cost below 1e-9", V < 1e-9, f"V = {V:.3e}")
    out.add("within 1000 iterations", st.iter <= 1000, f"{st.iter} iterations")
    out.add("5 basic neurons: 2 in a Min neuron, 3 in a Max neuron",
            counts[MIN] == [2] and counts[MAX] == [3], f"min {counts[MIN]}, max {counts[MAX]}")
    out.add("runtime below 10 s", out.seconds < 10.0, f"{out.seconds:.2f} s")
    constraint_checks(out)
    return out


def corner8(max_iters=6000, samples_per_region=30, alpha_policy="spectral", alpha_scale=1.0,
            spawn_every=100, plateau_window=25, cost_tol=1e-6, seed=0):
    ds = gen_corner(8, samples_per_region, seed=seed)
    rng = np.random.default_rng(seed)
    net = Network(8, [Neuron(MAX, rng.uniform(-0.5, 0.5, size=(1, 9)))])
    cfg = tr.TrainerConfig(alpha_scale=alpha_scale, alpha_policy=alpha_policy,
                           max_iters=max_iters, cost_tol=cost_tol, seed=seed)
    sch = TopologySchedule(spawn_every=spawn_every, plateau_window=plateau_window)
    t0 = time.perf_counter()
    st = tr.train(tr.TrainState(net), ds, cfg, sch)
    out = BenchResult("corner8", seconds=time.perf_counter() - t0, state=st, schedule=sch)
    V = st.cost_trace[-1][1]
    kinds = [nr.kind for nr in st.net.neurons]
    out.add("one Max neuron", kinds == [MAX], f"neurons {kinds}")
    out.add("exactly 16 basic neurons", st.net.n_basic == 16, f"{st.net.basic_counts()}")
    out.add("cost below 1e-6", V < 1e-6, f"V = {V:.3e} after {st.iter} iterations")
    ok, worst = monotone_between_events(st, sch.events)
    out.add("cost non-increasing while the regions stay fixed", ok,
            f"largest relative increase {worst:.2e}")
    out.add("runtime below 5 min", out.seconds < 300.0, f"{out.seconds:.1f} s")
    constraint_checks(out)
    return out


SCENARIOS = {
    "pyramid-repr": pyramid_repr,
    "relu-equiv": relu_equiv,
    "fig2-edge": fig2_edge,
    "polygon": polygon,
    "corner8": corner8,
}
