import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minmaxnet import trainer as tr
from minmaxnet.dataset import Dataset
from minmaxnet.model import MAX, MIN, Network, Neuron, activation_pattern, augment, evaluate
from minmaxnet.scenarios import fig2_step


def random_instance(rng, n_in=None, J=None, M=None):
    n_in = n_in or int(rng.integers(1, 5))
    J = J or int(rng.integers(1, 4))
    M = M or int(rng.integers(1, 21))
    kinds = sorted([MIN, MAX][int(rng.integers(2))] for _ in range(J))
    kinds.sort(key=lambda k: k != MIN)
    net = Network(n_in, [Neuron(k, rng.normal(size=(int(rng.integers(1, 5)), n_in + 1))) for k in kinds])
    ds = Dataset(augment(rng.normal(size=(M, n_in))), rng.normal(size=M), rng.uniform(0.1, 1.0, size=M))
    return net, ds


def pattern_margin(net, X):
    margin = np.inf
    for nr in net.neurons:
        if nr.n_basic < 2:
            continue
        Z = np.sort(nr.basic_values(X), axis=1)
        gap = Z[:, 1] - Z[:, 0] if nr.kind == MIN else Z[:, -1] - Z[:, -2]
        margin = min(margin, float(gap.min()))
    return margin


def finite_difference(net, ds, h=1e-6):
    theta = net.flat()
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (tr.cost(net.with_flat(theta + e), ds) - tr.cost(net.with_flat(theta - e), ds)) / (2 * h)
    return g


class TestCost:
    def test_perfect_fit(self):
        net = Network(1, [Neuron(MIN, [[1.0, 2.0]])])
        ds = Dataset(augment(np.array([[0.0], [1.0]])), [1.0, 3.0])
        assert tr.cost(net, ds) == 0.0

    def test_residual_two(self):
        net = Network(1, [Neuron(MIN, [[0.0, 0.0]])])
        assert tr.cost(net, Dataset([[1.0, 0.0]], [2.0], [1.0])) == 2.0

    def test_zero_alpha(self):
        net = Network(1, [Neuron(MIN, [[5.0, 0.0]])])
        assert tr.cost(net, Dataset([[1.0, 0.0], [1.0, 1.0]], [0.0, 9.0], [0.0, 0.0])) == 0.0


class TestGradient:
    def test_hand_example(self):
        net = Network(1, [Neuron(MIN, [[0.0, 0.0]])])
        ds = Dataset([[1.0, 2.0]], [3.0], [np.sqrt(0.1)])
        np.testing.assert_allclose(tr.gradient(net, ds), [-0.3, -0.6], rtol=1e-15)

    def test_zero_residual(self):
        net = Network(1, [Neuron(MAX, [[1.0, 1.0], [0.0, -1.0]])])
        X = augment(np.array([[2.0], [-3.0]]))
        ds = Dataset(X, evaluate(net, X))
        np.testing.assert_array_equal(tr.gradient(net, ds), 0.0)

    @pytest.mark.parametrize("seed", range(15))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        net, ds = random_instance(rng)
        if pattern_margin(net, ds.X) <= 1e-3:
            pytest.skip("iterate too close to an edge")
        g = tr.gradient(net, ds)
        fd = finite_difference(net, ds)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1e-12)


class TestStepWeights:
    def make(self):
        net = Network(2, [Neuron(MIN, [[0, 1, 0]]), Neuron(MAX, [[0, 0, 1]])])
        X = augment(np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 1.0], [2.0, -1.0]]))
        return net, Dataset(X, np.zeros(4), np.full(4, 0.7))

    def test_conservative(self):
        net, ds = self.make()
        a = tr.step_weights(net, ds, tr.TrainerConfig())
        np.testing.assert_allclose(a, 1.0 / (np.sqrt(4 * 2) * np.linalg.norm(ds.X, axis=1)))

    def test_loose_bound(self):
        net, ds = self.make()
        a = tr.step_weights(net, ds, tr.TrainerConfig(alpha_policy="loose", alpha_scale=0.5))
        np.testing.assert_allclose(a, 0.5 / (2 * np.linalg.norm(ds.X, axis=1)))

    def test_dataset(self):
        net, ds = self.make()
        np.testing.assert_array_equal(tr.step_weights(net, ds, tr.TrainerConfig(alpha_policy="dataset")), 0.7)

    def test_spectral_normalises_top_eigenvalue(self):
        net, ds = self.make()
        a = tr.step_weights(net, ds, tr.TrainerConfig(alpha_policy="spectral", alpha_scale=0.8))
        from minmaxnet.model import activation_matrix

        B = a[:, None] * activation_matrix(net, ds.X, activation_pattern(net, ds.X))
        assert np.linalg.eigvalsh(B @ B.T)[-1] == pytest.approx(0.8, rel=1e-12)

    @pytest.mark.parametrize("kw", [{"alpha_scale": 0}, {"alpha_policy": "fast"}, {"cost_tol": 0},
                                    {"max_iters": -1}])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            tr.TrainerConfig(**kw)


class TestConstrainedStep:
    def test_convex_side_edge(self):
        st, _ = fig2_step(MIN)
        lam = st.last_solution.lambdas
        assert lam.tolist() == pytest.approx([-0.05], abs=1e-15)
        np.testing.assert_allclose(st.net.neurons[0].weights, [[0.05, 1.0], [0.05, -1.0]], atol=1e-15)

    def test_concave_side_free(self):
        st, _ = fig2_step(MAX)
        assert not np.any(st.last_solution.lambdas < 0)
        np.testing.assert_allclose(st.net.neurons[0].weights, [[0.1, 1.0], [0.0, -1.0]], atol=1e-15)

    def test_zero_gradient_is_fixed_point(self):
        net = Network(1, [Neuron(MIN, [[0.0, 1.0], [0.0, -1.0]])])
        X = augment(np.array([[1.0], [-2.0], [0.5]]))
        ds = Dataset(X, evaluate(net, X))
        st = tr.constrained_step(tr.TrainState(net), ds, tr.TrainerConfig())
        np.testing.assert_array_equal(st.net.flat(), net.flat())
        assert st.last_solution.indices.size == 0

    def test_exact_interpolation_single_region(self):
        # one linear region with orthogonal augmented inputs; alpha = 1/|x|
        # turns the Gram term into the identity, so one step interpolates
        net = Network(2, [Neuron(MIN, [[0.3, -0.2, 0.1]])])
        X = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0]])
        ds = Dataset(X, [1.5, -0.5], 1.0 / np.linalg.norm(X, axis=1))
        st = tr.constrained_step(tr.TrainState(net), ds, tr.TrainerConfig(alpha_policy="dataset"))
        assert tr.cost(st.net, ds) < 1e-12

    def test_halving_recorded(self):
        st, _ = fig2_step(MIN)
        assert st.records[-1].halvings == 0

    def test_record_fields(self):
        st, ds = fig2_step(MIN)
        rec = st.records[-1]
        assert rec.iter == 1 and rec.n_basic == 2 and rec.n_active == 1
        assert rec.min_lambda < 0 and rec.max_violation <= 1e-9 and rec.max_slack_with_lambda <= 1e-9

    @given(st.integers(0, 10**6))
    def test_post_step_invariants(self, seed):
        rng = np.random.default_rng(seed)
        net, ds = random_instance(rng, M=12)
        cfg = tr.TrainerConfig()
        state = tr.TrainState(net)
        for _ in range(3):
            state = tr.constrained_step(state, ds, cfg)
            sol = state.last_solution
            post = state.last_edges.values(sol.theta)
            assert post.max(initial=0.0) <= cfg.eps_feasible
            assert np.all(sol.lambdas <= 0)
            nz = sol.indices[sol.lambdas < -cfg.eps_feasible]
            assert np.all(np.abs(post[nz]) <= cfg.eps_feasible)

    @given(st.integers(0, 10**6))
    def test_pattern_stability(self, seed):
        rng = np.random.default_rng(seed)
        net, ds = random_instance(rng, M=10)
        state = tr.constrained_step(tr.TrainState(net), ds, tr.TrainerConfig())
        before = state.patterns
        after = activation_pattern(state.net, ds.X)
        for m, j in zip(*np.nonzero(before != after)):
            z = state.net.neurons[j].basic_values(ds.X[m : m + 1])[0]
            assert abs(z[before[m, j]] - z[after[m, j]]) <= 1e-9 * max(1.0, np.abs(z).max())

    @given(st.integers(0, 10**6))
    def test_cost_non_increasing_without_activations(self, seed):
        rng = np.random.default_rng(seed)
        net, ds = random_instance(rng)
        cfg = tr.TrainerConfig()
        alpha = tr.step_weights(net, ds, cfg)
        V0 = tr.cost(net, ds, alpha)
        state = tr.constrained_step(tr.TrainState(net), ds, cfg, alpha)
        if state.records[-1].n_active == 0 and state.records[-1].reassigned == 0 and not np.any(
            activation_pattern(state.net, ds.X) != state.patterns
        ):
            assert tr.cost(state.net, ds, alpha) <= V0 * (1 + 1e-12) + 1e-300


class TestTieResolution:
    def test_both_leave_lowest_index(self):
        # two Max lines crossing at the measurement; raising either one leaves the edge
        net = Network(1, [Neuron(MAX, [[0.0, 1.0], [0.0, -1.0]])])
        ds = Dataset([[1.0, 0.0]], [1.0], [np.sqrt(0.1)])
        st = tr.constrained_step(tr.TrainState(net), ds, tr.TrainerConfig(alpha_policy="dataset"))
        assert st.patterns[0, 0] == 0
        assert not np.any(st.last_solution.lambdas < 0)
        np.testing.assert_allclose(st.net.neurons[0].weights, [[0.1, 1.0], [0.0, -1.0]])

    def test_one_leaves(self):
        # a second measurement drags line 0 down, so only line 1 can rise off the edge
        net = Network(1, [Neuron(MAX, [[0.0, 1.0], [0.0, -1.0]])])
        ds = Dataset([[1.0, 0.0], [1.0, 1.0]], [1.0, -5.0], np.full(2, np.sqrt(0.1)))
        st = tr.constrained_step(tr.TrainState(net), ds, tr.TrainerConfig(alpha_policy="dataset"))
        assert st.patterns[0, 0] == 1
        assert tr.cost(st.net, ds) < tr.cost(net, ds)

    def test_exact_copies_split(self):
        # identical basic neurons: the seed measurement goes to the newest copy
        net = Network(1, [Neuron(MAX, [[0.0, 0.0], [0.0, 0.0]])])
        ds = Dataset([[1.0, 1.0]], [1.0], [np.sqrt(0.1)])
        st = tr.constrained_step(tr.TrainState(net), ds, tr.TrainerConfig(alpha_policy="dataset"))
        assert st.patterns[0, 0] == 1
        np.testing.assert_allclose(st.net.neurons[0].weights, [[0.0, 0.0], [0.1, 0.1]])

    def test_neither_leaves_slides(self):
        # a Min pair asked to rise: the edge constraint holds and both move together
        net = Network(1, [Neuron(MIN, [[0.0, 1.0], [0.0, -1.0]])])
        ds = Dataset([[1.0, 0.0]], [1.0], [np.sqrt(0.1)])
        st = tr.constrained_step(tr.TrainState(net), ds, tr.TrainerConfig(alpha_policy="dataset"))
        z = st.net.neurons[0].basic_values(ds.X)[0]
        assert abs(z[0] - z[1]) <= 1e-12
        assert np.any(st.last_solution.lambdas < 0)


class TestTrain:
    def test_zero_iterations(self):
        net = Network(1, [Neuron(MIN, [[0.0, 0.0]])])
        ds = Dataset([[1.0, 0.0]], [2.0])
        st = tr.train(tr.TrainState(net), ds, tr.TrainerConfig(max_iters=0))
        np.testing.assert_array_equal(st.net.flat(), net.flat())
        assert st.iter == 0 and len(st.cost_trace) == 1

    def test_linear_fit_converges(self):
        X = augment(np.linspace(-1, 1, 9)[:, None])
        ds = Dataset(X, 2.0 * X[:, 1] - 0.5)
        st = tr.train(tr.TrainState(Network(1, [Neuron(MIN, [[0.0, 0.0]])])), ds,
                      tr.TrainerConfig(max_iters=2000))
        assert st.converged
        iters = [i for i, _ in st.cost_trace]
        assert iters == sorted(set(iters))

    def test_conservative_trace_non_increasing(self, rng):
        net, ds = random_instance(rng, n_in=2, J=1, M=15)
        net = Network(2, [Neuron(MIN, net.neurons[0].weights[:1])])
        st = tr.train(tr.TrainState(net), ds, tr.TrainerConfig(max_iters=200))
        V = np.array([v for _, v in st.cost_trace])
        assert np.all(np.diff(V) <= 1e-12 * V[:-1])

    def test_cost_trace_csv(self, tmp_path):
        st, _ = fig2_step(MIN)
        path = tmp_path / "trace.csv"
        tr.write_cost_trace(st, path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["iter", "cost", "basic_neuron_count", "active_constraints"]
        assert rows[1] == ["1", repr(st.cost_trace[0][1]), "2", "1"]
