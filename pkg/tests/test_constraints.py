import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minmaxnet import constraints as cons
from minmaxnet.model import MAX, MIN, Network, Neuron, activation_pattern, augment
from oracles import vertex_multipliers


def two_neuron_net():
    return Network(1, [Neuron(MIN, [[0, 1], [0, -1], [1, 0]]), Neuron(MAX, [[0, 0.5], [0, -0.5]])])


class TestBuild:
    def test_single_min_pair(self):
        net = Network(1, [Neuron(MIN, [[0, 1], [0, -1]])])
        X = augment(np.array([[0.5]]))
        edges = cons.build_edge_constraints(net, X, activation_pattern(net, X))
        assert len(edges) == 1

    def test_count(self, rng):
        net = two_neuron_net()
        X = augment(rng.normal(size=(7, 1)))
        edges = cons.build_edge_constraints(net, X, activation_pattern(net, X))
        assert len(edges) == 7 * (3 - 1) + 7 * (2 - 1)

    def test_values_non_positive_at_iterate(self, rng):
        net = two_neuron_net()
        X = augment(rng.normal(size=(20, 1)))
        edges = cons.build_edge_constraints(net, X, activation_pattern(net, X))
        assert edges.values(net.flat()).max() <= 0.0

    def test_normal_structure_and_sign(self):
        net = two_neuron_net()
        X = augment(np.array([[2.0]]))
        P = activation_pattern(net, X)
        edges = cons.build_edge_constraints(net, X, P)
        G = edges.normals
        theta = net.flat()
        for row, spec in zip(G, edges):
            blocks = row.reshape(-1, 2)
            nz = np.flatnonzero(np.abs(blocks).sum(axis=1))
            assert nz.size == 2
            np.testing.assert_array_equal(blocks[nz[0]], -blocks[nz[1]])
            w = net.neurons[spec.neuron].weights
            x = X[spec.measurement]
            diff = x @ w[spec.active] - x @ w[spec.nonactive]
            expected = diff if net.neurons[spec.neuron].kind == MIN else -diff
            assert row @ theta == pytest.approx(expected)

    def test_dense_rows_match_values(self, rng):
        net = two_neuron_net()
        X = augment(rng.normal(size=(9, 1)))
        edges = cons.build_edge_constraints(net, X, activation_pattern(net, X))
        theta = rng.normal(size=net.n_params)
        np.testing.assert_allclose(edges.normals @ theta + edges.offsets, edges.values(theta), atol=1e-14)


class TestSolveMultipliers:
    def test_single_violated_closed_form(self, backend):
        g = np.array([[1.0, 0.0, -1.0, 0.0]])
        f = np.array([0.4, 0.0, 0.0, 0.0])
        sol = cons.solve_multipliers(f, g, backend=backend)
        assert sol.lambdas.tolist() == pytest.approx([-0.2])
        assert float(g[0] @ sol.theta) == pytest.approx(0.0, abs=1e-15)

    def test_nothing_violated(self):
        g = np.array([[1.0, -1.0]])
        f = np.array([-1.0, 0.0])
        sol = cons.solve_multipliers(f, g)
        assert sol.indices.size == 0
        np.testing.assert_array_equal(sol.theta, f)

    @pytest.mark.parametrize("seed", range(40))
    def test_two_violated_matches_vertex_oracle(self, backend, seed):
        rng = np.random.default_rng(seed)
        G = rng.normal(size=(2, 4))
        f = rng.normal(size=4)
        f += G.T @ np.abs(rng.normal(size=2))  # push f outside both
        sol = cons.solve_multipliers(f, G, backend=backend)
        lam = np.zeros(2)
        lam[sol.indices] = sol.lambdas
        np.testing.assert_allclose(lam, vertex_multipliers(f, G, np.zeros(2)), atol=1e-9)

    def test_duplicated_normals_dedupe(self):
        g = np.array([[1.0, -1.0], [1.0, -1.0]])
        f = np.array([1.0, 0.0])
        sol = cons.solve_multipliers(f, g)
        assert sol.indices.size == 1
        np.testing.assert_allclose(g @ sol.theta, 0.0, atol=1e-15)

    def test_infeasible_raises_conflict(self):
        g = np.array([[1.0], [-1.0]])
        h = np.array([1.0, 1.0])  # x <= -1 and x >= 1
        with pytest.raises(cons.ConstraintConflict):
            cons.solve_multipliers(np.zeros(1), g, h)

    @given(st.integers(0, 10**6))
    def test_sign_feasibility_complementarity(self, seed):
        rng = np.random.default_rng(seed)
        L, n = rng.integers(1, 6), rng.integers(2, 7)
        G = rng.normal(size=(L, n))
        f = rng.normal(size=n)
        sol = cons.solve_multipliers(f, G)
        post = G @ sol.theta
        assert np.all(sol.lambdas <= 0)
        assert post.max() <= 1e-9
        assert np.all(np.abs(post[sol.indices[sol.lambdas < -1e-9]]) <= 1e-9)
        np.testing.assert_allclose(sol.theta, f + G[sol.indices].T @ sol.lambdas, atol=1e-12)

    @given(st.integers(0, 10**6))
    def test_lp_optimality_against_oracle(self, seed):
        rng = np.random.default_rng(seed)
        L, n = rng.integers(1, 5), rng.integers(2, 7)
        G = rng.normal(size=(L, n))
        f = rng.normal(size=n)
        sol = cons.solve_multipliers(f, G)
        ref = vertex_multipliers(f, G, np.zeros(L))
        assert sol.lambdas.sum() >= ref.sum() - 1e-9


class TestEdgeSolve:
    def test_agrees_with_dense_solve(self, rng):
        for _ in range(20):
            net = Network(1, [Neuron(MIN, rng.normal(size=(3, 2))), Neuron(MAX, rng.normal(size=(2, 2)))])
            X = augment(rng.normal(size=(6, 1)))
            edges = cons.build_edge_constraints(net, X, activation_pattern(net, X))
            f = net.flat() + 0.5 * rng.normal(size=net.n_params)
            a = cons.solve_edge_multipliers(f, edges)
            b = cons.solve_multipliers(f, edges.normals, edges.offsets)
            np.testing.assert_allclose(a.theta, b.theta, atol=1e-9)
            assert a.violation <= 1e-9


class TestTangentialBasis:
    def test_empty(self):
        np.testing.assert_array_equal(cons.tangential_basis(np.zeros((0, 3))), np.eye(3))

    def test_rank_one_in_4d(self):
        g = cons.tangential_basis(np.array([[1.0, 0.0, -1.0, 0.0]]))
        assert g.shape == (4, 3)

    @given(st.integers(0, 10**6))
    def test_orthogonal_to_normals(self, seed):
        rng = np.random.default_rng(seed)
        N = rng.normal(size=(rng.integers(1, 4), 6))
        g = cons.tangential_basis(N)
        assert np.abs(N @ g).max() <= 1e-10
        assert np.abs(g.T @ g - np.eye(g.shape[1])).max() <= 1e-12

    def test_fully_pinned(self):
        assert cons.tangential_basis(np.eye(2)).shape == (2, 0)


def test_active_set():
    G = np.array([[1.0, 0.0], [0.0, 1.0]])
    idx = cons.active_set(G, np.zeros(2), np.array([0.0, -1.0]))
    assert idx.tolist() == [0]
