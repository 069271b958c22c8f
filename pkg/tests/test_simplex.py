import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minmaxnet.simplex import InfeasibleLP, UnboundedLP, linprog_min
from oracles import lp_brute_force


class TestSmallProblems:
    def test_textbook_max(self, backend):
        # max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), value 36
        res = linprog_min([-3, -5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18], backend=backend)
        np.testing.assert_allclose(res.x, [2, 6], atol=1e-12)
        assert res.objective == pytest.approx(-36)

    def test_equality(self, backend):
        res = linprog_min([1, 1], A_eq=[[1, 2]], b_eq=[4], backend=backend)
        np.testing.assert_allclose(res.x, [0, 2], atol=1e-12)

    def test_negative_rhs_needs_phase_one(self, backend):
        # x + y >= 2 written as -x - y <= -2
        res = linprog_min([1, 2], [[-1, -1]], [-2], backend=backend)
        np.testing.assert_allclose(res.x, [2, 0], atol=1e-12)

    def test_infeasible(self, backend):
        with pytest.raises(InfeasibleLP):
            linprog_min([1.0], [[1.0]], [-1.0], backend=backend)

    def test_unbounded(self, backend):
        with pytest.raises(UnboundedLP):
            linprog_min([-1.0, 0.0], [[0.0, 1.0]], [1.0], backend=backend)

    def test_redundant_equalities(self, backend):
        res = linprog_min([1, 1], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2], backend=backend)
        assert res.objective == pytest.approx(1.0)

    def test_degenerate_does_not_cycle(self, backend):
        # a classic cycling example for the largest-coefficient rule
        c = [-0.75, 150, -0.02, 6]
        A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
        res = linprog_min(c, A, [0, 0, 1], backend=backend)
        assert res.objective == pytest.approx(-0.05)

    def test_no_constraints(self):
        assert linprog_min([1.0, 2.0]).objective == 0.0
        with pytest.raises(UnboundedLP):
            linprog_min([-1.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            linprog_min([1.0], [[1.0]], [1.0, 2.0])


@given(st.integers(0, 10**6))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 5), rng.integers(1, 4)
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.1, 2.0, size=m)  # origin feasible
    c = rng.normal(size=n)
    ref = lp_brute_force(c, np.vstack([A, np.eye(n)]), np.concatenate([b, np.full(n, 5.0)]))
    res = linprog_min(c, np.vstack([A, np.eye(n)]), np.concatenate([b, np.full(n, 5.0)]))
    assert res.objective == pytest.approx(ref, abs=1e-9)
    assert np.all(res.x >= 0)
    assert np.all(A @ res.x <= b + 1e-9)


def test_backends_agree(rng):
    from minmaxnet import _backend

    if "compiled" not in _backend.BACKENDS:
        pytest.skip("compiled kernels not built")
    for _ in range(50):
        m, n = rng.integers(1, 8), rng.integers(1, 8)
        A = rng.normal(size=(m, n))
        b = rng.uniform(0.1, 2.0, size=m)
        c = rng.normal(size=n)
        A = np.vstack([A, np.eye(n)])
        b = np.concatenate([b, np.ones(n)])
        a = linprog_min(c, A, b, backend="compiled")
        p = linprog_min(c, A, b, backend="python")
        np.testing.assert_array_equal(a.basis, p.basis)
        np.testing.assert_allclose(a.x, p.x, atol=1e-13)
