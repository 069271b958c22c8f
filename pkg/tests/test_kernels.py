"""The compiled kernels and the numpy fallback must agree."""

import subprocess
import sys

import numpy as np
import pytest

from minmaxnet import _backend, _fallback, numerics

needs_compiled = pytest.mark.skipif("compiled" not in _backend.BACKENDS, reason="compiled kernels not built")


@needs_compiled
class TestAgreement:
    @pytest.mark.parametrize("shape", [(3, 3), (9, 9), (20, 12), (12, 20), (1, 7)])
    def test_jacobi(self, shape):
        a = np.random.default_rng(sum(shape)).normal(size=shape)
        c = numerics.singular_values(a, backend="compiled")
        p = numerics.singular_values(a, backend="python")
        np.testing.assert_allclose(c, p, rtol=1e-13, atol=1e-14)

    def test_nullspace(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 10))
            G = rng.normal(size=(int(rng.integers(1, n)), n))
            c = numerics.orthonormal_nullspace_basis(G, backend="compiled")
            p = numerics.orthonormal_nullspace_basis(G, backend="python")
            assert c.shape == p.shape
            # same subspace: projectors agree
            np.testing.assert_allclose(c @ c.T, p @ p.T, atol=1e-12)

    def test_pivot_on(self, rng):
        T = rng.normal(size=(4, 6))
        a, b = T.copy(), T.copy()
        _backend.get("compiled").pivot_on(a, 1, 2)
        _fallback.pivot_on(b, 1, 2)
        np.testing.assert_allclose(a, b, atol=1e-14)
        assert a[1, 2] == 1.0


def test_get_unknown():
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_env_forces_fallback():
    code = "from minmaxnet import _backend; print(_backend.NAME, sorted(_backend.BACKENDS))"
    out = subprocess.run([sys.executable, "-c", code], env={"MINMAXNET_PURE": "1", "PATH": ""},
                         capture_output=True, text=True, check=True).stdout
    assert out.split()[0] == "python"
