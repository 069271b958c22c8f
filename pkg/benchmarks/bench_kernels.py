"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Reports the best-of-N wall time per call for one-sided Jacobi singular
values, null-space bases and simplex solves of the sizes that occur
during training.
"""

import argparse
import time

import numpy as np

from minmaxnet import _backend, numerics, simplex


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    for shape in [(9, 9), (24, 18), (60, 40)]:
        a = rng.normal(size=shape)
        yield f"singular_values {shape[0]}x{shape[1]}", lambda b, a=a: numerics.singular_values(a, backend=b)
    for rows, n in [(4, 18), (20, 45)]:
        g = rng.normal(size=(rows, n))
        yield f"nullspace {rows}x{n}", lambda b, g=g: numerics.orthonormal_nullspace_basis(g, backend=b)
    for m in (10, 40):
        G = rng.normal(size=(m, 3 * m))
        Q = G @ G.T
        rhs = Q @ rng.uniform(0.0, 1.0, m)
        yield f"equality LP {m}x{m}", lambda b, Q=Q, rhs=rhs: simplex.linprog_min(
            np.ones(len(rhs)), A_eq=Q, b_eq=rhs, backend=b)
    for m, n in [(20, 10), (60, 30)]:
        A = rng.normal(size=(m, n))
        bnd = rng.uniform(1.0, 2.0, m)
        c = -rng.uniform(0.0, 1.0, n)
        A = np.vstack([A, np.eye(n)])
        bnd = np.concatenate([bnd, np.ones(n)])
        yield f"inequality LP {m + n}x{n}", lambda b, A=A, bnd=bnd, c=c: simplex.linprog_min(
            c, A, bnd, backend=b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    backends = sorted(_backend.BACKENDS)
    if "compiled" not in backends:
        print("compiled kernels not built; only the fallback is timed")
    print(f"{'case':28s}" + "".join(f"{b:>14s}" for b in backends) + ("    speedup" if len(backends) > 1 else ""))
    for name, fn in cases(np.random.default_rng(args.seed)):
        times = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        row = f"{name:28s}" + "".join(f"{times[b] * 1e3:11.3f} ms" for b in backends)
        if len(backends) > 1:
            row += f"  {times['python'] / times['compiled']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
