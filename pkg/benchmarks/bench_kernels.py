"""Time the hot kernels under the numba and pure-numpy backends.

Run with the default (numba) backend installed:

    python benchmarks/bench_kernels.py

Prints per-call timings for both variants of each kernel at benchmark-like
sizes; the numpy column is what VRSPLIT_PURE_NUMPY=1 selects.
"""

import time

import numpy as np

from vrsplit._kernels import NUMBA_VARIANTS, NUMPY_VARIANTS


def timeit(fn, args, repeat=200):
    fn(*args)  # warm-up / jit compile
    start = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - start) / repeat


def main():
    rng = np.random.default_rng(0)

    n, p2, pf, b = 5000, 10, 301, 35
    X = rng.normal(size=(n, p2, pf))
    labels = (rng.random(n) > 0.5).astype(float)
    u = rng.normal(size=pf)
    v = np.abs(rng.normal(size=p2))
    v /= v.sum()
    idx = rng.integers(0, n, size=b)

    x_prox = rng.uniform(-2, 2, size=pf)
    v_proj = rng.normal(size=1000)

    cases = [
        ("logistic_components", (X, labels, u, v, idx)),
        ("scad_prox_vec", (x_prox, 0.002, 0.005, 3.7)),
        ("simplex_project_vec", (v_proj,)),
    ]

    print(f"{'kernel':<22} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, args in cases:
        t_np = timeit(NUMPY_VARIANTS[name], args)
        if name in NUMBA_VARIANTS:
            t_nb = timeit(NUMBA_VARIANTS[name], args)
            print(f"{name:<22} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us {t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<22} {t_np * 1e6:>10.1f}us {'n/a':>12} {'':>9}")


if __name__ == "__main__":
    main()
