"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_backends.py [--steps 20000] [--n 10]
"""

import argparse
import time

import numpy as np

from metricdrift import _kernels_numpy as knp

try:
    from metricdrift import _kernels_numba as knb
except ImportError:
    knb = None


def timeit(fn, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_comid(mod, n, steps, rng):
    M = np.eye(n)
    mu = 2.0
    us = rng.normal(size=(steps, n))
    ys = rng.choice([-1.0, 1.0], size=steps)

    def run():
        nonlocal M, mu
        Mi, mui = M, mu
        for i in range(steps):
            Mi, mui, _ = mod.comid_update(Mi, mui, us[i], ys[i], 1e-3, 5e-5, 0)
        return Mi

    run()  # warm (jit compile on the numba path)
    return timeit(run, 3) / steps


def bench_knn(mod, rng):
    Y = np.ascontiguousarray(rng.normal(size=(500, 10)))
    labels = rng.integers(0, 3, size=500).astype(np.int64)
    mod.knn_loo_error(Y, labels, 5, 3)
    return timeit(lambda: mod.knn_loo_error(Y, labels, 5, 3), 10)

def bench_lloyd(mod, rng):
    X = np.ascontiguousarray(rng.normal(size=(500, 10)))
    init = np.ascontiguousarray(X[:3].copy())
    mod.lloyd(X, init, 100)
    return timeit(lambda: mod.lloyd(X, init, 100), 10)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--n", type=int, default=10)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    rows = []
    for name, fn in (
        (f"comid step (n={args.n})", lambda m: bench_comid(m, args.n, args.steps, np.random.default_rng(1))),
        ("LOO kNN (500 x 10, k=5)", lambda m: bench_knn(m, np.random.default_rng(2))),
        ("lloyd k-means (500 x 10, K=3)", lambda m: bench_lloyd(m, np.random.default_rng(3))),
    ):
        t_np = fn(knp)
        t_nb = fn(knb) if knb is not None else float("nan")
        rows.append((name, t_np, t_nb))

    print(f"{'kernel':<32} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, t_np, t_nb in rows:
        speed = t_np / t_nb if t_nb == t_nb else float("nan")
        print(f"{name:<32} {t_np*1e6:>9.1f} us {t_nb*1e6:>9.1f} us {speed:>8.1f}x")


if __name__ == "__main__":
    main()
