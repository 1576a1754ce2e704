"""Compiled kernels vs the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Prints the best wall time of each kernel for both implementations and the
speed-up. Inputs are a 20-point cloud distance field on a 301 x 301 grid.
"""

import argparse
import time

import numpy as np

from distlab import _fallback, kernels
from distlab.critical import directional_setup
from distlab.norms import Norm


def cloud_field(n=301, seed=0):
    rng = np.random.default_rng(seed)
    P = rng.uniform(0, 1, (20, 2))
    ax = np.linspace(-0.25, 1.25, n)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    V = np.min(np.hypot(X[..., None] - P[:, 0], Y[..., None] - P[:, 1]), axis=2)
    return V, (-0.25, -0.25), ax[1] - ax[0]


def cases():
    V, o, h = cloud_field()
    setup = directional_setup(Norm.euclid(2), h, None, None, 16, 0, 1e-3)
    rng = np.random.default_rng(1)
    X = rng.uniform(0.0, 1.0, (5000, 2))
    scale = np.ones(len(X))
    G = _fallback.probe_min_norm_gradients(V, o, h, X, setup.offsets, scale)
    first = -G / np.maximum(np.linalg.norm(G, axis=1, keepdims=True), 1e-300)
    counts = rng.integers(1, 6, 50_000).astype(np.int64)
    U = np.zeros((len(counts), 5, 2))
    for n, c in enumerate(counts):
        a = rng.uniform(0, 2 * np.pi, c)
        U[n, :c] = np.column_stack([np.cos(a), np.sin(a)])
    return {
        "march_squares": (V, 0.1),
        "probe_min_norm_gradients": (V, o, h, X, setup.offsets, scale),
        "directional_scan": (V, o, h, X, first, setup.dirs, setup.offsets, setup.ts, setup.delta, 1e-3, scale),
        "hull_margin_2d": (U, counts),
    }


def best_time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    compiled = None
    if kernels.HAVE_COMPILED:
        from distlab import _kernels as compiled
    else:
        print("compiled extension not available; only the fallback is timed")
    print(f"{'kernel':<26}{'fallback [s]':>14}{'compiled [s]':>14}{'speed-up':>10}")
    for name, kargs in cases().items():
        slow = best_time(getattr(_fallback, name), kargs, args.repeat)
        if compiled is None:
            print(f"{name:<26}{slow:>14.4f}{'-':>14}{'-':>10}")
            continue
        fast = best_time(getattr(compiled, name), kargs, args.repeat)
        print(f"{name:<26}{slow:>14.4f}{fast:>14.4f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
