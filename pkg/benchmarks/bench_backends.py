"""Compare the numba-jitted loop kernels against the pure-numpy fallbacks.

Run:  python3 benchmarks/bench_backends.py [--sizes small|large]
"""
import argparse
import time

import numpy as np

from sardespeckle import kernels


def _time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_gamma(n):
    seed = np.uint64(12345)
    rows = []
    if kernels._gamma_field_jit is not None:
        kernels._gamma_field_jit(seed, 16, 1.0)  # compile
        rows.append(("numba", _time(lambda: kernels._gamma_field_jit(seed, n, 1.0))))
    with np.errstate(over="ignore"):
        rows.append(("numpy", _time(lambda: kernels._gamma_field_numpy(seed, n, 1.0))))
    return rows


def bench_prox(n):
    rng = np.random.default_rng(0)
    v = rng.uniform(-3, 3, n)
    y = rng.uniform(-3, 3, n)
    rows = []
    if kernels._prox_field_jit is not None:
        kernels._prox_field_jit(v[:16], y[:16], 1.0, 40.0)
        rows.append(("numba", _time(lambda: kernels._prox_field_jit(v, y, 1.0, 40.0))))
    rows.append(("numpy", _time(lambda: kernels._prox_field_numpy(v, y, 1.0, 40.0))))
    return rows


def bench_conv(hw, cin=64, cout=64):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((cin, hw, hw))
    w = rng.standard_normal((cout, cin, 3, 3))
    b = rng.standard_normal(cout)
    rows = []
    if kernels._conv3x3_jit is not None:
        kernels._conv3x3_jit(x[:, :8, :8], w, b)
        rows.append(("numba", _time(lambda: kernels._conv3x3_jit(x, w, b), repeats=3)))
    rows.append(("numpy", _time(lambda: kernels._conv3x3_numpy(x, w, b), repeats=3)))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", choices=("small", "large"), default="small")
    args = parser.parse_args()
    big = args.sizes == "large"

    cases = [
        (f"gamma sampling (n={4_000_000 if big else 1_000_000})",
         bench_gamma(4_000_000 if big else 1_000_000)),
        (f"prox newton (n={4_000_000 if big else 1_000_000})",
         bench_prox(4_000_000 if big else 1_000_000)),
        (f"conv3x3 64ch ({256 if big else 96}x{256 if big else 96})",
         bench_conv(256 if big else 96)),
    ]
    print(f"{'kernel':40s} {'backend':8s} {'best (ms)':>10s} {'speedup':>8s}")
    for name, rows in cases:
        base = dict(rows).get("numpy")
        for backend, secs in rows:
            speedup = f"{base / secs:6.2f}x" if base else "n/a"
            print(f"{name:40s} {backend:8s} {secs * 1e3:10.2f} {speedup:>8s}")


if __name__ == "__main__":
    main()
