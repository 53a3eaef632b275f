"""Benchmark the numba kernels against their pure-numpy twins.

Both implementations are always importable regardless of the
MVSGEO_NO_NUMBA flag, so the comparison runs in one process.  Sizes mirror
real workloads: depth remap at the DTU evaluation resolution, a fusion
reference pass with 8 source views, and nearest-neighbor scans at point
counts where the quadratic oracle is still tractable.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from mvsgeo import _kernels
from mvsgeo._kernels import (
    _bilinear_remap_numba,
    _bilinear_remap_numpy,
    _fuse_pass_numba,
    _fuse_pass_numpy,
    _nn_bruteforce_numba,
    _nn_bruteforce_numpy,
)


def timeit(fn, repeats):
    fn()  # warm-up (JIT compile, cache touch)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_remap(rng, repeats):
    h, w = 864, 1152
    values = rng.uniform(400, 900, (h, w))
    valid = (rng.random((h, w)) > 0.05).astype(np.uint8)
    xs = rng.uniform(-5, w + 4, (h, w))
    ys = rng.uniform(-5, h + 4, (h, w))
    cv = np.ones((h, w), dtype=np.uint8)
    args = (values, valid, xs, ys, cv)
    return (
        f"bilinear remap {w}x{h}",
        timeit(lambda: _bilinear_remap_numba(*args), repeats),
        timeit(lambda: _bilinear_remap_numpy(*args), repeats),
    )


def bench_fuse_pass(rng, repeats):
    n_src, h, w = 8, 512, 640
    ref_depth = rng.uniform(400, 900, (h, w))
    ref_valid = np.ones((h, w), dtype=np.uint8)
    conf = rng.random((h, w))
    disp = rng.uniform(0, 2, (n_src, h, w))
    rdd = rng.uniform(0, 0.02, (n_src, h, w))
    dres = ref_depth[None] * rng.uniform(0.99, 1.01, (n_src, h, w))
    sx = rng.integers(0, w, (n_src, h, w))
    sy = rng.integers(0, h, (n_src, h, w))
    table = np.array([[1.0, 0.01]])
    src_idx = np.arange(1, n_src + 1, dtype=np.int64)

    def run(kernel):
        consumed = np.zeros((n_src + 1, h, w), dtype=np.uint8)
        kernel(ref_depth, ref_valid, conf, disp, rdd, dres, sx, sy,
               consumed, 0, src_idx, 0.5, 3, 0, table, 0)

    return (
        f"fusion pass {w}x{h}, {n_src} sources",
        timeit(lambda: run(_fuse_pass_numba), repeats),
        timeit(lambda: run(_fuse_pass_numpy), repeats),
    )


def bench_nn(rng, repeats):
    q = rng.normal(scale=100, size=(20_000, 3))
    r = rng.normal(scale=100, size=(20_000, 3))
    return (
        "brute-force NN 20k x 20k",
        timeit(lambda: _nn_bruteforce_numba(q, r), repeats),
        timeit(lambda: _nn_bruteforce_numpy(q, r), repeats),
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"package backend: {'numba' if _kernels.USING_NUMBA else 'numpy'} "
          f"(MVSGEO_NO_NUMBA toggles it)\n")
    print(f"{'kernel':<36} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for bench in (bench_remap, bench_fuse_pass, bench_nn):
        name, t_nb, t_np = bench(rng, args.repeats)
        print(f"{name:<36} {t_nb * 1e3:>8.1f}ms {t_np * 1e3:>8.1f}ms {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
