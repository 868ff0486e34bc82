"""Compare the numba kernels with the pure-numpy fallback.

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from dpprec import _accel
from dpprec.kernel import build_kernel_factor
from dpprec.linalg import symmetric_eigh
from dpprec.sampler import KDPPSampler, SampleConfig, greedy_map_select, sample_k_dpp


def timed(fn, repeats=5):
    fn()  # warm-up / JIT compile
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def main():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 64))
    C = X.T @ X
    factor = build_kernel_factor(rng.uniform(0.1, 1, 1000), rng.standard_normal((1000, 64)) / 8)
    small = build_kernel_factor(np.ones(8), rng.standard_normal((8, 4)))
    cases = {
        "jacobi 64x64": lambda: symmetric_eigh(C),
        "sample_k_dpp N=1000 d=64 k=60": lambda: sample_k_dpp(factor, SampleConfig(k=60), np.random.default_rng(1)),
        "greedy N=1000 k=60": lambda: greedy_map_select(factor, 60),
        "20k draws N=8 k=3": lambda: KDPPSampler(small, 3).sample_many(20_000, np.random.default_rng(2)),
    }
    print(f"{'case':34s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        with _accel.backend_scope("numba"):
            t_nb = timed(fn)
        with _accel.backend_scope("numpy"):
            t_np = timed(fn)
        print(f"{name:34s} {t_nb*1e3:9.2f}ms {t_np*1e3:9.2f}ms {t_np/t_nb:7.1f}x")


if __name__ == "__main__":
    main()
