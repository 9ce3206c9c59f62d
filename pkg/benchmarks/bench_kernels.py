"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from covertfbl import kernels
from covertfbl._accel import HAVE_NUMBA
from covertfbl.covert import _shell_radius_nodes


def best_of(fn, repeat):
    fn()  # warm-up (JIT compile or cache load)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    z = rng.standard_normal((4096, 1000))
    yield "row_moments 4096x1000", (lambda f: lambda: f(z)), "row_moments"

    log_w, rho = _shell_radius_nodes(16, 0.8, 0.5, 64)
    t = rng.chisquare(16, 20_000)
    yield ("shell_llr 2e4 x 64 nodes", (lambda f: lambda: f(t, log_w, rho, 8.0)),
           "shell_log_likelihood_ratio")

    words = 0.4 * rng.standard_normal((8, 32))
    lg = np.full(8, 0.5)
    y = words[rng.integers(0, 8, 50_000)] + rng.standard_normal((50_000, 32))
    yield "decode_first 5e4 x M=8, n=32", (lambda f: lambda: f(words, lg, y, 0.16)), "decode_first"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy timings are available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speed-up':>9s}")
    for label, make, name in cases(rng):
        t_np = best_of(make(getattr(kernels, name + "_numpy")), args.repeat)
        if HAVE_NUMBA:
            t_nb = best_of(make(getattr(kernels, name + "_numba")), args.repeat)
            print(f"{label:32s} {1e3 * t_np:12.2f} {1e3 * t_nb:12.2f} {t_np / t_nb:8.1f}x")
        else:
            print(f"{label:32s} {1e3 * t_np:12.2f} {'-':>12s} {'-':>9s}")


if __name__ == "__main__":
    main()
