"""Time the numba kernels against their pure-numpy twins.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are called through the same public functions with an explicit
``backend=`` argument; the first numba call (compilation) is excluded.
"""

import argparse
import time

import numpy as np

from shubin import kernels
from shubin._accel import HAVE_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    x = np.sort(rng.uniform(-40.0, 40.0, 4000))
    w = rng.standard_normal(4000)
    c = rng.standard_normal(2048)
    loglam = np.log(np.arange(1, 4001, dtype=np.float64))
    logabs = -np.sqrt(np.arange(1, 4001, dtype=np.float64))
    return {
        "hermite_table N=512, 4000 pts": lambda b: kernels.hermite_table(512, x, backend=b),
        "hermite_project N=2048, 4000 pts": lambda b: kernels.hermite_project(2048, x, w, backend=b),
        "hermite_synthesize N=2048, 4000 pts": lambda b: kernels.hermite_synthesize(c, x, backend=b),
        "hermite_sumsq N=2048, 4000 pts": lambda b: kernels.hermite_sumsq(2048, x, backend=b),
        "log_iterate_norms J=4000, M<=200": lambda b: kernels.log_iterate_norms(loglam, logabs, 200, backend=b),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    print(f"{'kernel':<40}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases().items():
        row = {}
        for b in backends:
            fn(b)  # warm-up (compiles numba)
            row[b] = best_of(lambda: fn(b), args.repeat)
        speed = row["numpy"] / row["numba"] if "numba" in row else float("nan")
        print(f"{name:<40}" + "".join(f"{row[b] * 1e3:>10.2f}ms" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
