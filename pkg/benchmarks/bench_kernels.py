"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--n 4000] [--repeat 3]

Times one shooting trajectory of each kind and one pair of exponential
sweeps on the same inputs, checks that both backends agree, and prints the
speedup.
"""

import argparse
import math
import time

import numpy as np

from dirac_soliton import kernels


def _cases(n):
    r = np.linspace(20.0 / n, 20.0, n)
    s = np.exp(-r)
    ds = -s
    t = np.exp(-r) * r
    dt = np.exp(-r) * (1.0 - r)
    return {
        "nls_trajectory": lambda m: m.nls_trajectory(r, 4.3373876800, 0.0, 1.0, 4, False),
        "dirac_trajectory": lambda m: m.dirac_trajectory(
            r / math.sqrt(1e-3), 0.0, 0.137, 1.0, 1e-3, 4, False
        ),
        "exp_sweeps": lambda m: m.exp_sweeps(r, s, ds, t, dt),
    }


def _best_time(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _max_diff(a, b):
    diff = 0.0
    for x, y in zip(a, b):
        if isinstance(x, np.ndarray):
            both = np.isfinite(x) & np.isfinite(y)
            diff = max(diff, float(np.max(np.abs(x[both] - y[both]), initial=0.0)))
    return diff


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=4000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    try:
        compiled = kernels.backend_module("cython")
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return
    python = kernels.backend_module("python")

    print(f"{'kernel':<18}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, call in _cases(args.n).items():
        tc, oc = _best_time(lambda: call(compiled), args.repeat)
        tp, op = _best_time(lambda: call(python), args.repeat)
        print(f"{name:<18}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}{_max_diff(oc, op):>12.2e}")


if __name__ == "__main__":
    main()
