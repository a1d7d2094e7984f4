"""Benchmark the compiled delay-recursion kernel against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--timesteps T] [--nodes N] [--delay D]

Runs the same workload through both backends, checks they agree, and prints
throughput in million node-updates per second.
"""

import argparse
import sys
import time

import numpy as np


def run_backend(module, drive, init, delay, alpha, repeats):
    out = np.empty_like(drive)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        module.delay_recursion(drive, init, out, delay, alpha, module.NONLIN_SINE)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--timesteps", type=int, default=4096, help="input timesteps T")
    parser.add_argument("--nodes", type=int, default=250, help="virtual nodes N")
    parser.add_argument("--delay", type=int, default=203, help="delay D in node steps")
    parser.add_argument("--repeats", type=int, default=5, help="timing repetitions")
    args = parser.parse_args(argv)

    from deepdelay import _core_py
    from deepdelay.kernels import BACKEND

    total = args.timesteps * args.nodes
    rng = np.random.default_rng(0)
    drive = rng.uniform(-1.0, 1.0, size=total)
    init = rng.uniform(-0.5, 0.5, size=args.delay)
    alpha = 0.9

    candidates = [("numpy", _core_py)]
    if BACKEND == "cython":
        from deepdelay import _core

        candidates.insert(0, ("cython", _core))
    else:
        print("compiled backend unavailable; benchmarking the fallback only")

    results = {}
    print(f"workload: T={args.timesteps} N={args.nodes} D={args.delay} "
          f"({total / 1e6:.2f}M node updates)")
    for name, module in candidates:
        out, seconds = run_backend(module, drive, init, args.delay, alpha, args.repeats)
        results[name] = (out, seconds)
        print(f"  {name:7s} {seconds * 1e3:8.2f} ms   {total / seconds / 1e6:8.1f} M updates/s")

    if len(results) == 2:
        diff = np.max(np.abs(results["cython"][0] - results["numpy"][0]))
        print(f"max |cython - numpy| = {diff:.3e}")
        speedup = results["numpy"][1] / results["cython"][1]
        print(f"speedup: {speedup:.2f}x")
        if diff != 0.0:
            print("warning: backends disagree", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
