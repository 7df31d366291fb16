"""Benchmark the two simulation kernels (numba @njit vs pure numpy).

Runs the fair stochastic simulator on a few concrete protocols with both
backends, checks that they produce identical results, and prints per-backend
timings.  Usage:

    python3 benchmarks/bench_simulate.py [--seeds N] [--max-steps N]
"""

from __future__ import annotations

import argparse
import sys
import time

sys.path.insert(0, "src")

from ppsynth import kernels  # noqa: E402
from ppsynth.construct_small import build_greater_sum_halting  # noqa: E402
from ppsynth.fixtures import flock_binary, flock_unary, toy_majority_helper  # noqa: E402
from ppsynth.protocol import initial_config  # noqa: E402


def cases():
    yield "flock_unary(4), x=40", flock_unary(4), {"x": 40}
    yield "flock_binary(6), x=100", flock_binary(6), {"x": 100}
    yield ("greater_sum(x-y>0, i=6), x=4 y=2",
           build_greater_sum_halting({"x": 1}, {"y": 1}, 6),
           {"x": 4, "y": 2})
    # long-running case: keeps churning until the stability window is full
    yield "toy_majority_helper, x=30 y=20", toy_majority_helper(), {"x": 30, "y": 20}


def bench(backend: str, protocol, v, seeds: int, max_steps: int):
    results = []
    t0 = time.perf_counter()
    for seed in range(seeds):
        c0 = initial_config(protocol, v)
        r = kernels.simulate_kernel(protocol, c0, seed, max_steps, 50_000,
                                    backend=backend)
        results.append((r.outcome, r.bit, r.steps))
    return time.perf_counter() - t0, results


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--max-steps", type=int, default=200_000)
    args = ap.parse_args()

    backends = ["numpy"]
    if kernels.numba_enabled():
        backends.append("numba")
        # warm up: compile the kernel outside the timed region
        p = flock_unary(2)
        kernels.simulate_kernel(p, initial_config(p, {"x": 5}), 0, 100, 50,
                                backend="numba")
    else:
        print("numba unavailable or disabled (PPSYNTH_NUMBA=0); "
              "benchmarking numpy only")

    status = 0
    for name, protocol, v in cases():
        print(f"\n{name}: {len(protocol.states)} states, "
              f"{len(protocol.transitions)} transitions, "
              f"{args.seeds} seeds x {args.max_steps} max steps")
        reference = None
        for backend in backends:
            dt, results = bench(backend, protocol, v, args.seeds, args.max_steps)
            steps = sum(r[2] for r in results)
            rate = steps / dt if dt > 0 else float("inf")
            print(f"  {backend:>6}: {dt:8.3f}s  ({steps} steps, {rate:,.0f} steps/s)")
            if reference is None:
                reference = results
            elif results != reference:
                print("  MISMATCH between backends!")
                status = 1
        if len(backends) == 2:
            print("  backends agree on all outcomes")
    return status


if __name__ == "__main__":
    sys.exit(main())
