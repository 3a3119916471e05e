#!/usr/bin/env python3
"""Benchmark the compiled invariant kernels against the pure-Python fallback.

Times the two hot solvers (invariant constant D and counterpart reserve y)
over randomized pool states, then an end-to-end simulated epoch on the
currently selected backend.

    python benchmarks/bench_kernels.py [--solves 200000] [--epochs 20]
"""
import argparse
import time

import numpy as np

from ammtuner import _kernels_py, kernels


def bench_solvers(module, instances):
    start = time.perf_counter()
    for x0, x1, amp, bump in instances:
        d = module.d_solve2(x0, x1, amp)[0]
        module.y_solve2(x0 * bump, amp, d)
    elapsed = time.perf_counter() - start
    return elapsed / len(instances)


def bench_epoch(epochs):
    from ammtuner.agent import AgentKind
    from ammtuner.experiment import make_config, run_training

    config = make_config("normal", AgentKind.BASELINE, epochs=epochs,
                         seeds=(1,))
    start = time.perf_counter()
    run_training(config, 1)
    return (time.perf_counter() - start) / epochs


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--solves", type=int, default=200_000,
                        help="randomized d+y solve pairs per backend")
    parser.add_argument("--epochs", type=int, default=20,
                        help="epochs for the end-to-end timing")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    instances = [
        (float(x0), float(x1), float(amp), float(bump))
        for (x0, x1), amp, bump in zip(
            rng.uniform(1e2, 1e5, size=(args.solves, 2)),
            rng.choice([1.0, 10.0, 42.0, 85.0], size=args.solves),
            rng.uniform(1.0, 1.5, size=args.solves))
    ]

    backends = [("python", _kernels_py)]
    try:
        from ammtuner import _kernels
        backends.append(("compiled", _kernels))
    except ImportError:
        print("compiled kernels not built; timing the fallback only")

    results = {}
    for name, module in backends:
        per_solve = bench_solvers(module, instances)
        results[name] = per_solve
        print(f"{name:>9}: {per_solve * 1e6:7.2f} us per d+y solve pair "
              f"({args.solves} instances)")

    if len(results) == 2:
        print(f"{'speedup':>9}: {results['python'] / results['compiled']:.1f}x")

    per_epoch = bench_epoch(args.epochs)
    print(f"\nend-to-end ({kernels.BACKEND} backend): "
          f"{per_epoch * 1e3:.1f} ms per 400-order epoch")


if __name__ == "__main__":
    main()
