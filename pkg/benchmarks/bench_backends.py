#!/usr/bin/env python3
"""Time the compiled solver kernels against the numpy fallback.

Runs matched workloads through ``sccanet._core`` (Cython) and
``sccanet._core_py`` (numpy) in one process, checks that both backends
produce the same numbers, and reports best-of-N wall times per workload.

Usage: python3 benchmarks/bench_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from sccanet import _core_py
from sccanet.knorm import standardize_columns

try:
    from sccanet import _core
except ImportError:  # pragma: no cover - depends on the build environment
    _core = None


def best_time(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def solver_workloads(rng: np.random.Generator):
    """(label, args) pairs for scca_solve_kernel: one oracle-sized instance
    and two partition-sized instances from the weave pipelines."""
    cases = []
    for label, n, q, lam in (
        ("solve n=50 q=10 lambda=0", 50, 10, 0.0),
        ("solve n=30 q=75 lambda=9", 30, 75, 9.0),
        ("solve n=30 q=175 lambda=9", 30, 175, 9.0),
    ):
        x = rng.standard_normal((n, q))
        y = rng.standard_normal((n, q))
        cases.append((label, (x, y, lam, lam, 1e-6, 200)))
    return cases


def round_workloads(rng: np.random.Generator):
    """(label, args) pairs for weave_round_kernel: a selection-phase round
    and a full benchmark-sized round."""
    cases = []
    for label, n, m, n_partitions, lam in (
        ("round n=30 m=105 T=30 lambda=9", 30, 105, 30, 9.0),
        ("round n=30 m=350 T=100 lambda=9", 30, 350, 100, 9.0),
    ):
        z = standardize_columns(rng.standard_normal((n, m))) * math.sqrt(n - 1)
        perms = np.vstack([rng.permutation(m) for _ in range(n_partitions)]).astype(np.int64)
        half = (m + 1) // 2
        cases.append((label, (z, perms, half, lam, lam, 1e-6, 200)))
    return cases


def check_parity(kernel_name: str, args) -> float:
    """Max absolute difference between backend outputs for one workload."""
    python_out = getattr(_core_py, kernel_name)(*args)
    compiled_out = getattr(_core, kernel_name)(*args)
    if kernel_name == "weave_round_kernel":
        return float(np.abs(python_out - compiled_out).max())
    gaps = [
        float(np.abs(np.asarray(p) - np.asarray(c)).max())
        for p, c in zip(python_out[:3], compiled_out[:3])  # a, b, objective
    ]
    if python_out[3:5] != compiled_out[3:5]:  # iterations, converged
        raise SystemExit(f"backends disagree on iteration count for {kernel_name}")
    return max(gaps)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3, help="best-of repeats per cell")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    workloads = [("scca_solve_kernel", label, a) for label, a in solver_workloads(rng)]
    workloads += [("weave_round_kernel", label, a) for label, a in round_workloads(rng)]

    if _core is None:
        print("compiled backend unavailable; timing the numpy fallback only")
    else:
        worst = max(check_parity(kernel, call_args) for kernel, _, call_args in workloads)
        print(f"backend parity: max |difference| across workloads = {worst:.2e}")

    header = f"{'workload':<34} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for kernel, label, call_args in workloads:
        python_fn = getattr(_core_py, kernel)
        python_time = best_time(lambda: python_fn(*call_args), args.repeats)
        if _core is None:
            print(f"{label:<34} {python_time:>9.4f}s {'-':>10} {'-':>8}")
            continue
        compiled_fn = getattr(_core, kernel)
        compiled_time = best_time(lambda: compiled_fn(*call_args), args.repeats)
        speedup = python_time / compiled_time if compiled_time > 0 else math.inf
        print(f"{label:<34} {python_time:>9.4f}s {compiled_time:>9.4f}s {speedup:>7.1f}x")


if __name__ == "__main__":
    main()
