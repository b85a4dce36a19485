"""Time the numba and numpy kernel paths on identical inputs.

    python3 benchmarks/bench_kernels.py [--n 100000] [--repeat 20]

Also times one full particle trajectory under each backend by re-importing
the package in a subprocess with ``RATEKIN_NUMBA`` set.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ratekin import _kernels

TRAJ_SNIPPET = """
import time
from ratekin.control import PolicySpec
from ratekin.meanfield import ControlTriple, ModelParams
from ratekin.particles import run_trajectory
from ratekin.rng import RngStream
pol = PolicySpec("fixed", ControlTriple(0.1, 0.5, 1.0))
run_trajectory(100, 2, pol, ModelParams(), RngStream(0))
t0 = time.perf_counter()
run_trajectory({n}, {horizon}, pol, ModelParams(), RngStream(1))
print(time.perf_counter() - t0)
"""


def kernel_inputs(n: int, seed: int = 0):
    g = np.random.default_rng(seed)
    skills = g.standard_normal(n)
    ratings = g.standard_normal(n)
    perm = g.permutation(n)
    first, second = perm[: n // 2].copy(), perm[n // 2 :].copy()
    omega = g.standard_normal(n // 2)
    draws = g.standard_normal((6, n))
    return skills, ratings, first, second, omega, draws


def bench_impl(impl, n: int, repeat: int) -> dict[str, float]:
    skills, ratings, first, second, omega, draws = kernel_inputs(n)
    out = np.empty(n)
    calls = {
        "pair_update": lambda: impl.pair_update(ratings, skills, first, second, omega, 0.1, out),
        "moments2": lambda: impl.moments2(skills, ratings),
        "shadow_sums": lambda: impl.shadow_sums(*draws, 0.5, 0.85, 0.2, 0.45, 1.0, 0.99),
    }
    res = {}
    for name, fn in calls.items():
        fn()  # warm-up / compile
        res[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    return res


def bench_trajectory(backend_flag: str, n: int, horizon: int) -> float:
    env = dict(os.environ, RATEKIN_NUMBA=backend_flag)
    code = TRAJ_SNIPPET.format(n=n, horizon=horizon)
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True, capture_output=True, text=True)
    return float(out.stdout.strip())


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--horizon", type=int, default=200)
    args = ap.parse_args(argv)

    impls = [_kernels.numpy_impl]
    if _kernels.numba_impl is not None:
        impls.append(_kernels.numba_impl)
    else:
        print("numba not importable; numpy path only")
    results = {impl.name: bench_impl(impl, args.n, args.repeat) for impl in impls}

    print(f"kernels, n={args.n}, best of {args.repeat} (ms)")
    print(f"{'kernel':<14}" + "".join(f"{name:>12}" for name in results) + f"{'speedup':>10}")
    for kernel in results["numpy"]:
        row = [results[name][kernel] * 1e3 for name in results]
        speed = f"{row[0] / row[-1]:>9.1f}x" if len(row) > 1 else ""
        print(f"{kernel:<14}" + "".join(f"{v:>12.3f}" for v in row) + speed)

    print(f"\nrun_trajectory n={args.n}, T={args.horizon} (s)")
    flags = ["0"] + (["1"] if _kernels.numba_impl is not None else [])
    for flag in flags:
        name = "numpy" if flag == "0" else "numba"
        print(f"{name:<14}{bench_trajectory(flag, args.n, args.horizon):>12.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
