"""Benchmark the compiled kernel extension against the numpy fallback.

Usage:
    python benchmarks/bench_backends.py [--paths N] [--level L] [--repeats R]

Runs the hot kernels (tamed recursion, untamed recursion, nested-grid
evaluation, transformed recursion) on identical inputs through both backends,
checks the outputs are bitwise identical, and prints timings.
"""

import argparse
import time

import numpy as np

from irrsde import PiecewisePolynomial, SdeProblem, build_transform
from irrsde import _kernels_py
from irrsde.brownian import coarsen_matrix, gaussian_matrix
from irrsde.schemes import _tables, _transform_params

try:
    from irrsde import _kernels
except ImportError:
    _kernels = None


def cubic_jump_problem():
    drift = PiecewisePolynomial(
        (0.0,), ((1.0, -1.0, 0.0, -1.0), (-1.0, -1.0, 0.0, -1.0))
    )
    return SdeProblem(drift, PiecewisePolynomial.single((1.0,)), 0.5, 1.0)


def time_call(fn, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=256)
    parser.add_argument("--level", type=int, default=11)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not available; nothing to compare")
        return 1

    problem = cubic_jump_problem()
    breaks, dcoefs, scoefs = _tables(problem)
    transform = build_transform(problem)
    zetas, alphas, nu, bracket = _transform_params(transform)
    z0 = transform.value(problem.x0)

    n_steps = 1 << args.level
    delta = problem.horizon / n_steps
    dw = gaussian_matrix(2718, range(args.paths), n_steps, problem.horizon)
    cdw = coarsen_matrix(dw, 8)
    coarse_delta = delta * 8

    cases = {
        "tamed recursion": lambda k: k.simulate_em_batch(
            breaks, dcoefs, scoefs, problem.x0, delta, dw, True
        ),
        "untamed recursion": lambda k: k.simulate_em_batch(
            breaks, dcoefs, scoefs, problem.x0, delta, dw, False
        ),
        "nested-grid evaluation": None,  # filled below (needs the coarse run)
        "transformed recursion": lambda k: k.transformed_em_batch(
            zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z0, coarse_delta, cdw
        ),
    }
    coarse_vals, _ = _kernels.simulate_em_batch(
        breaks, dcoefs, scoefs, problem.x0, coarse_delta, cdw, True
    )
    cases["nested-grid evaluation"] = lambda k: k.fine_eval_batch(
        coarse_vals, breaks, dcoefs, scoefs, coarse_delta, 8, dw
    )

    print(
        f"{args.paths} paths x {n_steps} steps (delta = 2^-{args.level}), "
        f"best of {args.repeats}"
    )
    print(f"{'kernel':<24} {'compiled':>10} {'fallback':>10} {'speedup':>8}  bitwise")
    for name, call in cases.items():
        tc, out_c = time_call(lambda: call(_kernels), args.repeats)
        tp, out_p = time_call(lambda: call(_kernels_py), args.repeats)
        a = out_c[0] if isinstance(out_c, tuple) else out_c
        b = out_p[0] if isinstance(out_p, tuple) else out_p
        same = np.array_equal(a, b)
        print(f"{name:<24} {tc * 1e3:>8.1f}ms {tp * 1e3:>8.1f}ms {tp / tc:>7.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
