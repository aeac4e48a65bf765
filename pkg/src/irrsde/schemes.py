"""Tamed and untamed Euler-Maruyama schemes on equidistant grids.

The tamed scheme divides each drift increment by 1 + delta*|drift|, which
caps a single step's drift move at 1 and prevents the moment explosion the
plain explicit scheme suffers under superlinear drift.  The time-continuous
extension between grid points is materialized on nested finer grids only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _backend
from .brownian import IncrementArray
from .model import SdeProblem, eval_diffusion, eval_drift
from .transform import TransformedCoefficients

__all__ = [
    "GridSolution",
    "tame_drift",
    "tamed_em_step",
    "simulate_tamed_em",
    "simulate_untamed_em",
    "evaluate_on_fine_grid",
    "simulate_transformed_tamed_em",
    "OVERFLOW_CLAMP",
]

OVERFLOW_CLAMP = 1e150
LARGE_DELTA_WARN = 0.25


@dataclass
class GridSolution:
    """Scheme values at the N+1 grid times of one path; delta = T/N.

    If a step left [-1e150, 1e150] the path is frozen at the clamp from that
    step on and ``overflowed`` is set.
    """

    delta: float
    values: np.ndarray
    overflowed: bool = False

    @property
    def n_steps(self) -> int:
        return len(self.values) - 1

    def times(self) -> np.ndarray:
        return self.delta * np.arange(len(self.values))


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"step size must lie in (0, 1), got {delta}")
    if delta >= LARGE_DELTA_WARN:
        warnings.warn(
            f"step size {delta} >= {LARGE_DELTA_WARN}: taming guarantees degrade "
            "for coarse steps",
            RuntimeWarning,
            stacklevel=3,
        )
    return delta


def tame_drift(mu_val: float, delta: float) -> float:
    """Per-unit-time tamed drift mu/(1 + delta|mu|).

    Satisfies |result| <= min(1/delta, |mu_val|) exactly: the second bound is
    automatic, the first is enforced by a clamp that only acts in the
    one-ulp rounding regime delta*|mu| >~ 2^53.
    """
    delta = _check_delta(delta)
    mu_val = float(mu_val)
    t = mu_val / (1.0 + delta * abs(mu_val))
    cap = 1.0 / delta
    if not abs(t) <= cap:
        t = math.copysign(cap, mu_val)
    return t


def tamed_em_step(problem: SdeProblem, x: float, delta: float, dw: float) -> float:
    """One tamed Euler step from x with Brownian increment dw."""
    mu = eval_drift(problem, x)
    sig = eval_diffusion(problem, x)
    return x + tame_drift(mu, delta) * delta + sig * dw


@lru_cache(maxsize=128)
def _tables(problem: SdeProblem):
    """Kernel-ready coefficient tables (breakpoints, padded drift, diffusion)."""
    drift = problem.drift
    breaks = np.asarray(drift.breakpoints, dtype=np.float64)
    width = max(len(p) for p in drift.pieces)
    dcoefs = np.zeros((len(drift.pieces), width), dtype=np.float64)
    for j, p in enumerate(drift.pieces):
        dcoefs[j, : len(p)] = p
    scoefs = np.asarray(problem.diffusion.pieces[0], dtype=np.float64)
    return breaks, dcoefs, scoefs


def _transform_params(transform):
    zetas = np.asarray(transform.breakpoints, dtype=np.float64)
    alphas = np.asarray(transform.jump_coefficients, dtype=np.float64)
    return zetas, alphas, float(transform.bump_radius), float(transform.inverse_bracket)


def simulate_batch(problem: SdeProblem, dw: np.ndarray, delta: float, tamed: bool = True):
    """Scheme recursion for a (n_paths, n_steps) increment matrix."""
    breaks, dcoefs, scoefs = _tables(problem)
    dw = np.ascontiguousarray(dw, dtype=np.float64)
    return _backend.kernels.simulate_em_batch(
        breaks, dcoefs, scoefs, problem.x0, delta, dw, tamed
    )


def fine_eval_batch(
    problem: SdeProblem, coarse_values: np.ndarray, delta_c: float, factor: int, dw_fine: np.ndarray
):
    breaks, dcoefs, scoefs = _tables(problem)
    return _backend.kernels.fine_eval_batch(
        np.ascontiguousarray(coarse_values, dtype=np.float64),
        breaks,
        dcoefs,
        scoefs,
        delta_c,
        factor,
        np.ascontiguousarray(dw_fine, dtype=np.float64),
    )


def transformed_simulate_batch(tc: TransformedCoefficients, z0: float, dw: np.ndarray, delta: float):
    if tc.transform.is_identity:
        breaks, dcoefs, scoefs = _tables(tc.problem)
        dw = np.ascontiguousarray(dw, dtype=np.float64)
        return _backend.kernels.simulate_em_batch(
            breaks, dcoefs, scoefs, z0, delta, dw, True
        )
    breaks, dcoefs, scoefs = _tables(tc.problem)
    zetas, alphas, nu, bracket = _transform_params(tc.transform)
    dw = np.ascontiguousarray(dw, dtype=np.float64)
    return _backend.kernels.transformed_em_batch(
        zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z0, delta, dw
    )


def _check_grid(problem: SdeProblem, increments: IncrementArray) -> float:
    T = problem.horizon
    if not math.isclose(increments.T, T, rel_tol=1e-12, abs_tol=0.0):
        raise ValueError(
            f"increments cover horizon {increments.T}, problem has horizon {T}"
        )
    return _check_delta(increments.delta)


def simulate_tamed_em(problem: SdeProblem, increments: IncrementArray) -> GridSolution:
    """Run the tamed scheme from the problem's initial value over one path."""
    delta = _check_grid(problem, increments)
    values, flags = simulate_batch(problem, increments.values[None, :], delta, tamed=True)
    return GridSolution(delta=delta, values=values[0], overflowed=bool(flags[0]))


def simulate_untamed_em(problem: SdeProblem, increments: IncrementArray) -> GridSolution:
    """Plain explicit scheme; blows up under superlinear drift (flagged + frozen)."""
    delta = _check_grid(problem, increments)
    values, flags = simulate_batch(problem, increments.values[None, :], delta, tamed=False)
    return GridSolution(delta=delta, values=values[0], overflowed=bool(flags[0]))


def evaluate_on_fine_grid(
    coarse: GridSolution, problem: SdeProblem, fine_increments: IncrementArray
) -> np.ndarray:
    """Values of the coarse scheme's time-continuous extension at fine grid times.

    The fine grid must refine the coarse one by a power-of-two factor and
    carry the same Brownian path.  Coarse grid times reproduce the coarse
    values bitwise.
    """
    nc = coarse.n_steps
    nf = fine_increments.n_steps
    factor, rem = divmod(nf, nc)
    if rem or factor < 1 or factor & (factor - 1):
        raise ValueError(
            f"fine grid ({nf} steps) must refine the coarse grid ({nc} steps) "
            "by a power-of-two factor"
        )
    if not math.isclose(fine_increments.delta * factor, coarse.delta, rel_tol=1e-12):
        raise ValueError("fine and coarse grids cover different horizons")
    out = fine_eval_batch(
        problem, coarse.values[None, :], coarse.delta, factor, fine_increments.values[None, :]
    )
    return out[0]


def simulate_transformed_tamed_em(
    tc: TransformedCoefficients, z0: float, increments: IncrementArray
) -> GridSolution:
    """Tamed scheme for the transformed process, started at z0 (= map of x0)."""
    delta = _check_grid(tc.problem, increments)
    values, flags = transformed_simulate_batch(tc, z0, increments.values[None, :], delta)
    return GridSolution(delta=delta, values=values[0], overflowed=bool(flags[0]))
