"""Monte Carlo estimation of the scheme's quantitative behavior.

Strong sup-norm error against a self-coupled fine reference (both schemes
driven by the same Brownian path), the transformed-process error split, and
the supporting diagnostics: sup moments, within-step increment moments,
occupation time near discontinuities and the discontinuity crossing
statistic.  Every estimator is a pure function of (problem, parameters,
master seed): per-path work is keyed by absolute path index, so results are
bitwise reproducible for any worker count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .brownian import coarsen_matrix, gaussian_matrix
from .model import SdeProblem
from .schemes import (
    fine_eval_batch,
    simulate_batch,
    transformed_simulate_batch,
)
from .transform import SmoothingTransform, TransformedCoefficients

__all__ = [
    "ErrorRow",
    "ErrorTable",
    "TransformDomainError",
    "DiagEntry",
    "DiagnosticsReport",
    "strong_error",
    "convergence_study",
    "transform_domain_error",
    "moment_sup",
    "overflow_fraction",
    "increment_moment",
    "occupation_time",
    "crossing_statistic",
    "fit_order",
    "run_diagnostics",
]

DEFAULT_CHUNK_SIZE = 256
# sub-grid refinement used for within-step suprema and crossing detection
SUBGRID_FACTOR = 8
SUBGRID_LEVELS = 3


@dataclass
class ErrorRow:
    delta: float
    error_l2sup: float
    std_error: float
    n_paths: int


@dataclass
class ErrorTable:
    """Per-level strong errors with a fitted log-log convergence order."""

    rows: list[ErrorRow]
    fitted_slope: float
    fitted_intercept: float
    r_squared: float
    overflow_paths: int = 0


@dataclass
class TransformDomainError:
    """The two coupling error terms measured in the transformed domain."""

    z_error: float
    z_std_error: float
    gx_discrepancy: float
    gx_std_error: float


def _chunk_ranges(n: int, chunk_size: int):
    return [(lo, min(lo + chunk_size, n)) for lo in range(0, n, chunk_size)]


def _map_chunks(fn, n_paths: int, chunk_size: int, n_threads: int):
    """Run fn(lo, hi) over path chunks; results returned in chunk order."""
    ranges = _chunk_ranges(n_paths, chunk_size)
    if n_threads <= 1 or len(ranges) <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(lambda r: fn(r[0], r[1]), ranges))


def _mean_and_se(y: np.ndarray) -> tuple[float, float]:
    # flagged-overflow runs can carry inf entries; their statistics are
    # reported as-is (the caller surfaces the flag)
    with np.errstate(over="ignore", invalid="ignore"):
        m = float(np.mean(y))
        if len(y) < 2:
            return m, 0.0
        return m, float(math.sqrt(np.var(y, ddof=1) / len(y)))


def _l2_and_se(sq: np.ndarray) -> tuple[float, float]:
    """sqrt of a mean of squares with its delta-method standard error."""
    m, se_m = _mean_and_se(sq)
    est = math.sqrt(m)
    if est == 0.0:
        return 0.0, 0.0
    return est, se_m / (2.0 * est)


def _validate_common(n_paths: int, master_seed: int):
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if not 0 <= int(master_seed) < 2**64:
        raise ValueError("master_seed must fit in an unsigned 64-bit integer")


def _floor_values(coarse_values: np.ndarray, factor: int) -> np.ndarray:
    """Coarse grid values held constant over the fine grid (value at the floor)."""
    if factor == 1:
        return coarse_values
    return np.concatenate(
        [np.repeat(coarse_values[:, :-1], factor, axis=1), coarse_values[:, -1:]], axis=1
    )


def _coupled_sup_errors(
    problem: SdeProblem,
    levels: list[int],
    ref_level: int,
    n_paths: int,
    master_seed: int,
    chunk_size: int,
    n_threads: int,
):
    """Per-path squared sup distances between the reference path and the
    coarse grid data, per level.

    The reference is the tamed scheme at ref_level; the coarse value at time
    t is its value at the last coarse grid point below t.  Every level reuses
    the same finest Brownian increments (common random numbers).
    """
    T = problem.horizon
    n_ref = 1 << ref_level
    delta_ref = T / n_ref

    def worker(lo, hi):
        dwf = gaussian_matrix(master_seed, range(lo, hi), n_ref, T)
        ref_vals, ref_flags = simulate_batch(problem, dwf, delta_ref, tamed=True)
        d2 = np.empty((len(levels), hi - lo))
        oflow = ref_flags.copy()
        # overflowed (clamped) paths can push the squared sup past the float
        # range; the run is flagged, the statistics stay as computed
        with np.errstate(over="ignore"):
            for i, lvl in enumerate(levels):
                factor = 1 << (ref_level - lvl)
                delta_c = T / (1 << lvl)
                cdw = coarsen_matrix(dwf, factor)
                cvals, cflags = simulate_batch(problem, cdw, delta_c, tamed=True)
                sup = np.max(np.abs(ref_vals - _floor_values(cvals, factor)), axis=1)
                d2[i] = sup * sup
                oflow |= cflags
        return d2, int(oflow.sum())

    parts = _map_chunks(worker, n_paths, chunk_size, n_threads)
    d2 = np.concatenate([p[0] for p in parts], axis=1)
    return d2, sum(p[1] for p in parts)


def strong_error(
    problem: SdeProblem,
    coarse_level: int,
    ref_level: int,
    n_paths: int,
    master_seed: int,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_threads: int = 1,
) -> tuple[float, float]:
    """L2 norm of the pathwise sup distance between coarse and reference runs.

    Returns (estimate, delta-method standard error).  coarse_level equal to
    ref_level compares the scheme with itself and returns exactly zero; for a
    meaningful error estimate keep the reference at least 8x finer.
    """
    _validate_common(n_paths, master_seed)
    if ref_level < coarse_level:
        raise ValueError("ref_level must be >= coarse_level")
    d2, _ = _coupled_sup_errors(
        problem, [coarse_level], ref_level, n_paths, master_seed, chunk_size, n_threads
    )
    return _l2_and_se(d2[0])


def convergence_study(
    problem: SdeProblem,
    levels: list[int],
    ref_level: int,
    n_paths: int,
    master_seed: int,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_threads: int = 1,
) -> ErrorTable:
    """Strong errors across levels with a fitted log2-log2 slope.

    All levels are coupled to the same reference paths (common random
    numbers), so level-to-level comparisons share their noise.
    """
    _validate_common(n_paths, master_seed)
    levels = [int(v) for v in levels]
    if len(levels) < 3:
        raise ValueError("need at least 3 levels to fit a convergence order")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    if max(levels) >= ref_level - 2:
        raise ValueError("ref_level must exceed the finest level by at least 3")
    d2, overflow = _coupled_sup_errors(
        problem, levels, ref_level, n_paths, master_seed, chunk_size, n_threads
    )
    rows = []
    T = problem.horizon
    for i, lvl in enumerate(levels):
        est, se = _l2_and_se(d2[i])
        rows.append(ErrorRow(T / (1 << lvl), est, se, n_paths))
    slope, intercept, r2 = fit_order(rows)
    return ErrorTable(rows, slope, intercept, r2, overflow)


def transform_domain_error(
    problem: SdeProblem,
    transform: SmoothingTransform,
    coarse_level: int,
    ref_level: int,
    n_paths: int,
    master_seed: int,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_threads: int = 1,
) -> TransformDomainError:
    """The two error terms of the transformed-process decomposition.

    z_error couples the coarse transformed scheme to a fine transformed
    reference; gx_discrepancy measures, on the coarse grid, the gap between
    the transformed scheme and the mapped original scheme (exactly zero for
    the identity transform, which runs the same recursion).
    """
    _validate_common(n_paths, master_seed)
    if ref_level < coarse_level:
        raise ValueError("ref_level must be >= coarse_level")
    T = problem.horizon
    n_ref = 1 << ref_level
    delta_ref = T / n_ref
    factor = 1 << (ref_level - coarse_level)
    delta_c = T / (1 << coarse_level)
    tc = TransformedCoefficients(problem, transform)
    z0 = transform.value(problem.x0)

    def worker(lo, hi):
        dwf = gaussian_matrix(master_seed, range(lo, hi), n_ref, T)
        zref, _ = transformed_simulate_batch(tc, z0, dwf, delta_ref)
        cdw = coarsen_matrix(dwf, factor)
        zc, _ = transformed_simulate_batch(tc, z0, cdw, delta_c)
        xc, _ = simulate_batch(problem, cdw, delta_c, tamed=True)
        z_sup = np.max(np.abs(zref - _floor_values(zc, factor)), axis=1)
        gx_sup = np.max(np.abs(zc - transform.value(xc)), axis=1)
        return z_sup * z_sup, gx_sup * gx_sup

    parts = _map_chunks(worker, n_paths, chunk_size, n_threads)
    z2 = np.concatenate([p[0] for p in parts])
    gx2 = np.concatenate([p[1] for p in parts])
    z_est, z_se = _l2_and_se(z2)
    gx_est, gx_se = _l2_and_se(gx2)
    return TransformDomainError(z_est, z_se, gx_est, gx_se)


def _sup_moment_paths(problem, level, p, n_paths, master_seed, scheme, chunk_size, n_threads):
    T = problem.horizon
    n_steps = 1 << level
    delta = T / n_steps
    tamed = scheme == "tamed"

    def worker(lo, hi):
        dw = gaussian_matrix(master_seed, range(lo, hi), n_steps, T)
        vals, flags = simulate_batch(problem, dw, delta, tamed=tamed)
        sup = np.max(np.abs(vals), axis=1)
        with np.errstate(over="ignore"):
            return sup**p, flags

    parts = _map_chunks(worker, n_paths, chunk_size, n_threads)
    y = np.concatenate([p_[0] for p_ in parts])
    flags = np.concatenate([p_[1] for p_ in parts])
    return y, flags


def moment_sup(
    problem: SdeProblem,
    level: int,
    p: float,
    n_paths: int,
    master_seed: int,
    *,
    scheme: str = "tamed",
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_threads: int = 1,
) -> tuple[float, float]:
    """Monte Carlo estimate of E[ (sup_t |X_t|)^p ] on the scheme's grid."""
    _validate_common(n_paths, master_seed)
    if p < 2:
        raise ValueError("p must be >= 2")
    if scheme not in ("tamed", "untamed"):
        raise ValueError("scheme must be 'tamed' or 'untamed'")
    y, _ = _sup_moment_paths(
        problem, level, p, n_paths, master_seed, scheme, chunk_size, n_threads
    )
    return _mean_and_se(y)


def overflow_fraction(
    problem: SdeProblem,
    level: int,
    n_paths: int,
    master_seed: int,
    *,
    scheme: str = "untamed",
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_threads: int = 1,
) -> float:
    """Fraction of paths whose recursion left [-1e150, 1e150] and was frozen."""
    _validate_common(n_paths, master_seed)
    _, flags = _sup_moment_paths(
        problem, level, 2.0, n_paths, master_seed, scheme, chunk_size, n_threads
    )
    return float(np.mean(flags))


def increment_moment(
    problem: SdeProblem,
    level: int,
    p: float,
    n_paths: int,
    master_seed: int,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_threads: int = 1,
) -> float:
    """max over grid intervals of (E[ sup within-interval |increment| ^p ])^(1/p).

    The within-interval supremum is taken over the time-continuous extension
    on an 8x finer sub-grid sharing the Brownian path.
    """
    _validate_common(n_paths, master_seed)
    if p < 2:
        raise ValueError("p must be >= 2")
    T = problem.horizon
    n_steps = 1 << level
    delta = T / n_steps
    n_fine = n_steps * SUBGRID_FACTOR

    def worker(lo, hi):
        dwf = gaussian_matrix(master_seed, range(lo, hi), n_fine, T)
        cdw = coarsen_matrix(dwf, SUBGRID_FACTOR)
        cvals, _ = simulate_batch(problem, cdw, delta, tamed=True)
        fine = fine_eval_batch(problem, cvals, delta, SUBGRID_FACTOR, dwf)
        base = fine[:, 0 : n_fine : SUBGRID_FACTOR]
        sup = np.zeros_like(base)
        for offset in range(1, SUBGRID_FACTOR + 1):
            shifted = fine[:, offset::SUBGRID_FACTOR][:, :n_steps]
            sup = np.maximum(sup, np.abs(shifted - base))
        return np.sum(sup**p, axis=0)

    parts = _map_chunks(worker, n_paths, chunk_size, n_threads)
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    interval_moments = total / n_paths
    return float(np.max(interval_moments) ** (1.0 / p))


def _occupation_paths(problem, level, zeta, eps, n_paths, master_seed, chunk_size, n_threads):
    T = problem.horizon
    n_steps = 1 << level
    delta = T / n_steps

    def worker(lo, hi):
        dw = gaussian_matrix(master_seed, range(lo, hi), n_steps, T)
        vals, _ = simulate_batch(problem, dw, delta, tamed=True)
        # left-endpoint rule on the scheme's own grid
        inside = np.abs(vals[:, :n_steps] - zeta) <= eps
        return delta * inside.sum(axis=1).astype(np.float64)

    parts = _map_chunks(worker, n_paths, chunk_size, n_threads)
    return np.concatenate(parts)


def occupation_time(
    problem: SdeProblem,
    level: int,
    k: int,
    eps: float,
    n_paths: int,
    master_seed: int,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_threads: int = 1,
) -> float:
    """Expected time the scheme spends within eps of the k-th breakpoint (1-based)."""
    _validate_common(n_paths, master_seed)
    m = problem.drift.n_breakpoints
    if not 1 <= k <= m:
        raise IndexError(f"breakpoint index {k} out of range 1..{m}")
    if not eps > 0:
        raise ValueError("eps must be positive")
    zeta = problem.drift.breakpoints[k - 1]
    occ = _occupation_paths(
        problem, level, zeta, eps, n_paths, master_seed, chunk_size, n_threads
    )
    return float(np.mean(occ))


def _crossing_paths(problem, level, n_paths, master_seed, chunk_size, n_threads):
    T = problem.horizon
    n_steps = 1 << level
    delta = T / n_steps
    n_fine = n_steps * SUBGRID_FACTOR
    delta_f = delta / SUBGRID_FACTOR
    zetas = problem.drift.breakpoints

    def worker(lo, hi):
        dwf = gaussian_matrix(master_seed, range(lo, hi), n_fine, T)
        cdw = coarsen_matrix(dwf, SUBGRID_FACTOR)
        cvals, _ = simulate_batch(problem, cdw, delta, tamed=True)
        fine = fine_eval_batch(problem, cvals, delta, SUBGRID_FACTOR, dwf)
        floors = np.repeat(cvals[:, :n_steps], SUBGRID_FACTOR, axis=1)
        points = fine[:, :n_fine]
        count = np.zeros(floors.shape, dtype=np.int64)
        for zeta in zetas:
            count += (floors - zeta) * (points - zeta) <= 0.0
        return delta_f * count.sum(axis=1).astype(np.float64)

    parts = _map_chunks(worker, n_paths, chunk_size, n_threads)
    return np.concatenate(parts)


def crossing_statistic(
    problem: SdeProblem,
    level: int,
    n_paths: int,
    master_seed: int,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_threads: int = 1,
) -> tuple[float, float]:
    """L2 size of the total time the scheme straddles a drift breakpoint.

    Per path, the time during which the grid value and the time-continuous
    value (on an 8x finer sub-grid) sit on opposite sides of a breakpoint is
    accumulated; the estimate is sqrt(E[.^2]) with its standard error.
    """
    _validate_common(n_paths, master_seed)
    if problem.drift.n_breakpoints == 0:
        raise ValueError("crossing statistic undefined for a drift without breakpoints")
    a = _crossing_paths(problem, level, n_paths, master_seed, chunk_size, n_threads)
    return _l2_and_se(a * a)


def fit_order(rows) -> tuple[float, float, float]:
    """Unweighted least squares of log2(error) against log2(delta).

    Rows with nonpositive errors are excluded with a warning; at least three
    usable rows are required.
    """
    deltas, errors = [], []
    for row in rows:
        delta, err = (row.delta, row.error_l2sup) if isinstance(row, ErrorRow) else row[:2]
        if err <= 0.0:
            warnings.warn(
                f"excluding level delta={delta} with nonpositive error {err} from fit",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        deltas.append(delta)
        errors.append(err)
    if len(deltas) < 3:
        raise ValueError("need at least 3 positive-error rows to fit a slope")
    x = np.log2(np.asarray(deltas))
    y = np.log2(np.asarray(errors))
    xm = x.mean()
    ym = y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    sxy = float(np.sum((x - xm) * (y - ym)))
    slope = sxy / sxx
    intercept = ym - slope * xm
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


@dataclass
class DiagEntry:
    estimate: float
    std_error: float

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "std_error": self.std_error}


@dataclass
class DiagnosticsReport:
    """Bundle of the scheme's moment/occupation/crossing estimates at one level."""

    level: int
    delta: float
    n_paths: int
    moment_sup_p: dict[float, DiagEntry] = field(default_factory=dict)
    increment_p: dict[float, float] = field(default_factory=dict)
    occupation: dict[str, DiagEntry] = field(default_factory=dict)
    crossing_l2: DiagEntry | None = None

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "delta": self.delta,
            "n_paths": self.n_paths,
            "moment_sup_p": {str(p): e.to_dict() for p, e in self.moment_sup_p.items()},
            "increment_p": {str(p): v for p, v in self.increment_p.items()},
            "occupation": {key: e.to_dict() for key, e in self.occupation.items()},
            "crossing_l2": None if self.crossing_l2 is None else self.crossing_l2.to_dict(),
        }


def run_diagnostics(
    problem: SdeProblem,
    level: int,
    p_exponents,
    eps_list,
    n_paths: int,
    master_seed: int,
    *,
    include_crossing: bool = True,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    n_threads: int = 1,
) -> DiagnosticsReport:
    """Run every diagnostic estimator at one level and collect the results."""
    _validate_common(n_paths, master_seed)
    T = problem.horizon
    report = DiagnosticsReport(level=level, delta=T / (1 << level), n_paths=n_paths)
    kw = dict(chunk_size=chunk_size, n_threads=n_threads)
    for p in p_exponents:
        y, _ = _sup_moment_paths(
            problem, level, p, n_paths, master_seed, "tamed", chunk_size, n_threads
        )
        report.moment_sup_p[p] = DiagEntry(*_mean_and_se(y))
        report.increment_p[p] = increment_moment(
            problem, level, p, n_paths, master_seed, **kw
        )
    for k in range(1, problem.drift.n_breakpoints + 1):
        zeta = problem.drift.breakpoints[k - 1]
        for eps in eps_list:
            occ = _occupation_paths(
                problem, level, zeta, eps, n_paths, master_seed, chunk_size, n_threads
            )
            report.occupation[f"k={k},eps={eps:g}"] = DiagEntry(*_mean_and_se(occ))
    if include_crossing:
        a = _crossing_paths(problem, level, n_paths, master_seed, chunk_size, n_threads)
        report.crossing_l2 = DiagEntry(*_l2_and_se(a * a))
    return report
