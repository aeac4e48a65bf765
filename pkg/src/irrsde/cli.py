"""Command-line runner: simulate | converge | diagnose | check-transform.

A single JSON config file describes the problem (and optionally run
parameters); flags override config values.  Exit codes: 0 ok, 2 bad config,
3 I/O failure, 4 overflow detected during a study, 5 transform self-check
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, reporting
from .brownian import PathKey, generate_increments
from .model import SdeProblem, problem_from_dict
from .schemes import (
    simulate_tamed_em,
    simulate_transformed_tamed_em,
)
from .transform import (
    TransformConstructionError,
    TransformedCoefficients,
    build_transform,
    transform_selfcheck,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_OVERFLOW = 4
EXIT_SELFCHECK = 5


class ConfigError(ValueError):
    pass


def _parse_levels(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad levels list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irrsde",
        description="Tamed Euler-Maruyama studies for SDEs with discontinuous, "
        "polynomially growing drift",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "write one path trace as CSV"),
        ("converge", "strong-error convergence study across levels"),
        ("diagnose", "moment / increment / occupation / crossing diagnostics"),
        ("check-transform", "build the smoothing transform and self-check it"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON problem/run config")
        cmd.add_argument("--seed", type=int, default=None, help="master seed (u64)")
        cmd.add_argument("--paths", type=int, default=None, help="number of Monte Carlo paths")
        cmd.add_argument("--levels", type=str, default=None, help="comma-separated level exponents")
        cmd.add_argument("--ref-level", type=int, default=None, help="reference level exponent")
        cmd.add_argument("--out", type=str, default=None, help="output file path")
        cmd.add_argument("--format", choices=("csv", "json"), default=None)
        cmd.add_argument("--threads", type=int, default=None,
                         help="worker threads (default: IRRSDE_THREADS or machine parallelism)")
        if name == "simulate":
            cmd.add_argument("--with-transform", action="store_true",
                             help="add transformed-path columns z and g_of_x")
        if name == "converge":
            cmd.add_argument("--selftest", action="store_true",
                             help="fit synthetic exact power-law errors instead of simulating")
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def _resolve(args, config: dict, key: str, flag_value, default):
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _threads(args, config: dict) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("IRRSDE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"IRRSDE_THREADS={env!r} is not an integer") from exc
    if "threads" in config:
        return max(1, int(config["threads"]))
    return os.cpu_count() or 1


def _common_run_params(args, config: dict):
    seed = int(_resolve(args, config, "seed", args.seed, 0))
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    n_paths = int(_resolve(args, config, "n_paths", args.paths, 1000))
    if n_paths < 1:
        raise ConfigError("n_paths must be >= 1")
    chunk_size = int(config.get("chunk_size", analysis.DEFAULT_CHUNK_SIZE))
    if chunk_size < 1:
        raise ConfigError("chunk_size must be >= 1")
    fmt = _resolve(args, config, "format", args.format, "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    return seed, n_paths, chunk_size, fmt


def _problem(config: dict) -> SdeProblem:
    try:
        return problem_from_dict(config)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"bad problem definition: {exc}") from exc


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    problem = _problem(config)
    seed, _, _, _ = _common_run_params(args, config)
    levels = _parse_levels(args.levels) if args.levels else None
    level = int(levels[0]) if levels else int(config.get("level", 8))
    if level < 0:
        raise ConfigError("level must be >= 0")
    out = _resolve(args, config, "out", args.out, "trace.csv")

    increments = generate_increments(PathKey(seed, 0), level, 1, problem.horizon)
    solution = simulate_tamed_em(problem, increments)
    times = solution.times()
    z = g_of_x = None
    if args.with_transform:
        transform = build_transform(problem)
        tc = TransformedCoefficients(problem, transform)
        z0 = transform.value(problem.x0)
        z = simulate_transformed_tamed_em(tc, z0, increments).values
        g_of_x = transform.value(np.asarray(solution.values))
    reporting.write_trace_csv(out, times, solution.values, z, g_of_x)
    print(f"wrote {out} ({solution.n_steps + 1} rows)")
    return EXIT_OK


def _study_params(args, config: dict):
    levels_text = args.levels
    if levels_text is not None:
        levels = _parse_levels(levels_text)
    else:
        levels = [int(v) for v in config.get("levels", [])]
    if not levels:
        raise ConfigError("converge requires a nonempty levels list")
    ref_level = _resolve(args, config, "ref_level", args.ref_level, max(levels) + 3)
    ref_level = int(ref_level)
    if ref_level <= max(levels) + 2:
        raise ConfigError("ref_level must exceed max(levels) + 2")
    return levels, ref_level


def cmd_converge(args) -> int:
    config = _load_config(args.config)
    problem = _problem(config)
    seed, n_paths, chunk_size, fmt = _common_run_params(args, config)
    levels, ref_level = _study_params(args, config)
    out = _resolve(args, config, "out", args.out, "converge.csv" if fmt == "csv" else "converge.json")

    if args.selftest:
        rows = [
            analysis.ErrorRow(problem.horizon / (1 << lvl), (problem.horizon / (1 << lvl)) ** 0.5, 0.0, n_paths)
            for lvl in levels
        ]
        slope, intercept, r2 = analysis.fit_order(rows)
        table = analysis.ErrorTable(rows, slope, intercept, r2, 0)
    else:
        table = analysis.convergence_study(
            problem,
            levels,
            ref_level,
            n_paths,
            seed,
            chunk_size=chunk_size,
            n_threads=_threads(args, config),
        )
    written = reporting.write_error_table(table, out, fmt)
    print(f"wrote {', '.join(written)} (slope={table.fitted_slope:.4f}, R^2={table.r_squared:.4f})")
    if table.overflow_paths:
        print(f"overflow flags on {table.overflow_paths} path runs", file=sys.stderr)
        return EXIT_OVERFLOW
    return EXIT_OK


def cmd_diagnose(args) -> int:
    config = _load_config(args.config)
    problem = _problem(config)
    seed, n_paths, chunk_size, fmt = _common_run_params(args, config)
    if args.levels is not None:
        levels = _parse_levels(args.levels)
    else:
        levels = [int(v) for v in config.get("levels", [config.get("level", 8)])]
    if not levels:
        raise ConfigError("diagnose requires at least one level")
    p_exponents = [float(p) for p in config.get("p_exponents", [2.0, 4.0])]
    eps_list = [float(e) for e in config.get("eps", [0.1, 0.05])]
    crossing_cfg = config.get("crossing")
    m = problem.drift.n_breakpoints
    if crossing_cfg is True and m == 0:
        raise ConfigError("crossing statistic requested but the drift has no breakpoints")
    include_crossing = (m >= 1) if crossing_cfg is None else bool(crossing_cfg)
    out = _resolve(args, config, "out", args.out, "diagnostics.csv" if fmt == "csv" else "diagnostics.json")

    threads = _threads(args, config)
    reports = [
        analysis.run_diagnostics(
            problem,
            level,
            p_exponents,
            eps_list,
            n_paths,
            seed,
            include_crossing=include_crossing,
            chunk_size=chunk_size,
            n_threads=threads,
        )
        for level in levels
    ]
    written = reporting.write_diagnostics(reports, out, fmt)
    print(f"wrote {', '.join(written)}")
    return EXIT_OK


def cmd_check_transform(args) -> int:
    config = _load_config(args.config)
    problem = _problem(config)
    out = _resolve(args, config, "out", args.out, "transform_check.json")
    try:
        transform = build_transform(problem)
    except TransformConstructionError as exc:
        print(f"transform construction failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = transform_selfcheck(problem, transform)
    reporting.write_json(report.to_dict(), out)
    status = "pass" if report.all_pass else "FAIL"
    print(f"wrote {out} (self-check: {status})")
    return EXIT_OK if report.all_pass else EXIT_SELFCHECK


_COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "diagnose": cmd_diagnose,
    "check-transform": cmd_check_transform,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError, IndexError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
