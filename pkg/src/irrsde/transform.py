"""Bi-Lipschitz change of variable that removes the drift discontinuities.

Around each drift breakpoint b_k the map adds a localized quadratic kink
``alpha_k * (x - b_k)|x - b_k| * bump((x - b_k)/radius)`` whose second
derivative jumps by exactly the amount needed to cancel the drift jump in the
transformed drift.  Outside the bump supports the map is the identity, so the
transformed SDE coincides with the original away from the breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SdeProblem, drift_jump, eval_diffusion, eval_drift

__all__ = [
    "SmoothingTransform",
    "TransformedCoefficients",
    "TransformConstructionError",
    "build_transform",
    "transformed_drift",
    "transformed_diffusion",
    "transform_selfcheck",
    "CheckResult",
    "SelfCheckReport",
]

# Conservative sup-bound for |bump'|; the true max is 96/(25*sqrt(5)) ~ 1.72.
BUMP_DERIV_BOUND = 3.0
SIGMA_DEGENERATE_TOL = 1e-12
INVERT_TOL_SCALE = 1e-13


class TransformConstructionError(ValueError):
    pass


def _bump(u):
    """C^2 bump (1-u^2)^3 on |u|<1, zero outside; value 1 at u=0."""
    a = 1.0 - u * u
    return np.where(np.abs(u) < 1.0, a * a * a, 0.0)


def _bump_d1(u):
    a = 1.0 - u * u
    return np.where(np.abs(u) < 1.0, -6.0 * u * (a * a), 0.0)


def _bump_d2(u):
    a = 1.0 - u * u
    return np.where(np.abs(u) < 1.0, a * (30.0 * u * u - 6.0), 0.0)


@dataclass(frozen=True)
class SmoothingTransform:
    """Strictly increasing map with slope in [1/2, 3/2] and identity tails.

    ``jump_coefficients`` scale the per-breakpoint kinks; ``bump_radius`` is
    the half-width of each kink's support.  ``is_identity`` short-circuits all
    evaluations when there is nothing to smooth.
    """

    breakpoints: tuple[float, ...]
    jump_coefficients: tuple[float, ...]
    bump_radius: float
    is_identity: bool

    def __post_init__(self):
        if len(self.breakpoints) != len(self.jump_coefficients):
            raise ValueError("one jump coefficient per breakpoint required")
        if self.breakpoints and not self.bump_radius > 0:
            raise ValueError("bump radius must be positive")

    @property
    def identity_radius(self) -> float:
        """Radius beyond which the map is exactly the identity (slope 1)."""
        if not self.breakpoints:
            return 0.0
        return max(abs(b) for b in self.breakpoints) + self.bump_radius

    @property
    def inverse_bracket(self) -> float:
        """Half-width of a bracket guaranteed to contain the preimage."""
        if not self.jump_coefficients:
            return 1.0
        return max(abs(a) for a in self.jump_coefficients) * self.bump_radius**2 + 1.0

    def value(self, x):
        """Map value; equals x whenever x is at least one radius from every breakpoint."""
        if self.is_identity:
            return x if np.ndim(x) else np.asarray(x, dtype=float)
        x = np.asarray(x, dtype=float)
        g = x.copy()
        for b, a in zip(self.breakpoints, self.jump_coefficients):
            s = x - b
            u = s / self.bump_radius
            g = g + a * (s * np.abs(s) * _bump(u))
        return float(g) if g.ndim == 0 else g

    def deriv(self, x):
        if self.is_identity:
            return 1.0 if np.ndim(x) == 0 else np.ones_like(np.asarray(x, dtype=float))
        x = np.asarray(x, dtype=float)
        gp = np.ones_like(x)
        for b, a in zip(self.breakpoints, self.jump_coefficients):
            s = x - b
            u = s / self.bump_radius
            term = 2.0 * np.abs(s) * _bump(u) + s * np.abs(s) * _bump_d1(u) / self.bump_radius
            gp = gp + a * term
        return float(gp) if gp.ndim == 0 else gp

    def second_deriv(self, x):
        """Second derivative; at a breakpoint the right-hand limit is returned."""
        if self.is_identity:
            return 0.0 if np.ndim(x) == 0 else np.zeros_like(np.asarray(x, dtype=float))
        x = np.asarray(x, dtype=float)
        gpp = np.zeros_like(x)
        nu = self.bump_radius
        for b, a in zip(self.breakpoints, self.jump_coefficients):
            s = x - b
            u = s / nu
            sgn = np.where(s >= 0.0, 1.0, -1.0)
            term = (
                2.0 * sgn * _bump(u)
                + 4.0 * np.abs(s) * _bump_d1(u) / nu
                + s * np.abs(s) * _bump_d2(u) / (nu * nu)
            )
            gpp = gpp + a * term
        return float(gpp) if gpp.ndim == 0 else gpp

    def inverse(self, y):
        """Preimage with |value(x) - y| <= 1e-13 (1+|y|).

        Exact (returns y) outside the bump supports, which map onto
        themselves; inside, bisection seeds a bracket-guarded Newton
        iteration.  Slope >= 1/2 guarantees convergence.
        """
        scalar = np.ndim(y) == 0
        y = np.atleast_1d(np.asarray(y, dtype=float))
        x = y.copy()
        if not self.is_identity:
            dist = np.min(
                np.abs(y[:, None] - np.asarray(self.breakpoints)[None, :]), axis=1
            )
            active = dist < self.bump_radius
            if active.any():
                x[active] = self._invert_iter(y[active])
        return float(x[0]) if scalar else x

    def _invert_iter(self, y):
        delta = self.inverse_bracket
        lo = y - delta
        hi = y + delta
        tol = INVERT_TOL_SCALE * (1.0 + np.abs(y))
        for _ in range(10):
            mid = 0.5 * (lo + hi)
            g = self.value(mid)
            above = g > y
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        x = 0.5 * (lo + hi)
        live = np.ones_like(y, dtype=bool)
        for _ in range(100):
            g = self.value(x)
            above = g > y
            hi = np.where(live & above, x, hi)
            lo = np.where(live & ~above, x, lo)
            d = g - y
            live = live & (np.abs(d) > tol)
            if not live.any():
                break
            x1 = x - d / self.deriv(x)
            inside = (x1 > lo) & (x1 < hi)
            x1 = np.where(inside, x1, 0.5 * (lo + hi))
            live = live & (x1 != x)
            x = np.where(live, x1, x)
        return x


def build_transform(problem: SdeProblem) -> SmoothingTransform:
    """Construct the smoothing transform for a problem.

    The jump coefficient at breakpoint k is jump_k / (2 sigma(b_k)^2); the
    bump radius is chosen small enough that the supports are disjoint and the
    slope stays in [1/2, 3/2].
    """
    breaks = problem.drift.breakpoints
    m = len(breaks)
    if m == 0:
        return SmoothingTransform((), (), 0.0, True)
    alphas = []
    for k in range(1, m + 1):
        sig = eval_diffusion(problem, breaks[k - 1])
        if abs(sig) <= SIGMA_DEGENERATE_TOL:
            raise TransformConstructionError(
                f"diffusion vanishes at breakpoint {breaks[k - 1]!r}; transform undefined"
            )
        alphas.append(drift_jump(problem, k) / (2.0 * sig * sig))
    max_alpha = max(abs(a) for a in alphas)
    gaps = [b2 - b1 for b1, b2 in zip(breaks, breaks[1:])]
    half_gap = 0.5 * min(gaps) if gaps else math.inf
    nu = min(half_gap, 1.0, 1.0 / (2.0 * max_alpha * 5.0 + 1.0))
    identity = all(a == 0.0 for a in alphas)
    return SmoothingTransform(tuple(breaks), tuple(alphas), nu, identity)


@dataclass(frozen=True)
class TransformedCoefficients:
    """Drift/diffusion of the transformed process Z = value(X).

    drift(z)     = slope(x) mu(x) + 1/2 curvature(x) sigma(x)^2,  x = inverse(z)
    diffusion(z) = slope(x) sigma(x)
    """

    problem: SdeProblem
    transform: SmoothingTransform

    def drift(self, z):
        if self.transform.is_identity:
            return eval_drift(self.problem, z)
        x = self.transform.inverse(z)
        gp = self.transform.deriv(x)
        gpp = self.transform.second_deriv(x)
        mu = eval_drift(self.problem, x)
        sig = eval_diffusion(self.problem, x)
        return gp * mu + 0.5 * gpp * sig * sig

    def diffusion(self, z):
        if self.transform.is_identity:
            return eval_diffusion(self.problem, z)
        x = self.transform.inverse(z)
        return self.transform.deriv(x) * eval_diffusion(self.problem, x)


def transformed_drift(tc: TransformedCoefficients, z):
    return tc.drift(z)


def transformed_diffusion(tc: TransformedCoefficients, z):
    return tc.diffusion(z)


@dataclass
class CheckResult:
    passed: bool
    value: float
    tol: float

    def to_dict(self) -> dict:
        return {"pass": bool(self.passed), "value": self.value, "tol": self.tol}


@dataclass
class SelfCheckReport:
    checks: dict[str, CheckResult]

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def to_dict(self) -> dict:
        return {name: c.to_dict() for name, c in self.checks.items()}


def _one_sided_limit(f, point: float, side: int, hs=(1e-3, 1e-4, 1e-5)) -> float:
    """Two-stage Richardson extrapolation of f(point + side*h) as h -> 0."""
    f1, f2, f3 = (f(point + side * h) for h in hs)
    r = hs[0] / hs[1]
    l1 = (r * f2 - f1) / (r - 1.0)
    l2 = (r * f3 - f2) / (r - 1.0)
    return (r * r * l2 - l1) / (r * r - 1.0)


def transform_selfcheck(
    problem: SdeProblem,
    transform: SmoothingTransform,
    n_grid: int = 10_000,
    n_roundtrip: int = 10_000,
    seed: int = 20_240_501,
) -> SelfCheckReport:
    """Numerically certify the properties the construction promises.

    Checks: unit slope at each breakpoint, exact identity slope outside the
    bumps, slope within [1/2, 3/2], continuity of the transformed drift
    across each breakpoint, and inverse round-trip accuracy.
    """
    checks: dict[str, CheckResult] = {}
    t = transform
    breaks = np.asarray(t.breakpoints, dtype=float)
    m = len(breaks)

    if m == 0:
        err = 0.0
        checks["slope_one_at_breakpoints"] = CheckResult(True, 0.0, 1e-12)
        checks["slope_one_outside_bumps"] = CheckResult(True, 0.0, 0.0)
        checks["slope_within_band"] = CheckResult(True, 1.0, 0.0)
        checks["drift_continuous_at_breakpoints"] = CheckResult(True, 0.0, 1e-6)
    else:
        nu = t.bump_radius
        dev = max(abs(t.deriv(b) - 1.0) for b in breaks)
        checks["slope_one_at_breakpoints"] = CheckResult(dev <= 1e-12, dev, 1e-12)

        samples = []
        for b in breaks:
            samples += [b - nu, b + nu, b - 1.5 * nu, b + 1.5 * nu, b - 10.0, b + 10.0]
        samples += list(np.linspace(breaks[0] - 50.0, breaks[0] - 2.0, 64))
        samples += list(np.linspace(breaks[-1] + 2.0, breaks[-1] + 50.0, 64))
        xs = np.asarray(
            [x for x in samples if np.min(np.abs(x - breaks)) >= nu], dtype=float
        )
        outside_dev = float(np.max(np.abs(t.deriv(xs) - 1.0)))
        checks["slope_one_outside_bumps"] = CheckResult(outside_dev == 0.0, outside_dev, 0.0)

        grid = np.linspace(breaks[0] - 2.0 * nu, breaks[-1] + 2.0 * nu, n_grid)
        slopes = t.deriv(grid)
        lo, hi = float(np.min(slopes)), float(np.max(slopes))
        ok = 0.5 <= lo and hi <= 1.5
        checks["slope_within_band"] = CheckResult(ok, max(abs(lo - 1.0), abs(hi - 1.0)), 0.5)

        tc = TransformedCoefficients(problem, t)
        worst = 0.0
        for b in breaks:
            left = _one_sided_limit(tc.drift, float(b), -1)
            right = _one_sided_limit(tc.drift, float(b), +1)
            worst = max(worst, abs(left - right))
        checks["drift_continuous_at_breakpoints"] = CheckResult(worst <= 1e-6, worst, 1e-6)

    rng = np.random.default_rng(seed)
    if m == 0:
        xs = rng.uniform(-10.0, 10.0, n_roundtrip)
    else:
        half = n_roundtrip // 2
        xs = np.concatenate(
            [
                rng.uniform(-10.0, 10.0, n_roundtrip - half),
                rng.choice(breaks, half) + rng.uniform(-1.0, 1.0, half) * t.bump_radius,
            ]
        )
    err = float(np.max(np.abs(t.inverse(t.value(xs)) - xs))) if len(xs) else 0.0
    checks["inverse_roundtrip"] = CheckResult(err <= 1e-12, err, 1e-12)

    return SelfCheckReport(checks)
