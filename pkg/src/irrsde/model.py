"""Problem definition: piecewise-polynomial drift/diffusion and its validation.

The scalar SDE  dX_t = mu(X_t) dt + sigma(X_t) dW_t  is described by exact
piecewise-polynomial coefficients so that one-sided limits, jump sizes and
derivative degrees are all computable exactly rather than sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PiecewisePolynomial",
    "SdeProblem",
    "ValidationReport",
    "ClauseResult",
    "eval_drift",
    "eval_diffusion",
    "drift_jump",
    "compute_growth_exponent",
    "validate_coefficients",
    "problem_from_dict",
    "problem_to_dict",
]


def _check_finite_scalar(x, name: str = "x") -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return x


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Polynomial pieces on the intervals (-inf, b_1), [b_1, b_2), ..., [b_m, inf).

    Coefficients are stored lowest order first; the value at a breakpoint is
    taken from the piece on its right (right-continuity convention).
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        pcs = tuple(tuple(float(c) for c in p) for p in self.pieces)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pcs)
        if any(not math.isfinite(b) for b in bps):
            raise ValueError("breakpoints must be finite")
        if any(b1 >= b2 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(pcs) != len(bps) + 1:
            raise ValueError(
                f"need {len(bps) + 1} pieces for {len(bps)} breakpoints, got {len(pcs)}"
            )
        for p in pcs:
            if len(p) == 0:
                raise ValueError("each piece needs at least one coefficient")
            if any(not math.isfinite(c) for c in p):
                raise ValueError("all coefficients must be finite")

    @classmethod
    def single(cls, coefficients) -> "PiecewisePolynomial":
        """One global polynomial, no breakpoints."""
        return cls((), (tuple(coefficients),))

    @property
    def n_breakpoints(self) -> int:
        return len(self.breakpoints)

    def piece_index(self, x):
        """Index of the piece whose half-open interval contains ``x``."""
        if np.ndim(x) == 0:
            idx = 0
            for b in self.breakpoints:
                if x >= b:
                    idx += 1
                else:
                    break
            return idx
        return np.searchsorted(np.asarray(self.breakpoints), x, side="right")

    def eval_piece(self, index: int, x):
        """Evaluate piece ``index`` at ``x`` regardless of which interval ``x`` is in.

        Used for one-sided limits at breakpoints.
        """
        coefs = self.pieces[index]
        r = np.multiply(coefs[-1], np.ones_like(np.asarray(x, dtype=float)))
        for c in coefs[-2::-1]:
            r = r * x + c
        if np.ndim(x) == 0:
            return float(r)
        return r

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self.eval_piece(self.piece_index(x), x)
        x = np.asarray(x, dtype=float)
        idx = self.piece_index(x)
        out = np.empty_like(x)
        for j in range(len(self.pieces)):
            m = idx == j
            if m.any():
                out[m] = self.eval_piece(j, x[m])
        return out

    def piece_degree(self, index: int) -> int:
        """Degree of a piece, ignoring trailing zero coefficients."""
        coefs = self.pieces[index]
        for d in range(len(coefs) - 1, -1, -1):
            if coefs[d] != 0.0:
                return d
        return 0

    @property
    def degree(self) -> int:
        return max(self.piece_degree(j) for j in range(len(self.pieces)))

    def derivative(self) -> "PiecewisePolynomial":
        pieces = []
        for coefs in self.pieces:
            if len(coefs) == 1:
                pieces.append((0.0,))
            else:
                pieces.append(tuple(i * c for i, c in enumerate(coefs) if i > 0))
        return PiecewisePolynomial(self.breakpoints, tuple(pieces))

    def left_limit(self, k: int) -> float:
        """Limit from the left at breakpoint ``k`` (1-based)."""
        if not 1 <= k <= len(self.breakpoints):
            raise IndexError(f"breakpoint index {k} out of range 1..{len(self.breakpoints)}")
        return self.eval_piece(k - 1, self.breakpoints[k - 1])

    def right_value(self, k: int) -> float:
        """Value at breakpoint ``k`` (1-based), i.e. the right piece's value."""
        if not 1 <= k <= len(self.breakpoints):
            raise IndexError(f"breakpoint index {k} out of range 1..{len(self.breakpoints)}")
        return self.eval_piece(k, self.breakpoints[k - 1])


def _poly_abs_max(coefs, lo: float, hi: float) -> float:
    """Exact max of |p(x)| over [lo, hi] via the critical points of p."""
    if hi < lo:
        return 0.0
    candidates = [lo, hi]
    trimmed = list(coefs)
    while len(trimmed) > 1 and trimmed[-1] == 0.0:
        trimmed.pop()
    if len(trimmed) > 2:
        deriv = [i * c for i, c in enumerate(trimmed)][1:]
        roots = np.roots(deriv[::-1])
        for r in roots:
            if abs(r.imag) < 1e-12 and lo <= r.real <= hi:
                candidates.append(float(r.real))
    poly = PiecewisePolynomial.single(coefs)
    return max(abs(poly(c)) for c in candidates)


def piecewise_abs_max(pp: PiecewisePolynomial, lo: float, hi: float) -> float:
    """Max of |pp| over [lo, hi], taking one-sided limits at interior breakpoints."""
    bounds = [lo] + [b for b in pp.breakpoints if lo < b < hi] + [hi]
    best = 0.0
    for j, (a, b) in enumerate(zip(bounds, bounds[1:])):
        idx = pp.piece_index(0.5 * (a + b)) if b > a else pp.piece_index(a)
        best = max(best, _poly_abs_max(pp.pieces[idx], a, b))
    if lo == hi:
        # closure of both adjacent pieces at a single point
        idx = pp.piece_index(lo)
        best = max(best, abs(pp.eval_piece(idx, lo)))
        if idx > 0 and lo in pp.breakpoints:
            best = max(best, abs(pp.eval_piece(idx - 1, lo)))
    else:
        # left limits at the interior breakpoints and at hi
        for k in range(1, pp.n_breakpoints + 1):
            b = pp.breakpoints[k - 1]
            if lo < b <= hi:
                best = max(best, abs(pp.left_limit(k)))
    return best


@dataclass(frozen=True)
class SdeProblem:
    """Scalar SDE with piecewise-polynomial drift and globally smooth diffusion.

    The diffusion must be a single polynomial piece; the drift may jump at
    finitely many breakpoints.  ``growth_exponent`` is derived from the drift
    degree and feeds the diagnostics' moment exponents.
    """

    drift: PiecewisePolynomial
    diffusion: PiecewisePolynomial
    x0: float
    horizon: float
    growth_exponent: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "x0", _check_finite_scalar(self.x0, "x0"))
        object.__setattr__(self, "horizon", float(self.horizon))
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be a positive finite real, got {self.horizon}")
        if self.diffusion.n_breakpoints != 0:
            raise ValueError("diffusion must be a single smooth polynomial (no breakpoints)")
        object.__setattr__(self, "growth_exponent", compute_growth_exponent(self))

    @property
    def n_discontinuities(self) -> int:
        return self.drift.n_breakpoints


def eval_drift(problem: SdeProblem, x):
    """Drift value mu(x); right-continuous at breakpoints."""
    if np.ndim(x) == 0:
        return problem.drift(_check_finite_scalar(x))
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("x must be finite")
    return problem.drift(x)


def eval_diffusion(problem: SdeProblem, x):
    """Diffusion value sigma(x)."""
    if np.ndim(x) == 0:
        return problem.diffusion(_check_finite_scalar(x))
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("x must be finite")
    return problem.diffusion(x)


def drift_jump(problem: SdeProblem, k: int) -> float:
    """Jump mu(b_k-) - mu(b_k+) at the k-th drift breakpoint (1-based).

    Exact because both adjacent pieces are evaluated at the breakpoint.
    """
    return problem.drift.left_limit(k) - problem.drift.right_value(k)


def compute_growth_exponent(problem: SdeProblem) -> float:
    """Growth exponent of the drift derivative: max(1, deg(mu) - 1)."""
    return float(max(1, problem.drift.degree - 1))


SIGMA_AT_BREAK_TOL = 1e-12


@dataclass
class ClauseResult:
    status: str  # "pass" | "fail" | "unverified"
    value: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status, "value": self.value, "detail": self.detail}


@dataclass
class ValidationReport:
    """Per-clause outcome of the structural assumptions on the coefficients."""

    clauses: dict[str, ClauseResult]
    linear_growth_bound: float | None = None

    @property
    def all_pass(self) -> bool:
        return all(c.status != "fail" for c in self.clauses.values())

    def to_dict(self) -> dict:
        return {
            "clauses": {k: v.to_dict() for k, v in self.clauses.items()},
            "linear_growth_bound": self.linear_growth_bound,
            "all_pass": self.all_pass,
        }


def _outer_piece_status(coefs, side: str) -> ClauseResult:
    # Syntactic sufficient check for the one-sided Lipschitz property on an
    # unbounded interval.  Certifies pass for degree <= 1 and for odd degree
    # with negative leading coefficient; certifies fail for odd degree with
    # positive leading coefficient; everything else is left unverified.
    trimmed = list(coefs)
    while len(trimmed) > 1 and trimmed[-1] == 0.0:
        trimmed.pop()
    deg = len(trimmed) - 1
    lead = trimmed[-1]
    if deg <= 1:
        return ClauseResult("pass", float(deg), f"{side} piece has degree <= 1")
    if deg % 2 == 1:
        if lead < 0:
            return ClauseResult("pass", lead, f"{side} piece: odd degree, negative leading coefficient")
        return ClauseResult("fail", lead, f"{side} piece: odd degree, positive leading coefficient")
    return ClauseResult("unverified", lead, f"{side} piece: even degree >= 2, not certified")


def validate_coefficients(
    problem: SdeProblem, sigma_check_range: tuple[float, float] = (-10.0, 10.0)
) -> ValidationReport:
    """Check the structural conditions the convergence theory needs.

    (a) nondegenerate diffusion at every drift breakpoint,
    (b) piecewise Lipschitz between the outermost breakpoints (always true for
        polynomials on a compact interval; the derivative bound is reported),
    (c) one-sided Lipschitz drift on the outer intervals (syntactic check),
    (d) Lipschitz diffusion with Lipschitz derivative.

    Nothing raises; the outcome is a report.
    """
    drift = problem.drift
    m = drift.n_breakpoints
    clauses: dict[str, ClauseResult] = {}

    # (a) sigma nonzero at the discontinuities
    if m == 0:
        clauses["a_sigma_nonzero_at_breaks"] = ClauseResult("pass", None, "no breakpoints")
    else:
        vals = [problem.diffusion(b) for b in drift.breakpoints]
        worst = min(abs(v) for v in vals)
        status = "pass" if worst > SIGMA_AT_BREAK_TOL else "fail"
        clauses["a_sigma_nonzero_at_breaks"] = ClauseResult(
            status, worst, f"min |sigma(breakpoint)| = {worst:.3e}"
        )

    # (b) piecewise Lipschitz on the breakpoint hull, with derivative bound
    growth_bound = None
    if m == 0:
        clauses["b_piecewise_lipschitz"] = ClauseResult("pass", None, "no breakpoints")
    else:
        lo, hi = drift.breakpoints[0], drift.breakpoints[-1]
        dbound = piecewise_abs_max(drift.derivative(), lo, hi)
        clauses["b_piecewise_lipschitz"] = ClauseResult(
            "pass", dbound, f"max |drift'| on [{lo:g}, {hi:g}]"
        )
        # upper bound for the linear-growth constant on the hull:
        # |mu(x)| <= max|mu| <= max|mu| * (1 + |x|)
        growth_bound = piecewise_abs_max(drift, lo, hi)

    # (c) one-sided Lipschitz on the outer intervals
    left = _outer_piece_status(drift.pieces[0], "left")
    right = _outer_piece_status(drift.pieces[-1], "right")
    order = {"fail": 0, "unverified": 1, "pass": 2}
    worst_side = left if order[left.status] <= order[right.status] else right
    clauses["c_outer_one_sided_lipschitz"] = ClauseResult(
        worst_side.status, worst_side.value, f"{left.detail}; {right.detail}"
    )

    # (d) sigma Lipschitz with Lipschitz derivative
    sig_deg = problem.diffusion.degree
    if sig_deg <= 1:
        clauses["d_sigma_lipschitz"] = ClauseResult("pass", float(sig_deg), "sigma degree <= 1")
    else:
        lo, hi = sigma_check_range
        bound = _poly_abs_max(problem.diffusion.derivative().pieces[0], lo, hi)
        clauses["d_sigma_lipschitz"] = ClauseResult(
            "unverified", bound, f"max |sigma'| on [{lo:g}, {hi:g}] (global Lipschitz not certified)"
        )

    return ValidationReport(clauses=clauses, linear_growth_bound=growth_bound)


def problem_from_dict(doc: dict) -> SdeProblem:
    """Build a problem from its JSON document form.

    Expected shape::

        {"drift": {"breakpoints": [...], "pieces": [[c0, c1, ...], ...]},
         "diffusion": {"pieces": [[c0, c1, ...]]},
         "x0": r, "T": r}
    """
    try:
        drift_doc = doc["drift"]
        diff_doc = doc["diffusion"]
        x0 = doc["x0"]
        horizon = doc["T"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"problem document missing field: {exc}") from exc
    drift = PiecewisePolynomial(
        tuple(drift_doc.get("breakpoints", ())),
        tuple(tuple(p) for p in drift_doc["pieces"]),
    )
    diff_breaks = tuple(diff_doc.get("breakpoints", ()))
    if diff_breaks:
        raise ValueError("diffusion must not have breakpoints")
    diff_pieces = tuple(tuple(p) for p in diff_doc["pieces"])
    if len(diff_pieces) != 1:
        raise ValueError("diffusion must consist of exactly one piece")
    diffusion = PiecewisePolynomial((), diff_pieces)
    return SdeProblem(drift=drift, diffusion=diffusion, x0=x0, horizon=horizon)


def problem_to_dict(problem: SdeProblem) -> dict:
    return {
        "drift": {
            "breakpoints": list(problem.drift.breakpoints),
            "pieces": [list(p) for p in problem.drift.pieces],
        },
        "diffusion": {"pieces": [list(p) for p in problem.diffusion.pieces]},
        "x0": problem.x0,
        "T": problem.horizon,
    }
