import math

import numpy as np
import pytest

from irrsde import (
    PiecewisePolynomial,
    SdeProblem,
    SmoothingTransform,
    TransformConstructionError,
    TransformedCoefficients,
    build_transform,
    eval_diffusion,
    eval_drift,
    transform_selfcheck,
    transformed_diffusion,
    transformed_drift,
)


@pytest.fixture
def cubic_transform(cubic_jump_problem):
    return build_transform(cubic_jump_problem)


def make_single_bump(alpha=1.0, nu=0.5, zeta=0.0):
    return SmoothingTransform((zeta,), (alpha,), nu, False)


class TestBuild:
    def test_jump_coefficient(self, cubic_jump_problem, cubic_transform):
        # jump 2, sigma(0) = 1 -> alpha = 2 / (2 * 1)
        assert cubic_transform.jump_coefficients == (1.0,)

    def test_identity_for_no_breakpoints(self, ou_problem):
        t = build_transform(ou_problem)
        assert t.is_identity
        assert t.value(3.7) == 3.7

    def test_zero_jump_gives_identity(self):
        same = (0.5, -1.0)
        drift = PiecewisePolynomial((0.0,), (same, same))
        prob = SdeProblem(drift, PiecewisePolynomial.single((1.0,)), 0.0, 1.0)
        t = build_transform(prob)
        assert t.jump_coefficients == (0.0,)
        assert t.is_identity
        assert t.value(0.01) == 0.01

    def test_degenerate_sigma_raises(self):
        drift = PiecewisePolynomial((0.0,), ((1.0,), (-1.0,)))
        sigma = PiecewisePolynomial.single((0.0, 1.0))
        prob = SdeProblem(drift, sigma, 0.5, 1.0)
        with pytest.raises(TransformConstructionError):
            build_transform(prob)

    def test_radius_respects_gap_and_slope_bounds(self):
        drift = PiecewisePolynomial(
            (0.0, 0.3), ((10.0,), (-10.0,), (5.0,))
        )
        prob = SdeProblem(drift, PiecewisePolynomial.single((1.0,)), 0.0, 1.0)
        t = build_transform(prob)
        gap = 0.3
        max_alpha = max(abs(a) for a in t.jump_coefficients)
        assert 2.0 * t.bump_radius <= gap
        assert 5.0 * t.bump_radius * max_alpha < 0.5


class TestValueAndDerivatives:
    def test_value_vanishes_at_breakpoint(self):
        t = make_single_bump()
        assert t.value(0.0) == 0.0

    def test_hand_evaluated_value(self):
        # s = 0.25, u = 0.5: 0.25 + 1 * 0.25 * 0.25 * (1 - 0.25)^3
        t = make_single_bump(alpha=1.0, nu=0.5)
        assert t.value(0.25) == pytest.approx(0.2763671875, abs=1e-15)

    def test_identity_outside_support(self):
        t = make_single_bump(alpha=0.3, nu=0.5)
        for x in (0.5, -0.5, 0.7, -3.0, 100.0):
            assert t.value(x) == x

    def test_slope_is_one_at_breakpoints(self, cubic_transform):
        for b in cubic_transform.breakpoints:
            assert cubic_transform.deriv(b) == 1.0

    def test_slope_is_one_outside_supports(self, cubic_transform):
        nu = cubic_transform.bump_radius
        for x in (nu, -nu, 2 * nu, 5.0, -5.0):
            assert cubic_transform.deriv(x) == 1.0

    def test_slope_matches_finite_difference(self, cubic_transform):
        h = 1e-6
        rng = np.random.default_rng(3)
        xs = rng.uniform(-0.2, 0.2, 200)
        xs = xs[np.abs(xs) >= 1e-3]
        for x in xs:
            fd = (cubic_transform.value(x + h) - cubic_transform.value(x - h)) / (2 * h)
            assert abs(cubic_transform.deriv(x) - fd) <= 1e-6

    def test_second_deriv_zero_far_away(self, cubic_transform):
        assert cubic_transform.second_deriv(5.0) == 0.0

    def test_second_deriv_one_sided_limits(self):
        t = make_single_bump(alpha=0.7, nu=0.5)
        # right limit at the breakpoint is returned directly
        assert t.second_deriv(0.0) == pytest.approx(2 * 0.7, abs=1e-12)
        assert t.second_deriv(1e-9) == pytest.approx(2 * 0.7, rel=1e-6)
        assert t.second_deriv(-1e-9) == pytest.approx(-2 * 0.7, rel=1e-6)

    def test_second_deriv_matches_slope_finite_difference(self, cubic_transform):
        h = 1e-6
        for x in (0.01, 0.03, -0.02, 0.05, -0.07):
            fd = (cubic_transform.deriv(x + h) - cubic_transform.deriv(x - h)) / (2 * h)
            assert abs(cubic_transform.second_deriv(x) - fd) <= 1e-5


class TestInverse:
    def test_identity_transform(self):
        t = SmoothingTransform((), (), 0.0, True)
        assert t.inverse(2.5) == 2.5

    def test_exact_outside_bump_images(self, cubic_transform):
        nu = cubic_transform.bump_radius
        for y in (nu, -nu, 1.0, -2.0):
            assert cubic_transform.inverse(y) == y

    def test_round_trip(self, cubic_transform):
        rng = np.random.default_rng(11)
        xs = rng.uniform(-10, 10, 10_000)
        err = np.abs(cubic_transform.inverse(cubic_transform.value(xs)) - xs)
        assert float(err.max()) <= 1e-12

    def test_round_trip_inside_bumps(self):
        t = make_single_bump(alpha=0.9, nu=0.5)
        rng = np.random.default_rng(12)
        xs = rng.uniform(-0.5, 0.5, 10_000)
        err = np.abs(t.inverse(t.value(xs)) - xs)
        assert float(err.max()) <= 1e-12


class TestMonotonicity:
    def test_increasing_and_bilipschitz(self, cubic_transform):
        rng = np.random.default_rng(5)
        a = rng.uniform(-20, 20, 100_000)
        b = rng.uniform(-20, 20, 100_000)
        x = np.minimum(a, b)
        y = np.maximum(a, b)
        keep = y - x > 1e-12
        x, y = x[keep], y[keep]
        ratios = (cubic_transform.value(y) - cubic_transform.value(x)) / (y - x)
        assert float(ratios.min()) > 0.0
        assert float(ratios.min()) >= 0.5 - 1e-9
        assert float(ratios.max()) <= 1.5 + 1e-9


class TestTransformedCoefficients:
    def test_identity_drift_passthrough(self, cubic_problem):
        t = build_transform(cubic_problem)
        tc = TransformedCoefficients(cubic_problem, t)
        assert transformed_drift(tc, 2.0) == -8.0

    def test_far_region_matches_original(self, cubic_jump_problem, cubic_transform):
        tc = TransformedCoefficients(cubic_jump_problem, cubic_transform)
        for z in (1.0, -2.0, 5.0):
            assert transformed_drift(tc, z) == pytest.approx(
                eval_drift(cubic_jump_problem, z), rel=1e-14
            )
            assert transformed_diffusion(tc, z) == pytest.approx(
                eval_diffusion(cubic_jump_problem, z), rel=1e-14
            )

    def test_jump_cancellation(self, cubic_jump_problem, cubic_transform):
        # one-sided limits of the transformed drift agree at the breakpoint
        tc = TransformedCoefficients(cubic_jump_problem, cubic_transform)
        limits = {}
        for side in (-1, 1):
            vals = [tc.drift(side * h) for h in (1e-3, 1e-4, 1e-5)]
            r = 10.0
            l1 = (r * vals[1] - vals[0]) / (r - 1)
            l2 = (r * vals[2] - vals[1]) / (r - 1)
            limits[side] = (r * r * l2 - l1) / (r * r - 1)
        assert abs(limits[1] - limits[-1]) <= 1e-6

    def test_diffusion_nonzero_at_breakpoint(self, cubic_jump_problem, cubic_transform):
        tc = TransformedCoefficients(cubic_jump_problem, cubic_transform)
        zeta = cubic_transform.breakpoints[0]
        # slope 1 at the breakpoint means the diffusion passes through
        assert transformed_diffusion(tc, zeta) == pytest.approx(
            eval_diffusion(cubic_jump_problem, zeta), abs=1e-12
        )
        assert transformed_diffusion(tc, zeta) != 0.0

    def test_transformed_diffusion_lipschitz_on_grid(
        self, cubic_jump_problem, cubic_transform
    ):
        tc = TransformedCoefficients(cubic_jump_problem, cubic_transform)
        nu = cubic_transform.bump_radius
        z = np.linspace(-2 * nu, 2 * nu, 4001)
        vals = tc.diffusion(z)
        emp = float(np.max(np.abs(np.diff(vals) / np.diff(z))))
        # sigma = 1 so L_sigma = 0; the curvature bound controls everything
        alpha = abs(cubic_transform.jump_coefficients[0])
        second_bound = alpha * (2.0 + 4.0 * 3.0 + 6.0)  # coarse sup bound for |curvature|
        assert emp <= 1.5 * 0.0 + 2.0 * second_bound
        assert math.isfinite(emp)


class TestSelfCheck:
    def test_cubic_jump_passes(self, cubic_jump_problem, cubic_transform):
        report = transform_selfcheck(cubic_jump_problem, cubic_transform)
        assert report.all_pass, report.to_dict()

    def test_identity_trivially_passes(self, ou_problem):
        report = transform_selfcheck(ou_problem, build_transform(ou_problem))
        assert report.all_pass

    def test_corrupted_jump_coefficient_fails_continuity(self, cubic_jump_problem):
        good = build_transform(cubic_jump_problem)
        bad = SmoothingTransform(
            good.breakpoints,
            tuple(0.5 * a for a in good.jump_coefficients),
            good.bump_radius,
            False,
        )
        report = transform_selfcheck(cubic_jump_problem, bad)
        assert not report.checks["drift_continuous_at_breakpoints"].passed
        assert not report.all_pass

    def test_report_serialization_shape(self, cubic_jump_problem, cubic_transform):
        doc = transform_selfcheck(cubic_jump_problem, cubic_transform).to_dict()
        for name, entry in doc.items():
            assert set(entry) == {"pass", "value", "tol"}, name
