import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irrsde import (
    PiecewisePolynomial,
    SdeProblem,
    compute_growth_exponent,
    drift_jump,
    eval_diffusion,
    eval_drift,
    problem_from_dict,
    problem_to_dict,
    validate_coefficients,
)


def make_problem(drift, diffusion=(1.0,), x0=0.0, T=1.0):
    return SdeProblem(drift, PiecewisePolynomial.single(diffusion), x0, T)


class TestPiecewisePolynomial:
    def test_breakpoints_must_increase(self):
        with pytest.raises(ValueError):
            PiecewisePolynomial((1.0, 1.0), ((0.0,), (0.0,), (0.0,)))

    def test_piece_count_must_match(self):
        with pytest.raises(ValueError):
            PiecewisePolynomial((0.0,), ((1.0,),))

    def test_coefficients_must_be_finite(self):
        with pytest.raises(ValueError):
            PiecewisePolynomial((), ((math.inf,),))

    def test_empty_piece_rejected(self):
        with pytest.raises(ValueError):
            PiecewisePolynomial((), ((),))

    def test_degree_ignores_trailing_zeros(self):
        p = PiecewisePolynomial.single((1.0, 2.0, 0.0, 0.0))
        assert p.degree == 1

    def test_vector_eval_matches_scalar(self):
        p = PiecewisePolynomial((0.0,), ((1.0, 2.0), (3.0, -1.0, 0.5)))
        xs = np.linspace(-2, 2, 41)
        vec = p(xs)
        for x, v in zip(xs, vec):
            assert v == p(float(x))


class TestEvalDrift:
    def test_cubic_no_breakpoints(self):
        prob = make_problem(PiecewisePolynomial.single((0.0, 0.0, 0.0, -1.0)))
        assert eval_drift(prob, 2.0) == -8.0

    def test_right_continuity_convention_at_breakpoint(self):
        prob = make_problem(PiecewisePolynomial((0.0,), ((1.0,), (-1.0,))))
        assert eval_drift(prob, 0.0) == -1.0

    def test_cubic_jump_left_piece(self, cubic_jump_problem):
        # -(-1)^3 - (-1) + 1 = 1 + 1 + 1
        assert eval_drift(cubic_jump_problem, -1.0) == 3.0

    def test_nonfinite_rejected(self, cubic_jump_problem):
        with pytest.raises(ValueError):
            eval_drift(cubic_jump_problem, math.nan)
        with pytest.raises(ValueError):
            eval_drift(cubic_jump_problem, math.inf)


class TestEvalDiffusion:
    def test_constant(self):
        prob = make_problem(PiecewisePolynomial.single((0.0,)), diffusion=(1.0,))
        assert eval_diffusion(prob, 5.0) == 1.0

    def test_affine(self):
        prob = make_problem(PiecewisePolynomial.single((0.0,)), diffusion=(1.0, 0.1))
        assert eval_diffusion(prob, 0.0) == 1.0
        assert eval_diffusion(prob, -3.0) == pytest.approx(0.7, abs=1e-15)

    def test_nonfinite_rejected(self, cubic_jump_problem):
        with pytest.raises(ValueError):
            eval_diffusion(cubic_jump_problem, -math.inf)


class TestDriftJump:
    def test_sign_jump(self):
        prob = make_problem(PiecewisePolynomial((0.0,), ((1.0,), (-1.0,))))
        assert drift_jump(prob, 1) == 2.0

    def test_artificial_breakpoint_has_no_jump(self):
        same = (0.5, -2.0, 0.25)
        prob = make_problem(PiecewisePolynomial((1.0,), (same, same)))
        assert drift_jump(prob, 1) == 0.0

    def test_cubic_jump(self):
        prob = make_problem(
            PiecewisePolynomial((0.0,), ((1.0, 0.0, 0.0, -1.0), (-1.0, 0.0, 0.0, -1.0)))
        )
        assert drift_jump(prob, 1) == 2.0

    def test_out_of_range_index(self, cubic_jump_problem):
        with pytest.raises(IndexError):
            drift_jump(cubic_jump_problem, 0)
        with pytest.raises(IndexError):
            drift_jump(cubic_jump_problem, 2)


class TestGrowthExponent:
    def test_cubic(self, cubic_jump_problem):
        assert cubic_jump_problem.growth_exponent == 2.0

    def test_linear_floors_at_one(self, ou_problem):
        assert ou_problem.growth_exponent == 1.0

    def test_degree_five(self):
        prob = make_problem(PiecewisePolynomial.single((0.0, 0.0, 0.0, 0.0, 0.0, -1.0)))
        assert compute_growth_exponent(prob) == 4.0

    @given(
        coefs=st.lists(
            st.floats(-10, 10).filter(lambda c: abs(c) > 1e-6), min_size=2, max_size=5
        ),
        split=st.floats(-5, 5),
    )
    @settings(max_examples=50, deadline=None)
    def test_invariant_under_artificial_split(self, coefs, split):
        coefs = tuple(coefs)
        whole = make_problem(PiecewisePolynomial.single(coefs))
        split_poly = PiecewisePolynomial((split,), (coefs, coefs))
        assert compute_growth_exponent(whole) == compute_growth_exponent(
            make_problem(split_poly)
        )


class TestModelInvariants:
    def test_right_continuity_probe(self, cubic_jump_problem):
        drift = cubic_jump_problem.drift
        zeta = drift.breakpoints[0]
        right = drift.right_value(1)
        deg = drift.degree
        max_coef = max(abs(c) for piece in drift.pieces for c in piece)
        for h in (1e-8, 1e-10):
            got = eval_drift(cubic_jump_problem, zeta + h)
            assert abs(got - right) <= deg * max_coef * h * 10

    @given(
        left=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=4),
        right=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=4),
        zeta=st.floats(-100, 100),
    )
    @settings(max_examples=100, deadline=None)
    def test_jump_is_exact_difference_of_piece_values(self, left, right, zeta):
        poly = PiecewisePolynomial((zeta,), (tuple(left), tuple(right)))
        prob = make_problem(poly)
        assert drift_jump(prob, 1) == poly.eval_piece(0, zeta) - poly.eval_piece(1, zeta)


class TestValidation:
    def test_cubic_jump_all_clauses_pass(self, cubic_jump_problem):
        report = validate_coefficients(cubic_jump_problem)
        assert report.all_pass
        assert report.clauses["a_sigma_nonzero_at_breaks"].status == "pass"
        assert report.clauses["c_outer_one_sided_lipschitz"].status == "pass"
        assert report.clauses["d_sigma_lipschitz"].status == "pass"
        assert report.linear_growth_bound is not None

    def test_degenerate_sigma_fails_clause_a(self):
        drift = PiecewisePolynomial((0.0,), ((1.0,), (-1.0,)))
        sigma = PiecewisePolynomial.single((0.0, 1.0))  # sigma(0) = 0
        prob = SdeProblem(drift, sigma, 0.5, 1.0)
        report = validate_coefficients(prob)
        assert report.clauses["a_sigma_nonzero_at_breaks"].status == "fail"
        assert not report.all_pass

    def test_exploding_outer_piece_fails_clause_c(self):
        prob = make_problem(PiecewisePolynomial.single((0.0, 0.0, 0.0, 1.0)))
        report = validate_coefficients(prob)
        assert report.clauses["c_outer_one_sided_lipschitz"].status == "fail"

    def test_even_degree_outer_is_unverified(self):
        prob = make_problem(PiecewisePolynomial.single((0.0, 0.0, 1.0)))
        report = validate_coefficients(prob)
        assert report.clauses["c_outer_one_sided_lipschitz"].status == "unverified"
        assert report.all_pass  # unverified does not fail

    def test_quadratic_sigma_reports_bound(self, cubic_jump_problem):
        prob = SdeProblem(
            cubic_jump_problem.drift,
            PiecewisePolynomial.single((1.0, 0.0, 0.01)),
            0.5,
            1.0,
        )
        report = validate_coefficients(prob, sigma_check_range=(-5.0, 5.0))
        clause = report.clauses["d_sigma_lipschitz"]
        assert clause.status == "unverified"
        assert clause.value == pytest.approx(0.1, abs=1e-12)  # max |0.02 x| on [-5, 5]


class TestProblemStructure:
    def test_horizon_must_be_positive(self):
        with pytest.raises(ValueError):
            make_problem(PiecewisePolynomial.single((1.0,)), T=0.0)

    def test_diffusion_breakpoints_rejected(self):
        drift = PiecewisePolynomial.single((1.0,))
        sigma = PiecewisePolynomial((0.0,), ((1.0,), (2.0,)))
        with pytest.raises(ValueError):
            SdeProblem(drift, sigma, 0.0, 1.0)

    def test_json_round_trip(self, cubic_jump_problem):
        doc = problem_to_dict(cubic_jump_problem)
        back = problem_from_dict(doc)
        assert back == cubic_jump_problem

    def test_json_field_names(self, cubic_jump_problem):
        doc = problem_to_dict(cubic_jump_problem)
        assert set(doc) == {"drift", "diffusion", "x0", "T"}
        assert set(doc["drift"]) == {"breakpoints", "pieces"}

    def test_missing_field_rejected(self):
        with pytest.raises(ValueError):
            problem_from_dict({"drift": {"pieces": [[1.0]]}, "x0": 0.0, "T": 1.0})

    def test_diffusion_json_breakpoints_rejected(self):
        with pytest.raises(ValueError):
            problem_from_dict(
                {
                    "drift": {"breakpoints": [], "pieces": [[1.0]]},
                    "diffusion": {"breakpoints": [0.0], "pieces": [[1.0], [1.0]]},
                    "x0": 0.0,
                    "T": 1.0,
                }
            )
