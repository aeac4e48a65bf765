"""Bitwise equivalence of the compiled kernel extension and the numpy fallback."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irrsde import PiecewisePolynomial, SdeProblem, build_transform
from irrsde import _kernels_py
from irrsde.schemes import _tables, _transform_params

compiled = pytest.importorskip("irrsde._kernels")


def tables_for(drift, diffusion):
    prob = SdeProblem(drift, diffusion, 0.0, 1.0)
    return _tables(prob)


def normal_matrix(seed, n, steps, scale):
    return np.random.default_rng(seed).normal(0.0, scale, (n, steps))


@pytest.fixture
def cubic_tables(cubic_jump_problem):
    return _tables(cubic_jump_problem)


def test_simulate_bitwise(cubic_tables):
    breaks, dcoefs, scoefs = cubic_tables
    dw = normal_matrix(0, 32, 256, 1.0 / 16)
    for tamed in (True, False):
        vc, fc = compiled.simulate_em_batch(breaks, dcoefs, scoefs, 0.5, 1 / 256, dw, tamed)
        vp, fp = _kernels_py.simulate_em_batch(breaks, dcoefs, scoefs, 0.5, 1 / 256, dw, tamed)
        assert np.array_equal(vc, vp)
        assert np.array_equal(fc, fp)


def test_overflow_paths_bitwise():
    # strong noise around a cubic drift overflows the untamed recursion
    breaks, dcoefs, scoefs = tables_for(
        PiecewisePolynomial.single((0.0, 0.0, 0.0, -1.0)),
        PiecewisePolynomial.single((1.0,)),
    )
    dw = normal_matrix(1, 16, 64, 0.5)
    vc, fc = compiled.simulate_em_batch(breaks, dcoefs, scoefs, 5.0, 1 / 8, dw, False)
    vp, fp = _kernels_py.simulate_em_batch(breaks, dcoefs, scoefs, 5.0, 1 / 8, dw, False)
    assert fc.any()  # the scenario actually overflows
    assert np.array_equal(vc, vp)
    assert np.array_equal(fc, fp)
    assert np.all(np.isfinite(vc))


def test_fine_eval_bitwise(cubic_tables):
    breaks, dcoefs, scoefs = cubic_tables
    dw = normal_matrix(2, 16, 512, 1.0 / 32)
    cdw = dw[:, 0::2] + dw[:, 1::2]
    cdw = cdw[:, 0::2] + cdw[:, 1::2]
    cdw = cdw[:, 0::2] + cdw[:, 1::2]
    cv, _ = compiled.simulate_em_batch(breaks, dcoefs, scoefs, 0.5, 1 / 64, cdw, True)
    fc = compiled.fine_eval_batch(cv, breaks, dcoefs, scoefs, 1 / 64, 8, dw)
    fp = _kernels_py.fine_eval_batch(cv, breaks, dcoefs, scoefs, 1 / 64, 8, dw)
    assert np.array_equal(fc, fp)


def test_transformed_bitwise(cubic_jump_problem, cubic_tables):
    breaks, dcoefs, scoefs = cubic_tables
    t = build_transform(cubic_jump_problem)
    zetas, alphas, nu, bracket = _transform_params(t)
    dw = normal_matrix(3, 32, 256, 1.0 / 16)
    z0 = t.value(0.5)
    vc, fc = compiled.transformed_em_batch(
        zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z0, 1 / 256, dw
    )
    vp, fp = _kernels_py.transformed_em_batch(
        zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z0, 1 / 256, dw
    )
    assert np.array_equal(vc, vp)
    assert np.array_equal(fc, fp)


def test_transformed_matches_reference_implementation(cubic_jump_problem):
    # kernel transformed coefficients agree with the transform module's
    from irrsde.transform import TransformedCoefficients

    t = build_transform(cubic_jump_problem)
    tc = TransformedCoefficients(cubic_jump_problem, t)
    breaks, dcoefs, scoefs = _tables(cubic_jump_problem)
    zetas, alphas, nu, bracket = _transform_params(t)
    z = np.linspace(-0.2, 0.2, 401)
    mut, sigt = _kernels_py._transformed_coeffs(
        zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z
    )
    assert np.allclose(mut, tc.drift(z), rtol=1e-12, atol=1e-12)
    assert np.allclose(sigt, tc.diffusion(z), rtol=1e-12, atol=1e-12)


@given(
    coefs=st.lists(st.floats(-3, 3), min_size=1, max_size=4),
    jump=st.floats(-4, 4),
    sig0=st.floats(0.2, 2.0),
    seed=st.integers(0, 2**31),
)
@settings(max_examples=40, deadline=None)
def test_random_problems_bitwise(coefs, jump, sig0, seed):
    left = tuple(coefs)
    right = (left[0] - jump,) + left[1:]
    drift = PiecewisePolynomial((0.0,), (left, right))
    diffusion = PiecewisePolynomial.single((sig0, 0.05))
    prob = SdeProblem(drift, diffusion, 0.1, 1.0)
    breaks, dcoefs, scoefs = _tables(prob)
    dw = normal_matrix(seed, 4, 64, 1.0 / 8)
    for tamed in (True, False):
        vc, fc = compiled.simulate_em_batch(breaks, dcoefs, scoefs, 0.1, 1 / 64, dw, tamed)
        vp, fp = _kernels_py.simulate_em_batch(breaks, dcoefs, scoefs, 0.1, 1 / 64, dw, tamed)
        assert np.array_equal(vc, vp)
        assert np.array_equal(fc, fp)
    t = build_transform(prob)
    if not t.is_identity:
        zetas, alphas, nu, bracket = _transform_params(t)
        z0 = t.value(0.1)
        vc, _ = compiled.transformed_em_batch(
            zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z0, 1 / 64, dw
        )
        vp, _ = _kernels_py.transformed_em_batch(
            zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z0, 1 / 64, dw
        )
        assert np.array_equal(vc, vp)
