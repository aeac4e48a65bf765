import pytest

from irrsde import PiecewisePolynomial, SdeProblem


@pytest.fixture
def cubic_jump_problem() -> SdeProblem:
    """mu = -x^3 - x + 1 for x < 0, -x^3 - x - 1 for x >= 0; sigma = 1."""
    drift = PiecewisePolynomial(
        (0.0,), ((1.0, -1.0, 0.0, -1.0), (-1.0, -1.0, 0.0, -1.0))
    )
    return SdeProblem(drift, PiecewisePolynomial.single((1.0,)), x0=0.5, horizon=1.0)


@pytest.fixture
def ou_problem() -> SdeProblem:
    """mu = -x, sigma = 1 (Lipschitz sanity case)."""
    return SdeProblem(
        PiecewisePolynomial.single((0.0, -1.0)),
        PiecewisePolynomial.single((1.0,)),
        x0=1.0,
        horizon=1.0,
    )


@pytest.fixture
def cubic_problem() -> SdeProblem:
    """mu = -x^3, sigma = 0 (deterministic taming oracle)."""
    return SdeProblem(
        PiecewisePolynomial.single((0.0, 0.0, 0.0, -1.0)),
        PiecewisePolynomial.single((0.0,)),
        x0=1.0,
        horizon=1.0,
    )
