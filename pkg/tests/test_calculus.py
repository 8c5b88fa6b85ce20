import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fgplab.calculus import (
    PortfolioMap,
    constant_portfolio,
    counterexample_portfolio,
    curvature_gap,
    drift_form,
    excess_growth_form,
    generated_portfolio,
    line_integral,
    loop_defect,
    market_portfolio,
    reconstruct_log_phi,
    two_stock_drift_condition,
    two_stock_q,
    weight_ratio_curvature,
)
from fgplab.exceptions import NotAGradientError
from fgplab.generators import Affine, DiversityPower, GeometricMean, MinOfAffines
from fgplab.simplex import fisher_inner

TRIANGLE = np.array([(0.5, 0.3, 0.2), (0.3, 0.5, 0.2), (0.3, 0.3, 0.4), (0.5, 0.3, 0.2)])
# exact value: the field is linear in mu, so the loop integral is quadratic in the vertices
TRIANGLE_DEFECT_LAMBDA_01 = 0.002

points3 = arrays(float, 3, elements=st.floats(0.05, 1.0)).map(lambda x: x / x.sum())


def test_market_excess_growth_form_is_fisher_metric():
    p = np.array([0.2, 0.3, 0.5])
    v = np.array([0.1, 0.2, -0.3])
    assert excess_growth_form(p, p, v) == pytest.approx(fisher_inner(p, v, v))


def test_drift_form_geometric_mean_equals_excess_growth():
    phi = GeometricMean([0.2, 0.3, 0.5])
    p = np.array([0.3, 0.3, 0.4])
    v = np.array([0.1, -0.3, 0.2])
    assert drift_form(phi, p, v) == pytest.approx(excess_growth_form(phi.weights, p, v), rel=1e-6)


def test_drift_form_affine_is_zero():
    assert drift_form(Affine([1.0, 2.0, 3.0]), [0.3, 0.3, 0.4], [0.1, -0.3, 0.2]) == pytest.approx(0.0, abs=1e-7)


def test_drift_form_shrinks_step_near_boundary():
    phi = DiversityPower(0.5)
    p = np.array([1e-5, 0.5, 0.5 - 1e-5])
    assert np.isfinite(drift_form(phi, p, np.array([1.0, -1.0, 0.0])))


def test_constant_portfolio_curvature_gap_is_excess_growth():
    pi = constant_portfolio([0.2, 0.3, 0.5])
    p = np.array([0.3, 0.3, 0.4])
    v = np.array([0.1, -0.3, 0.2])
    assert curvature_gap(pi, p, v) == pytest.approx(excess_growth_form([0.2, 0.3, 0.5], p, v), rel=1e-8)


def test_curvature_gap_and_weight_ratio_curvature_are_linked():
    pi = counterexample_portfolio(0.3)
    p = np.array([0.2, 0.45, 0.35])
    v = np.array([0.3, -0.1, -0.2])
    assert curvature_gap(pi, p, v) == pytest.approx(-0.5 * weight_ratio_curvature(pi, p, v), rel=1e-6)


def test_counterexample_weight_ratio_curvature_closed_form():
    lam = 0.1
    pi = counterexample_portfolio(lam)
    a = np.array([[-1.0, -1.0, -1.0], [0.0, -1.0, -1.0], [0.0, 0.0, -1.0]])
    p = np.array([0.2, 0.5, 0.3])
    v = np.array([0.3, -0.4, 0.1])
    # <v, A v> on tangent vectors is -|v|^2 / 2
    expected = lam * (-0.5 * v @ v + lam * (v @ a @ p) ** 2)
    assert weight_ratio_curvature(pi, p, v) == pytest.approx(expected, rel=1e-6)


def test_counterexample_is_a_portfolio():
    pi = counterexample_portfolio(0.5)
    w = pi(np.array([[0.2, 0.5, 0.3], [0.8, 0.1, 0.1]]))
    assert np.all(w > 0)
    assert np.allclose(w.sum(axis=1), 1.0)


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.1])
def test_counterexample_lambda_range(lam):
    with pytest.raises(ValueError):
        counterexample_portfolio(lam)


def test_counterexample_triangle_defect():
    assert loop_defect(counterexample_portfolio(0.1), TRIANGLE) == pytest.approx(TRIANGLE_DEFECT_LAMBDA_01, abs=1e-12)


def test_loop_defect_requires_closed_loop():
    with pytest.raises(ValueError):
        loop_defect(market_portfolio(), TRIANGLE[:-1])


def test_reconstruct_geometric_mean():
    pi = generated_portfolio(GeometricMean([0.5, 0.5]))
    assert reconstruct_log_phi(pi, [0.5, 0.5], [0.6, 0.4]) == pytest.approx(-0.0204109972601275648, abs=1e-12)


def test_reconstruct_rejects_nonconservative_field():
    with pytest.raises(NotAGradientError):
        reconstruct_log_phi(counterexample_portfolio(0.5), [0.5, 0.3, 0.2], [0.2, 0.3, 0.5])


def test_line_integral_handles_min_affine_kinks():
    phi = MinOfAffines([[1.0, 3.0, 1.0], [3.0, 1.0, 1.0]])
    pi = generated_portfolio(phi)
    a, b = np.array([0.6, 0.2, 0.2]), np.array([0.2, 0.6, 0.2])
    assert line_integral(pi, [a, b]) == pytest.approx(phi.log_value(b) - phi.log_value(a), abs=1e-10)


def test_line_integral_over_non_vectorized_map():
    pi = PortfolioMap(lambda mu: np.array([0.5, 0.5]), vectorized=False)
    a, b = np.array([0.5, 0.5]), np.array([0.6, 0.4])
    assert line_integral(pi, [a, b]) == pytest.approx(-0.0204109972601275648, abs=1e-12)


def test_two_stock_drift_condition_examples():
    assert two_stock_drift_condition(lambda y: 1.0 / (1.0 + np.exp(-2.0 * y))) > 0
    q = two_stock_q(generated_portfolio(DiversityPower(0.5)))
    assert two_stock_drift_condition(q) <= 0
    assert np.allclose(q(np.array([-1.0, 0.0, 2.0])), 1.0 / (1.0 + np.exp(-np.array([-1.0, 0.0, 2.0]) / 2)))


@settings(max_examples=30, deadline=None)
@given(points3, points3, points3)
def test_generated_portfolios_have_vanishing_loop_integrals(a, b, c):
    loop = np.array([a, b, c, a])
    for phi in (GeometricMean([0.2, 0.3, 0.5]), DiversityPower(0.5), Affine([1.0, 2.0, 3.0])):
        assert abs(loop_defect(generated_portfolio(phi), loop)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(points3, points3)
def test_line_integral_is_log_generator_difference(a, b):
    phi = DiversityPower(0.5)
    val = line_integral(generated_portfolio(phi), [a, b])
    assert val == pytest.approx(phi.log_value(b) - phi.log_value(a), abs=1e-10)
