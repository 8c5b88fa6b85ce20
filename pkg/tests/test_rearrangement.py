import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fgplab.exceptions import DegenerateFitError, DomainError
from fgplab.generators import Affine, DiversityPower, GeometricMean
from fgplab.rearrangement import (
    Empirical,
    Laplace,
    Normal,
    Uniform,
    distribution_from_spec,
    gaussian_transport,
    mass_interval,
    monotone_map,
    point_mass,
    quantile,
    two_stock_portfolio,
    verify_1d_optimality,
)

# Closed-form oracle values for N(-0.626, 0.305) -> N(0, 0.08)
SLOPE = 16 / 61
ALPHA = 45 / 61
INTERCEPT = 0.16419672131147540984
C = 0.848575072658331515
P_FIT = Normal(-0.626, 0.305)
Q1 = Normal(0.0, 0.08)


def test_quantile_examples():
    assert quantile(Uniform(0, 1), 0.25) == 0.25
    assert quantile(Normal(0, 1), 0.5) == 0.0
    assert quantile(Laplace(-0.2, 0.1), 0.5) == pytest.approx(-0.2, abs=1e-15)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_quantile_rejects_levels(u):
    with pytest.raises(ValueError):
        quantile(Normal(0, 1), u)


def test_constructor_errors():
    with pytest.raises(ValueError):
        Normal(0, 0)
    with pytest.raises(ValueError):
        Uniform(1, 1)
    with pytest.raises(ValueError):
        Laplace(0, -1)
    with pytest.raises(ValueError):
        Empirical([])


@pytest.mark.parametrize("d", [Normal(0.3, 2.0), Uniform(-0.2, 0.6), Laplace(-0.2, 0.1)])
def test_quantile_inverts_cdf(d):
    x = d.quantile(np.linspace(0.001, 0.999, 200))
    assert np.allclose(d.quantile(d.cdf(x)), x, atol=1e-9)
    assert np.allclose(d.cdf(x) + d.sf(x), 1.0, atol=1e-15)


def test_normal_matches_scipy():
    d = Normal(-0.626, 0.305)
    u = np.linspace(1e-6, 1 - 1e-6, 101)
    assert np.allclose(d.quantile(u), stats.norm(-0.626, 0.305).ppf(u), atol=1e-9)


def test_normal_fit():
    d = Normal.fit([0.0, 2.0])
    assert d.mean == 1.0 and d.sd == pytest.approx(math.sqrt(2))
    assert Normal.fit([0.0, 2.0], "n").sd == pytest.approx(1.0)
    with pytest.raises(DegenerateFitError):
        Normal.fit([1.0, 1.0, 1.0])
    with pytest.raises(DegenerateFitError):
        Normal.fit([1.0])


def test_distribution_from_spec(tmp_path):
    assert isinstance(distribution_from_spec({"kind": "normal", "mean": -0.626, "sd": 0.305}), Normal)
    assert isinstance(distribution_from_spec({"kind": "uniform", "a": -0.2, "b": 0.6}), Uniform)
    assert isinstance(distribution_from_spec({"kind": "laplace", "loc": -0.2, "scale": 0.1}), Laplace)
    f = tmp_path / "s.txt"
    f.write_text("value\n0.1\n0.3\n-0.2\n")
    d = distribution_from_spec({"kind": "empirical", "samples_file": "s.txt"}, base_dir=tmp_path)
    assert np.array_equal(d.samples, [-0.2, 0.1, 0.3])
    with pytest.raises(ValueError):
        distribution_from_spec({"kind": "normal", "mean": 0})
    with pytest.raises(ValueError):
        distribution_from_spec({"kind": "cauchy"})


def test_empirical_conventions():
    d = Empirical([3.0, 1.0, 2.0, 4.0])
    assert d.cdf(1.0) == 0.125 and d.cdf(4.0) == 0.875
    assert d.cdf(0.0) == 0.0 and d.cdf(5.0) == 1.0
    assert d.quantile(0.25) == 1.0 and d.quantile(0.26) == 2.0
    assert np.all(np.diff(d.cdf(np.linspace(1, 4, 50))) > 0)


def test_identity_map():
    x = np.linspace(-3, 3, 101)
    for d in (Normal(0.1, 0.7), Laplace(0.0, 1.0), Uniform(-4, 4)):
        assert np.allclose(monotone_map(d, d, x), x, atol=1e-9)


def test_normal_to_normal_affine():
    x = np.linspace(-4, 4, 100)
    assert np.allclose(monotone_map(Normal(0, 1), Normal(1, 2), x), 1 + 2 * x, atol=1e-9)


def test_fitted_gaussian_closed_form():
    aff = gaussian_transport(-0.626, 0.305, 0.0, 0.08)
    assert aff.slope == pytest.approx(SLOPE, abs=1e-15)
    assert aff.intercept == pytest.approx(INTERCEPT, abs=1e-15)
    assert aff.alpha == pytest.approx(ALPHA, abs=1e-15)
    assert aff.c == pytest.approx(C, abs=1e-12)
    theta = np.linspace(-1.846, 0.594, 1001)
    assert np.max(np.abs(monotone_map(P_FIT, Q1, theta) - aff(theta))) < 1e-9


def test_gaussian_transport_identity_and_errors():
    aff = gaussian_transport(0.3, 1.2, 0.3, 1.2)
    assert aff.slope == 1.0 and aff.intercept == pytest.approx(0.0, abs=1e-16)
    with pytest.raises(ValueError):
        gaussian_transport(0, 0, 0, 1)


def test_clamp_is_flagged():
    out, flags = monotone_map(Normal(0, 1), Normal(0, 1), np.array([0.0, 40.0, -40.0]), return_flags=True)
    assert list(flags) == [False, True, True]
    assert np.all(np.isfinite(out))


def test_curve_matches_weighted_diversity_form():
    curve = two_stock_portfolio(P_FIT, Q1)
    mu1 = 0.35
    closed = C * mu1**ALPHA / (C * mu1**ALPHA + (1 - mu1) ** ALPHA)
    assert curve.pi1(mu1) == pytest.approx(closed, abs=1e-9)
    gen = curve.generator()
    assert isinstance(gen, DiversityPower)
    mu = np.array([[0.35, 0.65], [0.1, 0.9], [0.8, 0.2]])
    assert np.allclose(gen.portfolio(mu), curve.weights(mu), atol=1e-12)


def test_curve_log_ratio_identity():
    curve = two_stock_portfolio(P_FIT, Q1)
    mu1 = np.linspace(0.01, 0.99, 500)
    pi1 = curve.pi1(mu1)
    resid = np.log(pi1 / (1 - pi1)) - ALPHA * np.log(mu1 / (1 - mu1)) - math.log(C)
    assert np.max(np.abs(resid)) < 1e-10


def test_point_mass_target_is_market():
    curve = two_stock_portfolio(P_FIT, point_mass(0.0))
    mu = np.array([[0.2, 0.8], [0.6, 0.4]])
    assert np.allclose(curve.weights(mu), mu, atol=1e-15)
    assert isinstance(curve.generator(), Affine)


def test_equal_sd_gives_constant_weights():
    curve = two_stock_portfolio(Normal(-0.5, 0.3), Normal(0.1, 0.3))
    assert curve.affine.alpha == 0.0
    w = curve.weights(np.array([[0.1, 0.9], [0.5, 0.5], [0.9, 0.1]]))
    assert np.allclose(w, w[0], atol=1e-15)
    assert isinstance(curve.generator(), GeometricMean)


def test_curve_domain():
    curve = two_stock_portfolio(P_FIT, Q1)
    with pytest.raises(DomainError):
        curve.pi1(1.0)
    with pytest.raises(DomainError):
        curve.weights([[0.2, 0.3, 0.5]])


@pytest.mark.parametrize("Q", [Q1, Uniform(-0.2, 0.6), Laplace(-0.2, 0.1)])
def test_pushforward_matches_target(Q):
    rng = np.random.default_rng(0)
    x = P_FIT.sample(rng, 100_000)
    y = monotone_map(P_FIT, Q, x)
    ks = stats.kstest(y, Q.cdf).statistic
    assert ks < 0.01


@pytest.mark.parametrize("Q", [Q1, Uniform(-0.2, 0.6), Laplace(-0.2, 0.1), Empirical([-0.3, 0.0, 0.1, 0.5])])
def test_map_nondecreasing(Q):
    x = np.linspace(-3, 2, 10_000)
    assert np.all(np.diff(monotone_map(P_FIT, Q, x)) >= 0)


def test_mass_interval():
    lo, hi = mass_interval(Normal(0, 1), 0.95)
    assert lo == pytest.approx(-1.959963984540054) and hi == pytest.approx(1.959963984540054)


def test_verify_examples():
    rep = verify_1d_optimality(Normal(0, 1), Normal(1, 2), 6)
    assert rep.monotone_optimal and rep.unique and rep.best_permutation == tuple(range(6))
    same = verify_1d_optimality(Normal(0, 1), Normal(0, 1), 5)
    assert same.monotone_value == pytest.approx(math.log(2), abs=1e-12)
    with pytest.raises(ValueError):
        verify_1d_optimality(Normal(0, 1), Normal(0, 1), 9)


def test_verify_degenerate_target():
    rep = verify_1d_optimality(Normal(0, 1), point_mass(0.2), 4)
    assert rep.degenerate and rep.monotone_optimal and not rep.unique


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-2, 2), st.floats(0.05, 3), st.floats(-2, 2), st.floats(0.05, 3),
    st.floats(-10, 10),
)
def test_gaussian_transport_matches_quantile_matching(m1, s1, m2, s2, z):
    x = m1 + s1 * max(min(z, 4), -4)
    aff = gaussian_transport(m1, s1, m2, s2)
    assert monotone_map(Normal(m1, s1), Normal(m2, s2), x) == pytest.approx(aff(x), abs=1e-9)
