import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fgplab.exceptions import DomainError
from fgplab.simplex import (
    fisher_inner,
    from_exponential,
    interior_grid,
    project_to_tangent,
    psi,
    tangent_basis,
    tangent_directions,
    to_exponential,
)
from fgplab.validation import check_cycle, check_simplex, check_tangent

interior = st.integers(2, 6).flatmap(
    lambda n: arrays(float, n, elements=st.floats(0.01, 1.0))
).map(lambda x: x / x.sum())


def test_uniform_point_has_zero_coordinates():
    assert np.allclose(to_exponential([0.25, 0.25, 0.25, 0.25]), 0.0)


def test_psi_at_zero_is_log_n():
    assert psi(np.zeros(4)) == pytest.approx(np.log(5))


def test_psi_does_not_overflow():
    assert psi([1000.0, 0.0]) == pytest.approx(1000.0)
    assert psi([-1000.0]) == pytest.approx(0.0, abs=1e-300)


@given(interior)
def test_exponential_round_trip(mu):
    assert np.allclose(from_exponential(to_exponential(mu)), mu, atol=1e-12)


@given(arrays(float, 3, elements=st.floats(-30, 30)))
def test_psi_is_log_normalizer(theta):
    mu = from_exponential(theta)
    # the last weight equals exp(-psi)
    assert np.log(mu[-1]) == pytest.approx(-psi(theta), abs=1e-9)


def test_from_exponential_rejects_nonfinite():
    with pytest.raises(DomainError):
        from_exponential([np.inf, 0.0])


def test_to_exponential_rejects_boundary():
    with pytest.raises(DomainError):
        to_exponential([1.0, 0.0])


def test_fisher_inner_matches_formula():
    p = np.array([0.2, 0.3, 0.5])
    u = np.array([1.0, -1.0, 0.0])
    assert fisher_inner(p, u, u) == pytest.approx(0.5 * (1 / 0.2 + 1 / 0.3))


def test_project_to_tangent_sums_to_zero():
    assert project_to_tangent([1.0, 2.0, 6.0]).sum() == pytest.approx(0.0)


def test_tangent_basis_is_orthonormal_and_tangent():
    b = tangent_basis(4)
    assert np.allclose(b @ b.T, np.eye(3))
    assert np.allclose(b.sum(axis=1), 0.0)


def test_tangent_directions_are_unit_tangent_vectors():
    d = tangent_directions(3, 8)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
    assert np.allclose(d.sum(axis=1), 0.0)


def test_interior_grid_counts_interior_points():
    g = interior_grid(15)
    assert np.all(g > 0)
    assert np.allclose(g.sum(axis=1), 1.0)
    assert len(g) == 15 * 14 // 2


def test_check_simplex_renormalizes_small_drift():
    x = check_simplex([0.5, 0.5 + 5e-13])
    assert x.sum() == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("bad", [[0.5, 0.6], [1.0, 0.0], [np.nan, 1.0], [1.0]])
def test_check_simplex_rejects(bad):
    with pytest.raises(DomainError):
        check_simplex(bad)


def test_check_tangent_rejects_nonzero_sum():
    with pytest.raises(DomainError):
        check_tangent([1.0, 0.0])


def test_check_cycle_requires_closure():
    with pytest.raises(ValueError):
        check_cycle([[0.4, 0.6], [0.6, 0.4]])


@settings(max_examples=50)
@given(interior, st.floats(-5, 5))
def test_fisher_inner_is_bilinear(p, a):
    rng = np.random.default_rng(0)
    u, v = project_to_tangent(rng.normal(size=(2, p.size)))
    assert fisher_inner(p, a * u, v) == pytest.approx(a * fisher_inner(p, u, v), rel=1e-9, abs=1e-9)
