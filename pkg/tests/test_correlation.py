"""Distance metric and correlation model tests."""

import numpy as np
import pytest

from scalemix.correlation import (
    CorrelationModel,
    SiteSet,
    build_correlation,
    mahalanobis_distance,
)


def test_isotropic_distance_is_euclidean():
    assert mahalanobis_distance((0.0, 0.0), (3.0, 4.0)) == pytest.approx(5.0)


def test_anisotropic_distance_pinned_example():
    # unit displacement along the minor axis doubles under ratio 2
    h = mahalanobis_distance((0.0, 0.0), (0.0, 1.0), ratio=2.0, angle=0.0)
    assert h == pytest.approx(2.0, abs=1e-12)
    # along the major axis the distance is unchanged
    h = mahalanobis_distance((0.0, 0.0), (1.0, 0.0), ratio=2.0, angle=0.0)
    assert h == pytest.approx(1.0, abs=1e-12)


def test_anisotropic_rotation_moves_major_axis():
    # with angle pi/2 the stretched direction rotates onto the x axis
    h = mahalanobis_distance((0.0, 0.0), (0.0, 1.0), ratio=2.0, angle=np.pi / 2)
    assert h == pytest.approx(1.0, abs=1e-12)
    h = mahalanobis_distance((0.0, 0.0), (1.0, 0.0), ratio=2.0, angle=np.pi / 2)
    assert h == pytest.approx(2.0, abs=1e-12)


def test_distance_symmetry_and_identity():
    rng = np.random.default_rng(5)
    model = CorrelationModel(lam=1.0, nu=1.0, ratio=1.7, angle=0.4)
    for _ in range(20):
        a, b = rng.normal(size=2), rng.normal(size=2)
        assert model.distance(a, b) == pytest.approx(model.distance(b, a), rel=1e-14)
        assert model.distance(a, a) == 0.0


def test_correlation_of_distance_values():
    model = CorrelationModel(lam=2.0, nu=1.0)
    assert model.correlation_of_distance(2.0) == pytest.approx(np.exp(-1.0), rel=1e-14)
    model = CorrelationModel(lam=1.0, nu=2.0)
    assert model.correlation_of_distance(3.0) == pytest.approx(np.exp(-9.0), rel=1e-12)
    assert model.correlation_of_distance(0.0) == 1.0


def test_correlation_parameter_validation():
    with pytest.raises(ValueError):
        CorrelationModel(lam=0.0, nu=1.0)
    with pytest.raises(ValueError):
        CorrelationModel(lam=1.0, nu=0.0)
    with pytest.raises(ValueError):
        CorrelationModel(lam=1.0, nu=2.5)
    with pytest.raises(ValueError):
        CorrelationModel(lam=1.0, nu=1.0, ratio=0.5)


def test_siteset_requires_unique_labels():
    coords = np.array([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        SiteSet(coords, labels=["a", "a"])


def test_siteset_subset():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    sites = SiteSet(coords, labels=["a", "b", "c"])
    sub = sites.subset([2, 0])
    assert list(sub.labels) == ["c", "a"]
    np.testing.assert_array_equal(sub.coords, coords[[2, 0]])


def test_build_correlation_matches_pairwise():
    rng = np.random.default_rng(11)
    coords = rng.uniform(0.0, 3.0, size=(6, 2))
    sites = SiteSet(coords)
    model = CorrelationModel(lam=1.5, nu=1.2, ratio=1.4, angle=0.3)
    sigma = build_correlation(sites, model)
    assert sigma.shape == (6, 6)
    np.testing.assert_allclose(sigma, sigma.T, atol=1e-15)
    np.testing.assert_array_equal(np.diag(sigma), np.ones(6))
    for i in range(6):
        for j in range(6):
            expected = model.correlation(coords[i], coords[j])
            assert sigma[i, j] == pytest.approx(expected, rel=1e-13)
    # valid correlation matrix: positive definite here
    np.linalg.cholesky(sigma)


def test_build_correlation_rejects_degenerate():
    # duplicated site makes the matrix exactly singular
    coords = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    sites = SiteSet(coords, labels=["a", "b", "c"])
    model = CorrelationModel(lam=1.0, nu=1.0)
    with pytest.raises(ValueError):
        build_correlation(sites, model)


def test_correlation_decreases_with_distance():
    model = CorrelationModel(lam=1.0, nu=0.8)
    h = np.linspace(0.0, 10.0, 50)
    rho = model.correlation_of_distance(h)
    assert np.all(np.diff(rho) < 0)
    assert np.all((rho > 0) & (rho <= 1))
