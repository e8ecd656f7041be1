import numpy as np
import pytest

from src.core.errors import ConfigError, DistributionError
from src.core.rng import seeded_rng
from src.core.types import items_labels, items_matrix
from src.data.distributions import (
    ContaminatedUniformMean,
    DistributionSpec,
    GaussianClipped,
    GaussianMean,
    PointMass,
    Regression,
    UniformBox,
    draw_batch,
    second_moment_estimate,
)


def test_gaussian_mean_concentrates():
    spec = GaussianMean(theta=np.zeros(2), cov=np.eye(2))
    values, labels = spec.sample(100_000, seeded_rng(0, 0))
    assert labels is None
    np.testing.assert_allclose(values.mean(axis=0), [0.0, 0.0], atol=0.02)


def test_gaussian_mean_rejects_singular_covariance():
    with pytest.raises(DistributionError):
        GaussianMean(theta=np.zeros(2), cov=np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(DistributionError):
        GaussianMean(theta=np.zeros(2), cov=np.eye(3))


def test_gaussian_mean_eigen_bounds():
    GaussianMean(theta=np.zeros(2), cov=np.diag([1.0, 2.0]), eigen_bounds=(0.5, 2.0))
    with pytest.raises(DistributionError):
        GaussianMean(theta=np.zeros(2), cov=np.diag([1.0, 4.0]), eigen_bounds=(0.5, 2.0))


def test_pure_uniform_contamination_stays_in_window():
    spec = ContaminatedUniformMean(theta=np.zeros(1), gamma=1.0, p=1.0, sigma=1.0)
    values, _ = spec.sample(10_000, seeded_rng(1, 0))
    assert values.min() >= -1.0 and values.max() <= 1.0
    assert spec.density_floor == pytest.approx(0.5)


def test_contaminated_variance_matches_formula():
    spec = ContaminatedUniformMean(theta=np.array([2.0]), gamma=1.0, p=0.5, sigma=1.0)
    values, _ = spec.sample(200_000, seeded_rng(2, 0))
    assert values.var() == pytest.approx(spec.coordinate_variance, rel=0.02)


def test_gaussian_mean_variance_follows_the_covariance():
    spec = GaussianMean(theta=np.array([1.0, -1.0]), cov=np.diag([1.0, 4.0]))
    values, _ = spec.sample(100_000, seeded_rng(4, 0))
    np.testing.assert_allclose(values.var(axis=0), [1.0, 4.0], rtol=0.1)


def test_contaminated_density_clears_the_floor_across_the_window():
    spec = ContaminatedUniformMean(theta=np.array([0.3]), gamma=0.5, p=0.5, sigma=1.0)
    values, _ = spec.sample(1_000_000, seeded_rng(5, 0))
    counts, edges = np.histogram(values[:, 0], bins=20, range=(-0.2, 0.8))
    densities = counts / (len(values) * (edges[1] - edges[0]))
    assert densities.min() >= 0.9 * spec.density_floor


def test_noiseless_regression_labels_are_exact():
    spec = Regression(theta=np.array([0.5, -0.25, 2.0]), design=UniformBox(B=1.0), noise_sigma=0.0)
    X, y = spec.sample(500, seeded_rng(3, 0))
    for row, label in zip(X, y):
        assert label == (0.0 + row[0] * 0.5) + row[1] * -0.25 + row[2] * 2.0
    assert X.min() >= 0.0 and X.max() <= 1.0


def test_gaussian_clipped_design_width_is_checked():
    GaussianClipped(B=1.0, cov=np.eye(2) * 0.01)
    with pytest.raises(DistributionError):
        GaussianClipped(B=1.0, cov=np.eye(2) * 0.1)
    X = GaussianClipped(B=1.0, cov=np.eye(2) * 0.01).sample(1000, 2, seeded_rng(4, 0))
    assert X.min() >= 0.0 and X.max() <= 1.0


def test_point_mass_is_degenerate():
    spec = PointMass(theta=np.array([3.0, -1.0]))
    values, _ = spec.sample(5, seeded_rng(0, 0))
    np.testing.assert_array_equal(values, np.tile([3.0, -1.0], (5, 1)))
    with pytest.raises(ConfigError):
        spec.with_sigma(1.0)


def test_draw_batch_stamps_round_and_slot():
    spec = Regression(theta=np.array([1.0]), design=UniformBox(B=1.0), noise_sigma=0.1)
    batch = draw_batch(spec, 6, seeded_rng(9, 4), round_index=4)
    assert [it.arrival_round for it in batch] == [4] * 6
    assert [it.offset for it in batch] == list(range(6))
    assert items_matrix(batch).shape == (6, 1)
    assert items_labels(batch).shape == (6,)


def test_draw_batch_is_reproducible():
    spec = GaussianMean(theta=np.zeros(3), cov=np.eye(3))
    assert draw_batch(spec, 5, seeded_rng(5, 2), 2) == draw_batch(spec, 5, seeded_rng(5, 2), 2)


@pytest.mark.parametrize("spec", [
    GaussianMean(theta=np.array([1.0, 2.0]), cov=np.array([[2.0, 0.5], [0.5, 1.0]]), eigen_bounds=(0.1, 10.0)),
    ContaminatedUniformMean(theta=np.zeros(3), gamma=2.0, p=0.25, sigma=0.5),
    PointMass(theta=np.array([4.0])),
    Regression(theta=np.array([0.5, -0.5]), design=GaussianClipped(B=2.0, cov=np.eye(2) * 0.05), noise_sigma=0.3),
])
def test_distribution_documents_round_trip(spec):
    rebuilt = DistributionSpec.from_dict(spec.to_dict())
    assert type(rebuilt) is type(spec)
    assert rebuilt.to_dict() == spec.to_dict()


def test_distribution_documents_reject_unknown_keys():
    with pytest.raises(ConfigError):
        DistributionSpec.from_dict({"variant": "gaussian_mean", "theta": [0.0], "mu": 1})
    with pytest.raises(ConfigError):
        DistributionSpec.from_dict({"variant": "cauchy"})
    with pytest.raises(ConfigError):
        DistributionSpec.from_dict({"variant": "regression", "theta": [0.0], "design": {"kind": "sphere"}})


def test_with_sigma_replaces_noise_scale():
    assert Regression(theta=np.zeros(1)).with_sigma(0.0).noise_sigma == 0.0
    assert ContaminatedUniformMean(theta=np.zeros(1)).with_sigma(3.0).sigma == 3.0
    gaussian = GaussianMean(theta=np.zeros(2), cov=np.eye(2)).with_sigma(2.0)
    np.testing.assert_array_equal(gaussian.cov, np.eye(2) * 4.0)


def test_second_moment_of_unit_box():
    spec = Regression(theta=np.zeros(2), design=UniformBox(B=1.0))
    moment = second_moment_estimate(spec, 200_000, seeded_rng(0, 0))
    np.testing.assert_allclose(moment, [[1 / 3, 1 / 4], [1 / 4, 1 / 3]], atol=0.01)
