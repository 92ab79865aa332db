from itertools import product

import numpy as np
import pytest

from vitac_common.exception import DataValidationError
from vitac_data.clustering import assign_clusters, kmeans_cluster, nearest_centroid, within_cluster_ss
from vitac_data.fabrics import generate_fabrics


def _exhaustive_min_wcss(x: np.ndarray) -> float:
    best = np.inf
    for labels in product((0, 1), repeat=len(x)):
        labels = np.array(labels)
        if labels.min() == labels.max():
            continue
        cost = sum(((x[labels == c] - x[labels == c].mean(axis=0)) ** 2).sum() for c in (0, 1))
        best = min(best, cost)
    return best


@pytest.mark.parametrize("seed", range(3))
def test_two_means_reaches_exhaustive_optimum(seed):
    x = np.random.default_rng(seed).standard_normal((8, 2))
    labels, centroids = kmeans_cluster(x, 2, seed=seed)
    assert within_cluster_ss(x, labels, centroids) == pytest.approx(_exhaustive_min_wcss(x), rel=1e-9)


@pytest.mark.parametrize("k", [1, 3, 8])
def test_reassignment_is_stable(k):
    x = np.random.default_rng(k).standard_normal((40, 4))
    labels, centroids = kmeans_cluster(x, k, seed=0)
    assert np.array_equal(nearest_centroid(x, centroids), labels)
    for c in range(k):
        np.testing.assert_allclose(centroids[c], x[labels == c].mean(axis=0), atol=1e-9)


def test_deterministic():
    x = np.random.default_rng(0).standard_normal((30, 3))
    a, _ = kmeans_cluster(x, 4, seed=7)
    b, _ = kmeans_cluster(x, 4, seed=7)
    assert np.array_equal(a, b)


def test_k_out_of_range():
    x = np.zeros((3, 2))
    with pytest.raises(DataValidationError):
        kmeans_cluster(x, 4, seed=0)
    with pytest.raises(DataValidationError):
        kmeans_cluster(x, 0, seed=0)


def test_assign_clusters():
    fabrics = generate_fabrics(30, seed=1)
    clustered = assign_clusters(fabrics, 8, seed=0)
    assert {f.cluster_id for f in clustered} == set(range(8))
    assert [f.id for f in clustered] == [f.id for f in fabrics]
    assert all(f.cluster_id == 0 for f in assign_clusters(fabrics, 1, seed=0))


def test_assign_clusters_names_constraint():
    with pytest.raises(DataValidationError, match="k must be <= n_fabrics"):
        assign_clusters(generate_fabrics(5, seed=0), 200, seed=0)


def test_points_on_k_locations_give_zero_wcss():
    rng = np.random.default_rng(4)
    sites = np.array([[0.0, 0.0], [5.0, 1.0], [-3.0, 4.0], [2.0, -6.0]])
    owner = rng.permutation(np.repeat(np.arange(4), [3, 5, 2, 6]))
    x = sites[owner]
    labels, centroids = kmeans_cluster(x, 4, seed=0)
    assert within_cluster_ss(x, labels, centroids) == pytest.approx(0.0, abs=1e-20)
    for site in range(4):
        assert len(set(labels[owner == site].tolist())) == 1
    assert len(set(labels.tolist())) == 4
