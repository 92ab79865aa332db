"""Fabric clustering on normalized physical attributes."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.cluster import KMeans

from vitac_common.exception import DataValidationError
from vitac_common.logger import get_logger
from vitac_data.fabrics import normalize_attributes
from vitac_data.records import FabricRecord

log = get_logger(__name__)

DEFAULT_RESTARTS = 20


def within_cluster_ss(matrix: np.ndarray, assignments: np.ndarray, centroids: np.ndarray) -> float:
    diff = np.asarray(matrix, dtype=np.float64) - centroids[assignments]
    return float(np.sum(diff * diff))


def nearest_centroid(matrix: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((matrix[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def kmeans_cluster(
    matrix: np.ndarray,
    k: int,
    seed: int,
    n_init: int = DEFAULT_RESTARTS,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations from k-means++ seeds, best of `n_init` restarts by WCSS.

    Runs to strict convergence (`tol=0`), so every point sits at its nearest
    centroid and every centroid is the mean of its members. Clusters that empty
    out mid-run are re-seeded from the points farthest from their centers.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise DataValidationError(f"expected an n x d matrix, got shape {x.shape}")
    n = x.shape[0]
    if k < 1 or k > n:
        raise DataValidationError(f"cluster count k={k} must satisfy 1 <= k <= n={n}")

    km = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=n_init,
        max_iter=1000,
        tol=0,
        random_state=seed,
        algorithm="lloyd",
    )
    km.fit(x)
    assignments = km.labels_.astype(np.int64)
    centroids = km.cluster_centers_.astype(np.float64)
    log.info("k-means k=%d on %d points: WCSS=%.6g after %d iterations",
             k, n, within_cluster_ss(x, assignments, centroids), km.n_iter_)
    return assignments, centroids


def assign_clusters(
    fabrics: Sequence[FabricRecord],
    k: int,
    seed: int,
    n_init: int = DEFAULT_RESTARTS,
) -> list[FabricRecord]:
    """Copies of `fabrics` carrying the cluster id of their z-scored attributes."""
    if k > len(fabrics):
        raise DataValidationError(
            f"cluster.k={k} exceeds the number of fabrics ({len(fabrics)}); k must be <= n_fabrics"
        )
    if k == 1:
        return [f.with_cluster(0) for f in fabrics]
    assignments, _ = kmeans_cluster(normalize_attributes(fabrics), k, seed, n_init)
    return [f.with_cluster(int(c)) for f, c in zip(fabrics, assignments)]
