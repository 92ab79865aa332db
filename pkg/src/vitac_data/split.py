"""Cluster-stratified train/test split of fabrics."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from vitac_common.exception import DataValidationError
from vitac_common.logger import get_logger
from vitac_common.seeding import substream
from vitac_data.clustering import assign_clusters
from vitac_data.records import FabricRecord

log = get_logger(__name__)


def allocate_test_counts(cluster_sizes: dict[int, int], n_test: int) -> dict[int, int]:
    """Largest-remainder apportionment of `n_test` over clusters by size."""
    total = sum(cluster_sizes.values())
    quotas = {c: n_test * size / total for c, size in cluster_sizes.items()}
    counts = {c: int(np.floor(q)) for c, q in quotas.items()}
    leftover = n_test - sum(counts.values())
    # biggest fractional part first, cluster id breaks ties
    order = sorted(quotas, key=lambda c: (-(quotas[c] - counts[c]), c))
    for c in order[:leftover]:
        counts[c] += 1
    return counts


def split_dataset(
    fabrics: Sequence[FabricRecord],
    n_test: int,
    seed: int,
) -> tuple[list[int], list[int]]:
    """Return sorted (train ids, test ids); test fabrics drawn per cluster in proportion."""
    n = len(fabrics)
    if n_test < 0 or n_test >= n:
        raise DataValidationError(f"split.n_test={n_test} must satisfy 0 <= n_test < n_fabrics={n}")
    unclustered = [f.id for f in fabrics if f.cluster_id is None]
    if unclustered:
        raise DataValidationError(
            f"{len(unclustered)} fabrics have no cluster id (first: {unclustered[0]}); cluster before splitting"
        )

    members: dict[int, list[int]] = {}
    for f in fabrics:
        members.setdefault(int(f.cluster_id), []).append(f.id)

    counts = allocate_test_counts({c: len(ids) for c, ids in members.items()}, n_test)
    test: list[int] = []
    for cluster in sorted(members):
        ids = sorted(members[cluster])
        rng = substream(seed, "split", cluster)
        picked = rng.choice(len(ids), size=counts[cluster], replace=False)
        test.extend(ids[i] for i in picked)

    test_set = set(test)
    train_ids = sorted(f.id for f in fabrics if f.id not in test_set)
    log.info("Split %d fabrics into %d train / %d test over %d clusters",
             n, len(train_ids), len(test_set), len(members))
    return train_ids, sorted(test_set)


def cluster_and_split(
    fabrics: Sequence[FabricRecord],
    k: int,
    cluster_seed: int,
    n_test: int,
    split_seed: int,
    n_init: int = 20,
) -> tuple[list[FabricRecord], list[int]]:
    """Cluster on normalized attributes, then draw a stratified test set."""
    clustered = assign_clusters(fabrics, k, cluster_seed, n_init)
    _, test_ids = split_dataset(clustered, n_test, split_seed)
    return clustered, test_ids
