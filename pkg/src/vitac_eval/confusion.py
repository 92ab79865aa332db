"""
Fabric-by-fabric match-probability confusion.

Entry (i, j) is the probability mass that queries from fabric i put on the
candidate images of fabric j, averaged over fabric i's queries. The candidate
set is every candidate-modality image of the evaluated fabrics. Rows follow a
similarity order: cluster id, then stiffness, then fabric id.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from vitac_common.exception import DataValidationError
from vitac_common.logger import get_logger
from vitac_data.records import Dataset, FabricRecord, Modality
from vitac_eval.config import EvalConfig
from vitac_eval.probability import probabilities_from_sq_distances
from vitac_eval.retrieval import Embedder, evaluation_fabrics

log = get_logger(__name__)


@dataclass
class ConfusionMatrix:
    labels: list[int]
    values: np.ndarray
    query_modality: Modality
    candidate_modality: Modality
    kind: str = "fabric"

    @property
    def size(self) -> int:
        return len(self.labels)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.values,
            index=pd.Index(self.labels, name=self.kind),
            columns=[str(label) for label in self.labels],
        )


def similarity_order(fabrics: Sequence[FabricRecord]) -> list[int]:
    """Fabric ids sorted by (cluster id, stiffness, id); unclustered fabrics go last."""
    big = np.iinfo(np.int64).max
    ranked = sorted(
        fabrics,
        key=lambda f: (big if f.cluster_id is None else f.cluster_id, f.stiffness_score, f.id),
    )
    return [f.id for f in ranked]


def confusion_matrix(
    model: Embedder,
    dataset: Dataset,
    query_mod: Modality,
    cand_mod: Modality,
    config: EvalConfig | None = None,
    fabric_ids: Sequence[int] | None = None,
) -> ConfusionMatrix:
    config = config or EvalConfig()
    query_mod, cand_mod = Modality(query_mod), Modality(cand_mod)
    pool = set(fabric_ids) if fabric_ids is not None else set(evaluation_fabrics(dataset, config.split))
    order = similarity_order([dataset.fabric_index[fid] for fid in pool])
    position = {fid: i for i, fid in enumerate(order)}

    q_view, c_view = dataset.view(query_mod), dataset.view(cand_mod)
    for fid in order:
        if fid not in q_view.rows_by_fabric or fid not in c_view.rows_by_fabric:
            raise DataValidationError(
                f"fabric {fid} lacks {query_mod.value} or {cand_mod.value} observations"
            )
    q_rows = np.concatenate([q_view.rows_by_fabric[fid] for fid in order])
    c_rows = np.concatenate([c_view.rows_by_fabric[fid] for fid in order])
    q_emb = np.asarray(model.embed(query_mod, q_view.features[q_rows]))
    c_emb = np.asarray(model.embed(cand_mod, c_view.features[c_rows]))

    d2 = cdist(q_emb, c_emb, metric="sqeuclidean")
    if query_mod is cand_mod:
        # a query is never its own candidate
        d2[q_rows[:, None] == c_rows[None, :]] = np.inf
    probs = probabilities_from_sq_distances(d2, config.prob_coefficient)

    n = len(order)
    cand_pos = np.array([position[int(f)] for f in c_view.fabric_ids[c_rows]])
    query_pos = np.array([position[int(f)] for f in q_view.fabric_ids[q_rows]])
    per_query = np.zeros((len(q_rows), n))
    np.add.at(per_query.T, cand_pos, probs.T)
    sums = np.zeros((n, n))
    np.add.at(sums, query_pos, per_query)
    values = sums / np.bincount(query_pos, minlength=n)[:, None]
    log.info("Confusion %s->%s over %d fabrics: mean diagonal %.4f",
             query_mod.value, cand_mod.value, n, float(np.mean(np.diag(values))))
    return ConfusionMatrix(labels=order, values=values, query_modality=query_mod, candidate_modality=cand_mod)


def cluster_confusion(matrix: ConfusionMatrix, fabrics: Sequence[FabricRecord], n_clusters: int) -> ConfusionMatrix:
    """k x k mean of member entries; clusters without evaluated members are NaN."""
    clusters = {f.id: f.cluster_id for f in fabrics}
    member = np.array([clusters.get(fid) if clusters.get(fid) is not None else -1 for fid in matrix.labels])
    if np.any(member < 0):
        raise DataValidationError("cluster confusion needs every evaluated fabric to carry a cluster id")
    values = np.full((n_clusters, n_clusters), np.nan)
    for a in range(n_clusters):
        rows = member == a
        if not rows.any():
            continue
        for b in range(n_clusters):
            cols = member == b
            if cols.any():
                values[a, b] = float(matrix.values[np.ix_(rows, cols)].mean())
    return ConfusionMatrix(
        labels=list(range(n_clusters)),
        values=values,
        query_modality=matrix.query_modality,
        candidate_modality=matrix.candidate_modality,
        kind="cluster",
    )
