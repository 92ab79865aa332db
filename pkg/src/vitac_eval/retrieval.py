"""
Pick-1-from-N retrieval and top-k precision.

A trial takes one query observation, its true fabric and `n_distractor_fabrics`
other fabrics drawn without replacement from the evaluated pool. Each
candidate fabric contributes one image of the candidate modality (for
same-modality cells the query itself is never a candidate). Candidates are
shuffled, ranked by embedding distance, and the rank of the true fabric's image
is scored. Every trial owns a generator keyed by (seed, cell, fabric, query
instance, repetition), so serial and parallel runs agree exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Protocol, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from vitac_common.exception import DataValidationError, ShapeError
from vitac_common.logger import get_logger
from vitac_common.seeding import substream
from vitac_data.records import Dataset, Modality
from vitac_eval.config import EvalConfig

log = get_logger(__name__)


class Embedder(Protocol):
    def embed(self, modality: Modality, features: np.ndarray) -> np.ndarray: ...


def pick_one_of_n(query_e: np.ndarray, candidate_es: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Candidate indices by ascending distance; ties keep index order."""
    if len(candidate_es) == 0:
        raise DataValidationError("pick_one_of_n needs at least one candidate")
    q = np.asarray(query_e, dtype=np.float64)
    cands = np.asarray(candidate_es, dtype=np.float64)
    if cands.ndim != 2 or cands.shape[1] != q.shape[-1]:
        raise ShapeError(f"candidates {cands.shape} do not match query dim {q.shape[-1]}")
    return np.argsort(np.linalg.norm(cands - q, axis=1), kind="stable")


@dataclass(frozen=True)
class PrecisionCell:
    query: Modality
    candidate: Modality
    precision: dict[int, float]
    n_trials: int

    @property
    def label(self) -> str:
        return f"{self.query.value}->{self.candidate.value}"

    @property
    def top1(self) -> float:
        return self.precision[1]

    @property
    def top3(self) -> float:
        return self.precision[3]


@dataclass
class PrecisionReport:
    cells: list[PrecisionCell] = field(default_factory=list)
    top_ks: tuple[int, ...] = (1, 3)

    def cell(self, query: Modality | str, candidate: Modality | str) -> PrecisionCell:
        q, c = Modality(query), Modality(candidate)
        for cell in self.cells:
            if cell.query is q and cell.candidate is c:
                return cell
        raise KeyError(f"{q.value}->{c.value}")

    def to_frame(self) -> pd.DataFrame:
        columns = ["query", "candidate", *(f"top{k}" for k in self.top_ks), "n_trials"]
        rows = [
            [cell.query.value, cell.candidate.value, *(cell.precision[k] for k in self.top_ks), cell.n_trials]
            for cell in self.cells
        ]
        return pd.DataFrame(rows, columns=columns)


def evaluation_fabrics(dataset: Dataset, split: str = "test") -> list[int]:
    if split == "test":
        if not dataset.test_ids:
            log.warning("Dataset has no test split; evaluating on all %d fabrics", len(dataset.fabrics))
            return sorted(dataset.fabric_ids)
        return sorted(dataset.test_ids)
    if split == "train":
        return sorted(dataset.train_ids)
    return sorted(dataset.fabric_ids)


def _rows_by_fabric(dataset: Dataset, modality: Modality, fabric_ids: Iterable[int]) -> dict[int, np.ndarray]:
    rows = dataset.view(modality).rows_by_fabric
    out = {}
    for fid in fabric_ids:
        if fid not in rows:
            raise DataValidationError(f"fabric {fid} has no {modality.value} observations")
        out[fid] = rows[fid]
    return out


def _fabric_trials(
    fabric_id: int,
    query_rows: np.ndarray,
    query_instances: np.ndarray,
    candidate_rows: dict[int, np.ndarray],
    query_emb: np.ndarray,
    candidate_emb: np.ndarray,
    same_modality: bool,
    tags: tuple,
    config: EvalConfig,
) -> list[int]:
    """0-based rank of the true candidate for every trial of one fabric."""
    others = np.array([f for f in candidate_rows if f != fabric_id], dtype=np.int64)
    ranks: list[int] = []
    for q_row, instance in zip(query_rows, query_instances):
        own = candidate_rows[fabric_id]
        if same_modality:
            own = own[own != q_row]
        for rep in range(config.repetitions):
            rng = substream(config.seed, *tags, fabric_id, int(instance), rep)
            distractors = rng.choice(others, size=config.n_distractor_fabrics, replace=False)
            picked = [int(rng.choice(own))] + [int(rng.choice(candidate_rows[int(f)])) for f in distractors]
            order = rng.permutation(len(picked))
            ranking = pick_one_of_n(query_emb[q_row], candidate_emb[np.array(picked)[order]])
            true_slot = int(np.flatnonzero(order == 0)[0])
            ranks.append(int(np.flatnonzero(ranking == true_slot)[0]))
    return ranks


def topk_precision(
    model: Embedder,
    dataset: Dataset,
    query_mod: Modality,
    cand_mod: Modality,
    config: EvalConfig | None = None,
    fabric_ids: Sequence[int] | None = None,
    embeddings: dict[Modality, np.ndarray] | None = None,
) -> PrecisionCell:
    config = config or EvalConfig()
    query_mod, cand_mod = Modality(query_mod), Modality(cand_mod)
    pool = sorted(fabric_ids) if fabric_ids is not None else evaluation_fabrics(dataset, config.split)
    if len(pool) < config.n_distractor_fabrics + 1:
        raise DataValidationError(
            f"{len(pool)} fabrics available; pick-1-from-{config.n_candidates} needs "
            f"{config.n_distractor_fabrics} distractor fabrics besides the true one"
        )
    same = query_mod is cand_mod
    query_rows = _rows_by_fabric(dataset, query_mod, pool)
    candidate_rows = _rows_by_fabric(dataset, cand_mod, pool)
    if same:
        short = [fid for fid, rows in candidate_rows.items() if len(rows) < 2]
        if short:
            raise DataValidationError(
                f"same-modality retrieval needs two {cand_mod.value} observations per fabric; fabric {short[0]} has one"
            )

    embeddings = embeddings if embeddings is not None else {}
    for mod in {query_mod, cand_mod}:
        if mod not in embeddings:
            embeddings[mod] = np.asarray(model.embed(mod, dataset.view(mod).features))
    instances = dataset.view(query_mod).instance_indices
    tags = ("retrieval", query_mod.value, cand_mod.value)

    per_fabric = Parallel(n_jobs=config.workers)(
        delayed(_fabric_trials)(
            fid, query_rows[fid], instances[query_rows[fid]], candidate_rows,
            embeddings[query_mod], embeddings[cand_mod], same, tags, config,
        )
        for fid in pool
    )
    ranks = np.array([r for fabric_ranks in per_fabric for r in fabric_ranks])
    precision = {k: float(np.mean(ranks < k)) for k in config.top_ks}
    log.info("%s->%s over %d trials: %s", query_mod.value, cand_mod.value, len(ranks),
             ", ".join(f"top{k}={p:.4f}" for k, p in precision.items()))
    return PrecisionCell(query=query_mod, candidate=cand_mod, precision=precision, n_trials=len(ranks))


def evaluation_pairs(modalities: Sequence[Modality]) -> list[tuple[Modality, Modality]]:
    """Every ordered (query, candidate) pair, same-modality cells included."""
    mods = list(dict.fromkeys(Modality(m) for m in modalities))
    return list(product(mods, mods))


def precision_grid(
    model: Embedder,
    dataset: Dataset,
    modalities: Sequence[Modality],
    config: EvalConfig | None = None,
    fabric_ids: Sequence[int] | None = None,
    pairs: Sequence[tuple[Modality, Modality]] | None = None,
) -> PrecisionReport:
    config = config or EvalConfig()
    present = [m for m in modalities if dataset.count(m) > 0]
    cache: dict[Modality, np.ndarray] = {}
    cells = [
        topk_precision(model, dataset, q, c, config, fabric_ids, cache)
        for q, c in (pairs if pairs is not None else evaluation_pairs(present))
    ]
    return PrecisionReport(cells=cells, top_ks=config.top_ks)
