"""
Group sampling, the training loop and the `train` run step.

Positives take one fabric and draw each branch's instance(s) independently;
negatives draw each branch's fabric independently and redraw until at least
two branches disagree. Each batch holds exactly round(B * negative_ratio)
negatives in a shuffled order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from vitac_common.exception import DataValidationError, ModelCompatibilityError, NumericError
from vitac_common.logger import get_logger
from vitac_common.seeding import derive_seed, substream
from vitac_data.dataset_io import load_dataset
from vitac_data.records import Dataset, Modality, Observation
from vitac_model.checkpoint import save_checkpoint
from vitac_model.config import ModelConfig, TrainConfig
from vitac_model.joint import JointModel, TripletGroup, build_model, model_forward_batch
from vitac_model.optim import AdamState, adam_step

log = get_logger(__name__)


class GroupSampler:
    """Draws `TripletGroup`s for one model's branch layout from a dataset."""

    def __init__(self, dataset: Dataset, model: JointModel):
        self.dataset = dataset
        self.branches = model.branches
        self.presses = [model.presses_for(b) for b in range(len(model.branches))]
        self.needs_labels = model.architecture.has_heads
        for mod in set(self.branches):
            if dataset.count(mod) == 0:
                raise DataValidationError(f"dataset has no {mod.value} observations")
        pool = set(dataset.fabric_ids)
        for mod in set(self.branches):
            pool &= set(dataset.view(mod).rows_by_fabric)
        self.pool = np.array(sorted(pool), dtype=np.int64)
        if len(self.pool) == 0:
            raise DataValidationError("no fabric is observed in every branch modality")
        clusters = {f.id: f.cluster_id for f in dataset.fabrics}
        if self.needs_labels and any(clusters[int(fid)] is None for fid in self.pool):
            raise DataValidationError("auxiliary training needs clustered fabrics")
        self.clusters = clusters

    def _observations(self, rng: np.random.Generator, fabric_id: int, mod: Modality, n: int) -> tuple[Observation, ...]:
        view = self.dataset.view(mod)
        rows = view.rows_by_fabric[fabric_id]
        picked = rng.choice(rows, size=n, replace=len(rows) < n)
        return tuple(
            Observation(fabric_id, mod, int(view.instance_indices[r]), view.features[r]) for r in picked
        )

    def sample(self, rng: np.random.Generator, negative_ratio: float = 0.5, label: int | None = None) -> TripletGroup:
        y = int(rng.random() < negative_ratio) if label is None else int(label)
        n_branches = len(self.branches)
        if y == 0:
            fabric_ids = [int(rng.choice(self.pool))] * n_branches
        else:
            if len(self.pool) < 2:
                raise DataValidationError("negative groups need at least two fabrics")
            while True:
                fabric_ids = [int(f) for f in rng.choice(self.pool, size=n_branches)]
                if len(set(fabric_ids)) > 1:
                    break
        branches = tuple(
            self._observations(rng, fid, mod, n)
            for fid, mod, n in zip(fabric_ids, self.branches, self.presses)
        )
        labels = tuple(self.clusters[f] for f in fabric_ids)
        return TripletGroup(
            branches=branches,
            y=y,
            cluster_labels=labels if all(c is not None for c in labels) else (),
        )

    def batch(self, rng: np.random.Generator, batch_size: int, negative_ratio: float) -> list[TripletGroup]:
        n_neg = negatives_per_batch(batch_size, negative_ratio)
        labels = rng.permutation(np.array([1] * n_neg + [0] * (batch_size - n_neg)))
        return [self.sample(rng, label=int(y)) for y in labels]


def negatives_per_batch(batch_size: int, negative_ratio: float) -> int:
    """round(B * ratio), halves rounded up."""
    return int(math.floor(batch_size * negative_ratio + 0.5))


def sample_group(
    dataset: Dataset,
    model: JointModel,
    rng: np.random.Generator,
    negative_ratio: float = 0.5,
    label: int | None = None,
) -> TripletGroup:
    return GroupSampler(dataset, model).sample(rng, negative_ratio, label)


@dataclass
class TrainResult:
    model: JointModel
    history: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.history[-1] if self.history else float("nan")


def check_compatible(model: JointModel, dataset: Dataset) -> None:
    if model.feature_dim != dataset.feature_dim:
        raise ModelCompatibilityError(
            f"model expects F={model.feature_dim} features, dataset has F={dataset.feature_dim}"
        )
    if model.architecture.has_heads:
        top = max((f.cluster_id for f in dataset.fabrics if f.cluster_id is not None), default=-1)
        if top >= model.n_classes:
            raise ModelCompatibilityError(
                f"dataset has cluster id {top}, model heads have {model.n_classes} classes"
            )


def train(
    model: JointModel,
    dataset: Dataset,
    config: TrainConfig,
    progress: bool = False,
) -> TrainResult:
    """Mean-gradient Adam on the training fabrics; a pure function of its inputs."""
    check_compatible(model, dataset)
    train_set = dataset.subset(dataset.train_ids)
    model = model.copy()
    model.train_config = config.model_dump(mode="json")
    if config.iterations == 0:
        return TrainResult(model=model, history=[])

    sampler = GroupSampler(train_set, model)
    rng = substream(config.master_seed, "batches")
    params = model.parameters()
    state = AdamState.for_params(params, config.learning_rate)
    history: list[float] = []
    for it in tqdm(range(config.iterations), desc=f"Training {model.architecture.value}", disable=not progress):
        groups = sampler.batch(rng, config.batch_size, config.negative_ratio)
        out = model_forward_batch(model, groups)
        if not np.isfinite(out.loss) or not all(np.all(np.isfinite(g)) for g in out.grads):
            raise NumericError(f"non-finite loss {out.loss} at iteration {it}; lower train.learning_rate")
        params, state = adam_step(params, out.grads, state)
        model = model.with_parameters(params)
        history.append(out.loss)
        if (it + 1) % max(1, config.iterations // 10) == 0:
            log.info("iteration %d/%d loss %.6f", it + 1, config.iterations, out.loss)
    return TrainResult(model=model, history=history)


def write_loss_csv(history: Sequence[float], path: Path, echo: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"iteration": np.arange(1, len(history) + 1), "loss": list(history)})
    with path.open("w", encoding="utf-8", newline="") as fh:
        for line in echo:
            fh.write(f"# {line}\n")
        frame.to_csv(fh, index=False, float_format="%.9g", lineterminator="\n")
    return path


class TrainPipeline:
    """Dataset file -> trained checkpoint + `iteration,loss` CSV."""

    def __init__(
        self,
        dataset_path: Path,
        checkpoint_path: Path,
        loss_csv_path: Path,
        model_config: ModelConfig | None = None,
        train_config: TrainConfig | None = None,
        echo: Sequence[str] = (),
    ):
        self.dataset_path = Path(dataset_path)
        self.checkpoint_path = Path(checkpoint_path)
        self.loss_csv_path = Path(loss_csv_path)
        self.model_config = model_config or ModelConfig()
        self.train_config = train_config or TrainConfig()
        self.echo = list(echo)

    def build(self, dataset: Dataset) -> JointModel:
        mc, tc = self.model_config, self.train_config
        model = build_model(
            mc.arch,
            feature_dim=dataset.feature_dim,
            embedding_dim=mc.embedding_dim,
            hidden_dims=mc.hidden,
            seed=derive_seed(tc.master_seed, "init"),
            branches=mc.branches,
            n_classes=mc.n_classes,
            margin=tc.margin,
            aux_weight=tc.aux_weight,
            presses=tc.n_presses,
        )
        model.backbone_seed = dataset.seeds.get("backbone_seed")
        return model

    def run(self, progress: bool = True) -> TrainResult:
        dataset = load_dataset(self.dataset_path)
        model = self.build(dataset)
        log.info("Training %s (F=%d, E=%d) on %d train fabrics for %d iterations",
                 model.architecture.value, model.feature_dim, model.embedding_dim,
                 len(dataset.train_ids), self.train_config.iterations)
        result = train(model, dataset, self.train_config, progress=progress)
        save_checkpoint(result.model, self.checkpoint_path)
        write_loss_csv(result.history, self.loss_csv_path, self.echo)
        return result
