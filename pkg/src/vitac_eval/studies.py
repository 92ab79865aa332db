"""
Directional experiments on the synthetic world.

Each study builds a fresh world per seed, trains the competing models on the
same split and returns one row per seed. Absolute numbers mean little at this
scale; the orderings are what the studies check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import pandas as pd

from vitac_common.logger import get_logger
from vitac_common.seeding import derive_seed
from vitac_data.fabrics import generate_fabrics
from vitac_data.records import Dataset, Modality
from vitac_data.split import cluster_and_split
from vitac_data.synth import SynthWorld, synthesize_dataset
from vitac_eval.config import EvalConfig
from vitac_eval.retrieval import topk_precision
from vitac_model.config import TrainConfig
from vitac_model.joint import Architecture, JointModel, build_model
from vitac_model.pipeline.train_pipeline import train

log = get_logger(__name__)


@dataclass(frozen=True)
class StudySetup:
    n_fabrics: int = 50
    n_test: int = 10
    k: int = 8
    noise_std: float = 0.05
    feature_dim: int = 32
    embedding_dim: int = 32
    hidden_dims: tuple[int, ...] = (64,)
    iterations: int = 2000
    batch_size: int = 32
    learning_rate: float = 1e-3
    repetitions: int = 3


def build_world_dataset(setup: StudySetup, seed: int) -> Dataset:
    fabrics = generate_fabrics(setup.n_fabrics, derive_seed(seed, "fabrics"))
    clustered, test_ids = cluster_and_split(
        fabrics, setup.k, derive_seed(seed, "cluster"), setup.n_test, derive_seed(seed, "split")
    )
    world = SynthWorld(seed=derive_seed(seed, "world"), feature_dim=setup.feature_dim, noise_std=setup.noise_std)
    return synthesize_dataset(world, clustered, test_ids=test_ids)


def train_model(
    setup: StudySetup,
    dataset: Dataset,
    arch: Architecture,
    seed: int,
    branches: Sequence[Modality] | None = None,
) -> JointModel:
    model = build_model(
        arch,
        feature_dim=dataset.feature_dim,
        embedding_dim=setup.embedding_dim,
        hidden_dims=setup.hidden_dims,
        seed=derive_seed(seed, "init"),
        branches=branches,
        n_classes=setup.k,
    )
    config = TrainConfig(
        learning_rate=setup.learning_rate,
        batch_size=setup.batch_size,
        iterations=setup.iterations,
        master_seed=seed,
    )
    return train(model, dataset, config).model


def _top1(setup: StudySetup, model: JointModel, dataset: Dataset, query: Modality, cand: Modality,
          seed: int, fabric_ids: Sequence[int] | None = None) -> float:
    config = EvalConfig(repetitions=setup.repetitions, seed=seed)
    return topk_precision(model, dataset, query, cand, config, fabric_ids).top1


def flat_vs_fold(setup: StudySetup, seeds: Sequence[int]) -> pd.DataFrame:
    """Touch->depth top-1 of the three-branch net with flat versus fold presses."""
    rows = []
    for seed in seeds:
        dataset = build_world_dataset(setup, seed)
        row = {"seed": seed}
        for touch in (Modality.TOUCH_FLAT, Modality.TOUCH_FOLD):
            model = train_model(setup, dataset, Architecture.CROSS_MODAL, seed,
                                branches=(Modality.DEPTH, Modality.COLOR, touch))
            row[touch.value] = _top1(setup, model, dataset, touch, Modality.DEPTH, seed)
        log.info("flat_vs_fold seed %d: %s", seed, row)
        rows.append(row)
    return pd.DataFrame(rows)


def architecture_comparison(
    setup: StudySetup,
    seeds: Sequence[int],
    archs: Sequence[Architecture] = (Architecture.CROSS_MODAL, Architecture.AUXILIARY, Architecture.MULTI_INPUT),
) -> pd.DataFrame:
    """Fold-touch->depth top-1 for each three-branch architecture on one shared split per seed."""
    rows = []
    for seed in seeds:
        dataset = build_world_dataset(setup, seed)
        row = {"seed": seed}
        for arch in archs:
            model = train_model(setup, dataset, Architecture(arch), seed)
            row[Architecture(arch).value] = _top1(setup, model, dataset, Modality.TOUCH_FOLD, Modality.DEPTH, seed)
        log.info("architecture_comparison seed %d: %s", seed, row)
        rows.append(row)
    return pd.DataFrame(rows)


def touch_helps_vision(setup: StudySetup, seeds: Sequence[int], fraction: float = 0.8) -> pd.DataFrame:
    """
    Depth->depth top-1 of a depth-only Siamese net against a depth+touch joint net.

    Both train on `fraction` of each training fabric's observations. `seen_*`
    columns score the held-out observations of the training fabrics, `novel_*`
    columns the test fabrics.
    """
    rows = []
    for seed in seeds:
        dataset = build_world_dataset(setup, seed)
        kept, held = dataset.subset(dataset.train_ids).split_instances(fraction, derive_seed(seed, "instances"))
        test_ids = sorted(dataset.test_ids)
        row = {"seed": seed}
        for name, branches in (("snn", (Modality.DEPTH, Modality.DEPTH)),
                               ("joint", (Modality.DEPTH, Modality.TOUCH_FOLD))):
            model = train_model(setup, kept, Architecture.SNN2, seed, branches=branches)
            row[f"seen_{name}"] = _top1(setup, model, held, Modality.DEPTH, Modality.DEPTH, seed,
                                        fabric_ids=held.fabric_ids)
            row[f"novel_{name}"] = _top1(setup, model, dataset, Modality.DEPTH, Modality.DEPTH, seed,
                                         fabric_ids=test_ids)
        log.info("touch_helps_vision seed %d: %s", seed, row)
        rows.append(row)
    return pd.DataFrame(rows)
