import dataclasses

import numpy as np
import pandas as pd
import pytest

from conftest import random_dataset, toy_model
from vitac_common.exception import DataValidationError, ModelCompatibilityError, NumericError
from vitac_data.dataset_io import save_dataset
from vitac_data.fabrics import generate_fabrics
from vitac_data.records import Dataset, Modality
from vitac_data.split import cluster_and_split
from vitac_data.synth import SynthWorld, synthesize_dataset
from vitac_model.checkpoint import checkpoint_to_bytes, load_checkpoint
from vitac_model.config import ModelConfig, TrainConfig
from vitac_model.joint import Architecture, build_model
from vitac_model.pipeline import train_pipeline
from vitac_model.pipeline.train_pipeline import (
    GroupSampler,
    TrainPipeline,
    check_compatible,
    negatives_per_batch,
    sample_group,
    train,
    write_loss_csv,
)

SMALL = TrainConfig(batch_size=4, iterations=5, master_seed=3)


class TestSampling:
    def test_positive_and_negative_groups(self, toy_dataset, architecture):
        model = toy_model(architecture)
        rng = np.random.default_rng(0)
        pos = sample_group(toy_dataset, model, rng, label=0)
        neg = sample_group(toy_dataset, model, rng, label=1)
        assert len(set(pos.fabric_ids)) == 1
        assert len(set(neg.fabric_ids)) >= 2
        for b, mod in enumerate(model.branches):
            assert all(o.modality is mod for o in pos.branches[b])
        if architecture.has_heads:
            clusters = toy_dataset.fabric_index
            assert neg.cluster_labels == tuple(clusters[f].cluster_id for f in neg.fabric_ids)

    def test_negative_frequency(self, toy_dataset):
        sampler = GroupSampler(toy_dataset, toy_model(Architecture.CROSS_MODAL))
        rng = np.random.default_rng(1)
        ys = [sampler.sample(rng, 0.5).y for _ in range(10_000)]
        assert 0.47 <= np.mean(ys) <= 0.53

    @pytest.mark.parametrize("batch_size,ratio,expected", [(32, 0.5, 16), (7, 0.5, 4), (10, 0.25, 3), (128, 0.5, 64)])
    def test_exact_negatives_per_batch(self, toy_dataset, batch_size, ratio, expected):
        assert negatives_per_batch(batch_size, ratio) == expected
        sampler = GroupSampler(toy_dataset, toy_model(Architecture.SNN2))
        batch = sampler.batch(np.random.default_rng(2), batch_size, ratio)
        assert len(batch) == batch_size
        assert sum(g.y for g in batch) == expected

    def test_missing_modality(self, toy_dataset):
        depth = [o for o in toy_dataset.observations if o.modality is Modality.DEPTH]
        data = Dataset(toy_dataset.fabrics, depth, toy_dataset.feature_dim)
        with pytest.raises(DataValidationError):
            GroupSampler(data, toy_model(Architecture.CROSS_MODAL))

    def test_auxiliary_needs_clusters(self):
        base = random_dataset(4, dim=8)
        fabrics = [dataclasses.replace(f, cluster_id=None) for f in base.fabrics]
        data = Dataset(fabrics, base.observations, base.feature_dim)
        with pytest.raises(DataValidationError):
            GroupSampler(data, toy_model(Architecture.AUXILIARY))


class TestTrain:
    def test_zero_iterations_leaves_model_unchanged(self, toy_dataset):
        model = toy_model(Architecture.AUXILIARY)
        result = train(model, toy_dataset, SMALL.model_copy(update={"iterations": 0}))
        assert result.history == []
        for a, b in zip(result.model.parameters(), model.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_history_length_and_finiteness(self, toy_dataset, architecture):
        result = train(toy_model(architecture), toy_dataset, SMALL)
        assert len(result.history) == SMALL.iterations
        assert np.all(np.isfinite(result.history))
        assert result.final_loss == result.history[-1]

    def test_deterministic(self, toy_dataset):
        a = train(toy_model(Architecture.MULTI_INPUT, seed=1), toy_dataset, SMALL)
        b = train(toy_model(Architecture.MULTI_INPUT, seed=1), toy_dataset, SMALL)
        assert a.history == b.history
        assert checkpoint_to_bytes(a.model) == checkpoint_to_bytes(b.model)

    def test_does_not_mutate_input_model(self, toy_dataset):
        model = toy_model(Architecture.CROSS_MODAL)
        before = [p.copy() for p in model.parameters()]
        train(model, toy_dataset, SMALL)
        for a, b in zip(model.parameters(), before):
            np.testing.assert_array_equal(a, b)

    def test_records_config_echo(self, toy_dataset):
        result = train(toy_model(Architecture.CROSS_MODAL), toy_dataset, SMALL)
        assert result.model.train_config["batch_size"] == 4

    def test_non_finite_loss_aborts(self, toy_dataset, monkeypatch):
        real = train_pipeline.model_forward_batch

        def poisoned(model, groups):
            return dataclasses.replace(real(model, groups), loss=float("nan"))

        monkeypatch.setattr(train_pipeline, "model_forward_batch", poisoned)
        with pytest.raises(NumericError, match="iteration 0"):
            train(toy_model(Architecture.CROSS_MODAL), toy_dataset, SMALL)

    def test_feature_dim_mismatch(self):
        with pytest.raises(ModelCompatibilityError):
            check_compatible(toy_model(Architecture.CROSS_MODAL), random_dataset(4, dim=5))

    def test_too_few_head_classes(self, toy_dataset):
        model = build_model(Architecture.AUXILIARY, feature_dim=8, embedding_dim=4, hidden_dims=(6,), n_classes=2)
        with pytest.raises(ModelCompatibilityError):
            train(model, toy_dataset, SMALL)

    @pytest.mark.slow
    def test_loss_decreases_on_noiseless_world(self):
        fabrics, test_ids = cluster_and_split(generate_fabrics(20, 0), 4, 0, 0, 0)
        data = synthesize_dataset(SynthWorld(seed=1, feature_dim=16, noise_std=0.0), fabrics, test_ids=test_ids)
        model = build_model(Architecture.CROSS_MODAL, feature_dim=16, embedding_dim=16, hidden_dims=(32,), seed=2)
        history = train(model, data, TrainConfig(batch_size=16, iterations=600, master_seed=2)).history
        tenth = len(history) // 10
        assert np.mean(history[-tenth:]) < np.mean(history[:tenth])


class TestPipeline:
    def test_loss_csv(self, tmp_path):
        path = write_loss_csv([1.5, 0.25], tmp_path / "out" / "loss.csv", echo=["train.iterations = 2"])
        assert path.read_text() == "# train.iterations = 2\niteration,loss\n1,1.5\n2,0.25\n"

    def test_run_writes_checkpoint_and_history(self, tmp_path, toy_dataset):
        save_dataset(toy_dataset, tmp_path / "d.gfds")
        pipeline = TrainPipeline(
            dataset_path=tmp_path / "d.gfds",
            checkpoint_path=tmp_path / "runs" / "m.gfab",
            loss_csv_path=tmp_path / "runs" / "loss.csv",
            model_config=ModelConfig(arch="auxiliary", embedding_dim=4, hidden_dims="6", n_classes=3),
            train_config=SMALL,
        )
        result = pipeline.run(progress=False)
        model = load_checkpoint(tmp_path / "runs" / "m.gfab")
        assert model.architecture is Architecture.AUXILIARY
        assert model.feature_dim == toy_dataset.feature_dim
        frame = pd.read_csv(tmp_path / "runs" / "loss.csv", comment="#")
        assert list(frame.columns) == ["iteration", "loss"]
        assert frame["loss"].tolist() == pytest.approx(result.history, rel=1e-8)
