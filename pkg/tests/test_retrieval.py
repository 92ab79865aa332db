import numpy as np
import pytest

from conftest import ConstantEmbedder, latent_dataset, random_dataset
from vitac_common.exception import DataValidationError
from vitac_data.records import Modality
from vitac_eval.config import EvalConfig
from vitac_eval.retrieval import evaluation_fabrics, evaluation_pairs, pick_one_of_n, precision_grid, topk_precision


class TestPickOneOfN:
    def test_exact_match_first(self):
        cands = np.array([[5.0, 0.0], [0.0, 3.0], [2.0, 2.0], [1.0, 1.0], [-4.0, 0.0]])
        assert pick_one_of_n(np.array([1.0, 1.0]), cands)[0] == 3

    def test_ties_keep_index_order(self):
        cands = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        assert pick_one_of_n(np.zeros(2), cands).tolist() == [0, 1, 2]

    def test_hand_distances(self):
        cands = np.array([[5.0], [0.5], [2.0]])
        assert pick_one_of_n(np.zeros(1), cands).tolist() == [1, 2, 0]

    def test_monotone_transform(self):
        rng = np.random.default_rng(0)
        q, cands = rng.standard_normal(3), rng.standard_normal((9, 3))
        d = np.linalg.norm(cands - q, axis=1)
        assert pick_one_of_n(q, cands).tolist() == np.argsort(d ** 2, kind="stable").tolist()

    def test_empty(self):
        with pytest.raises(DataValidationError):
            pick_one_of_n(np.zeros(2), [])


class TestTopkPrecision:
    def test_oracle_embeddings_are_perfect(self, identity_embedder):
        data = latent_dataset(20, seed=1)
        cell = topk_precision(identity_embedder, data, Modality.DEPTH, Modality.COLOR, EvalConfig(repetitions=2))
        assert cell.top1 == 1.0
        assert cell.n_trials == 20 * 3 * 2

    def test_same_modality_excludes_the_query(self, identity_embedder):
        data = latent_dataset(12, seed=2)
        cell = topk_precision(identity_embedder, data, Modality.DEPTH, Modality.DEPTH, EvalConfig(repetitions=1))
        assert cell.top1 == 1.0

    def test_uninformative_embeddings_sit_at_chance(self, identity_embedder):
        data = random_dataset(40, seed=3)
        cell = topk_precision(identity_embedder, data, Modality.DEPTH, Modality.COLOR, EvalConfig(split="all"))
        assert cell.n_trials >= 1000
        assert 0.05 <= cell.top1 <= 0.17
        assert cell.top3 >= cell.top1

    def test_constant_embeddings_rank_by_shuffle(self):
        data = random_dataset(15, seed=4)
        cell = topk_precision(ConstantEmbedder(), data, Modality.COLOR, Modality.TOUCH_FOLD, EvalConfig(split="all"))
        assert 0.0 < cell.top1 < 0.3

    def test_deterministic_and_parallel_safe(self, identity_embedder):
        data = random_dataset(15, seed=5)
        serial = topk_precision(identity_embedder, data, Modality.DEPTH, Modality.COLOR, EvalConfig(split="all"))
        again = topk_precision(identity_embedder, data, Modality.DEPTH, Modality.COLOR, EvalConfig(split="all"))
        parallel = topk_precision(
            identity_embedder, data, Modality.DEPTH, Modality.COLOR, EvalConfig(split="all", workers=2)
        )
        assert serial == again == parallel

    def test_seed_changes_trials(self, identity_embedder):
        data = random_dataset(15, seed=6)
        a = topk_precision(identity_embedder, data, Modality.DEPTH, Modality.COLOR, EvalConfig(split="all", seed=0))
        b = topk_precision(identity_embedder, data, Modality.DEPTH, Modality.COLOR, EvalConfig(split="all", seed=1))
        assert a.n_trials == b.n_trials
        assert a.precision != b.precision

    def test_too_few_fabrics(self, identity_embedder):
        with pytest.raises(DataValidationError, match="distractor"):
            topk_precision(identity_embedder, latent_dataset(5), Modality.DEPTH, Modality.COLOR)

    def test_smaller_candidate_sets(self, identity_embedder):
        config = EvalConfig(n_candidates=4, n_distractor_fabrics=3, top_ks="1,2", split="all")
        cell = topk_precision(identity_embedder, latent_dataset(5), Modality.COLOR, Modality.DEPTH, config)
        assert cell.precision == {1: 1.0, 2: 1.0}

    def test_test_split_by_default(self):
        data = latent_dataset(14, test_ids=range(10))
        assert evaluation_fabrics(data) == list(range(10))
        assert evaluation_fabrics(data, "train") == [10, 11, 12, 13]
        assert evaluation_fabrics(latent_dataset(4)) == [0, 1, 2, 3]


class TestPrecisionGrid:
    def test_every_ordered_pair(self, identity_embedder):
        mods = [Modality.DEPTH, Modality.COLOR, Modality.TOUCH_FOLD]
        assert len(evaluation_pairs(mods)) == 9
        report = precision_grid(identity_embedder, latent_dataset(10), mods, EvalConfig(repetitions=1))
        assert len(report.cells) == 9
        assert report.cell("touch_fold", "depth").top1 == 1.0
        frame = report.to_frame()
        assert list(frame.columns) == ["query", "candidate", "top1", "top3", "n_trials"]

    def test_missing_modality_is_skipped(self, identity_embedder):
        report = precision_grid(
            identity_embedder, latent_dataset(10), [Modality.DEPTH, Modality.TOUCH_FLAT], EvalConfig(repetitions=1)
        )
        assert [c.label for c in report.cells] == ["depth->depth"]


def test_untrained_model_grid_sits_at_chance():
    from vitac_model.joint import Architecture, build_model

    data = random_dataset(40, seed=11)
    model = build_model(Architecture.CROSS_MODAL, feature_dim=8, embedding_dim=4, hidden_dims=(6,), seed=0)
    report = precision_grid(model, data, model.modalities, EvalConfig(split="all"))
    assert len(report.cells) == 9
    for cell in report.cells:
        assert cell.n_trials >= 1000
        assert 0.05 <= cell.top1 <= 0.17, cell.label
