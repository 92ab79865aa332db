import numpy as np
import pytest

from conftest import toy_groups, toy_model
from vitac_common.exception import DataValidationError, ModelCompatibilityError
from vitac_data.records import Modality, Observation
from vitac_model.gradcheck import finite_diff_params, relative_error
from vitac_model import assoc, joint
from vitac_model.heads import classify_cluster
from vitac_model.joint import Architecture, JointModel, TripletGroup, model_forward, model_forward_batch


def _zeroed(model):
    return model.with_parameters([np.zeros_like(p) for p in model.parameters()])


def _obs(fid, mod=Modality.DEPTH, dim=8):
    return Observation(fid, mod, 0, np.zeros(dim))


class TestTripletGroup:
    def test_labels_follow_fabrics(self):
        same = TripletGroup(((_obs(1),), (_obs(1),), (_obs(1),)), y=0)
        assert same.fabric_ids == (1, 1, 1)
        with pytest.raises(DataValidationError):
            TripletGroup(((_obs(1),), (_obs(2),), (_obs(1),)), y=0)
        with pytest.raises(DataValidationError):
            TripletGroup(((_obs(1),), (_obs(1),), (_obs(1),)), y=1)

    def test_branch_shares_one_fabric(self):
        with pytest.raises(DataValidationError):
            TripletGroup(((_obs(1),), (_obs(2), _obs(3))), y=1)

    def test_label_count(self):
        with pytest.raises(DataValidationError):
            TripletGroup(((_obs(1),), (_obs(2),)), y=1, cluster_labels=(0,))


class TestJointModel:
    def test_siamese_shares_one_encoder(self):
        model = toy_model(Architecture.SNN2)
        assert model.modalities == [Modality.DEPTH]
        assert len(model.encoders) == 1
        assert len(model.parameters()) == 4

    def test_heads_only_on_auxiliary_architectures(self, architecture):
        model = toy_model(architecture)
        assert bool(model.heads) == architecture.has_heads
        assert model.presses == (3 if architecture is Architecture.MULTI_INPUT else 1)

    def test_rejects_stray_heads(self):
        aux = toy_model(Architecture.AUXILIARY)
        with pytest.raises(ModelCompatibilityError):
            JointModel(Architecture.CROSS_MODAL, aux.branches, aux.encoders, heads=aux.heads)

    def test_copy_is_independent(self):
        model = toy_model(Architecture.CROSS_MODAL)
        clone = model.copy()
        clone.parameters()[0][0, 0] += 1.0
        assert clone.parameters()[0][0, 0] != model.parameters()[0][0, 0]


class TestForward:
    def test_zero_weights_positive_group(self, toy_dataset):
        model = _zeroed(toy_model(Architecture.CROSS_MODAL))
        group = toy_groups(model, toy_dataset, np.random.default_rng(0), n=1)[0]
        assert group.y == 0
        out = model_forward(model, group)
        assert out.distance == 0.0
        assert out.loss == 0.0
        assert all(np.all(e == 0) for e in out.embeddings)

    def test_constant_encoder_pays_for_negatives(self, toy_dataset, architecture):
        model = _zeroed(toy_model(architecture))
        groups = toy_groups(model, toy_dataset, np.random.default_rng(1), n=4)
        out = model_forward_batch(model, groups)
        assert np.all(out.distances == 0.0)
        assert out.loss > 0.0

    def test_auxiliary_adds_cluster_losses(self, toy_dataset):
        aux = toy_model(Architecture.AUXILIARY, seed=4)
        cross = JointModel(Architecture.CROSS_MODAL, aux.branches, aux.encoders)
        groups = toy_groups(aux, toy_dataset, np.random.default_rng(2), n=6)
        a = model_forward_batch(aux, groups)
        c = model_forward_batch(cross, groups)
        labels = np.array([g.cluster_labels for g in groups])
        ce = sum(
            classify_cluster(aux.heads[mod], a.embeddings[b], labels[:, b]).loss
            for b, mod in enumerate(aux.branches)
        )
        np.testing.assert_allclose(a.losses, c.losses + ce, rtol=1e-12)

    def test_zero_aux_weight_matches_cross_modal_exactly(self, toy_dataset):
        aux = toy_model(Architecture.AUXILIARY, seed=5, aux_weight=0.0)
        cross = JointModel(Architecture.CROSS_MODAL, aux.branches, aux.encoders)
        groups = toy_groups(aux, toy_dataset, np.random.default_rng(3), n=6)
        assert model_forward_batch(aux, groups).loss == model_forward_batch(cross, groups).loss

    def test_batch_loss_is_mean_of_singles(self, toy_dataset, architecture):
        model = toy_model(architecture, seed=6)
        groups = toy_groups(model, toy_dataset, np.random.default_rng(4), n=5)
        batch = model_forward_batch(model, groups)
        singles = [model_forward(model, g).loss for g in groups]
        assert batch.loss == pytest.approx(np.mean(singles), rel=1e-12)

    def test_multi_input_fuses_presses(self, toy_dataset):
        model = toy_model(Architecture.MULTI_INPUT, seed=7)
        group = toy_groups(model, toy_dataset, np.random.default_rng(5), n=1)[0]
        assert len(group.x3) == 3
        out = model_forward(model, group)
        presses = model.embed(Modality.TOUCH_FOLD, np.stack([o.features for o in group.x3]))
        np.testing.assert_allclose(out.embeddings[2], presses.max(axis=0))

    def test_multi_input_routes_through_fuse_max(self, toy_dataset, monkeypatch):
        calls = {"forward": 0, "backward": 0}

        def counting_forward(embeddings):
            calls["forward"] += 1
            return assoc.fuse_max(embeddings)

        def counting_backward(grad, winners, n_inputs):
            calls["backward"] += 1
            return assoc.fuse_max_backward(grad, winners, n_inputs)

        monkeypatch.setattr(joint, "fuse_max", counting_forward)
        monkeypatch.setattr(joint, "fuse_max_backward", counting_backward)
        model = toy_model(Architecture.MULTI_INPUT, seed=7)
        groups = toy_groups(model, toy_dataset, np.random.default_rng(5), n=3)
        model_forward_batch(model, groups)
        assert calls == {"forward": 1, "backward": 1}

    def test_mismatched_group(self, toy_dataset):
        multi = toy_model(Architecture.MULTI_INPUT)
        groups = toy_groups(multi, toy_dataset, np.random.default_rng(6), n=2)
        with pytest.raises(ModelCompatibilityError):
            model_forward_batch(toy_model(Architecture.CROSS_MODAL), groups)
        with pytest.raises(ModelCompatibilityError):
            model_forward_batch(toy_model(Architecture.SNN2), groups)

    @pytest.mark.parametrize("seed", range(10))
    def test_gradients_match_finite_differences(self, toy_dataset, architecture, seed):
        model = toy_model(architecture, seed=seed)
        groups = toy_groups(model, toy_dataset, np.random.default_rng(100 + seed), n=4)
        analytic = model_forward_batch(model, groups).grads
        work = model.copy()
        numeric = finite_diff_params(lambda: model_forward_batch(work, groups).loss, work.parameters(), eps=1e-6)
        assert relative_error(analytic, numeric) <= 1e-4
