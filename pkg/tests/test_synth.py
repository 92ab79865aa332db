import numpy as np
import pytest

from vitac_data.fabrics import generate_fabrics
from vitac_data.records import FabricRecord, Modality
from vitac_data.synth import SynthWorld, synth_observe, synthesize_dataset


@pytest.fixture(scope="module")
def world():
    return SynthWorld(seed=21, feature_dim=32)


class TestObservations:
    def test_deterministic(self, world):
        f = generate_fabrics(3, seed=0)[1]
        a = synth_observe(world, f, Modality.COLOR, instance_seed=4)
        b = synth_observe(world, f, Modality.COLOR, instance_seed=4)
        np.testing.assert_array_equal(a.features, b.features)
        assert a.features.shape == (32,)

    def test_instances_differ(self, world):
        f = generate_fabrics(3, seed=0)[1]
        a = synth_observe(world, f, Modality.DEPTH, instance_seed=0)
        b = synth_observe(world, f, Modality.DEPTH, instance_seed=1)
        assert not np.array_equal(a.features, b.features)

    def test_flat_press_ignores_thickness_and_stiffness(self):
        world = SynthWorld(seed=3, noise_std=0.0, nuisance_scale=0.0, contact_jitter=0.0)
        thin = FabricRecord(0, 0.2, 1.0, 1, 200.0)
        thick = FabricRecord(1, 4.0, 5.0, 1, 200.0)
        np.testing.assert_array_equal(
            world.clean_features(thin, Modality.TOUCH_FLAT), world.clean_features(thick, Modality.TOUCH_FLAT)
        )
        assert not np.allclose(
            world.clean_features(thin, Modality.TOUCH_FOLD), world.clean_features(thick, Modality.TOUCH_FOLD)
        )

    def test_instance_average_recovers_clean_output(self, world):
        f = generate_fabrics(2, seed=5)[0]
        feats = np.stack([synth_observe(world, f, Modality.DEPTH, k).features for k in range(200)])
        err = np.linalg.norm(feats.mean(axis=0) - world.clean_features(f, Modality.DEPTH))
        bound = 3.0 * np.sqrt(feats.var(axis=0, ddof=1).sum() / len(feats))
        assert err <= bound

    def test_noise_free_depth_has_only_nuisance(self):
        world = SynthWorld(seed=8, noise_std=0.0, nuisance_scale=0.0)
        f = generate_fabrics(2, seed=1)[0]
        np.testing.assert_allclose(
            synth_observe(world, f, Modality.DEPTH, 3).features, world.clean_features(f, Modality.DEPTH), atol=1e-15
        )


def test_fold_press_identifies_fabrics_better_than_flat(world):
    fabrics = generate_fabrics(30, seed=6)

    def nearest_neighbour_accuracy(mod):
        refs = np.stack([world.exposed_latents(f, mod) for f in fabrics])
        hits = 0
        for i, f in enumerate(fabrics):
            for k in range(10):
                sample = world.exposed_latents(f, mod, instance_seed=k)
                hits += int(np.argmin(np.linalg.norm(refs - sample, axis=1)) == i)
        return hits / (10 * len(fabrics))

    assert nearest_neighbour_accuracy(Modality.TOUCH_FOLD) > nearest_neighbour_accuracy(Modality.TOUCH_FLAT)


def test_synthesize_dataset_counts(world):
    fabrics = generate_fabrics(4, seed=0)
    ds = synthesize_dataset(world, fabrics, test_ids=[3])
    assert ds.count(Modality.DEPTH) == 40
    assert ds.count(Modality.TOUCH_FOLD) == 60
    assert len(ds.observations) == 4 * 45
    assert ds.test_ids == frozenset({3})
    assert ds.seeds["world_seed"] == 21
