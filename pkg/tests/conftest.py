import numpy as np
import pytest

from vitac_data.fabrics import generate_fabrics, latent_vector
from vitac_data.records import Dataset, FabricRecord, Modality, Observation
from vitac_data.split import cluster_and_split
from vitac_data.synth import SynthWorld, synthesize_dataset
from vitac_model.joint import Architecture, TripletGroup, build_model

TOY_COUNTS = {
    Modality.DEPTH: 3,
    Modality.COLOR: 3,
    Modality.TOUCH_FLAT: 3,
    Modality.TOUCH_FOLD: 4,
}


class IdentityEmbedder:
    """Embeds every modality as its raw features."""

    def embed(self, modality, features):
        return np.asarray(features, dtype=np.float64)


class ConstantEmbedder:
    def __init__(self, dim: int = 4):
        self.dim = dim

    def embed(self, modality, features):
        return np.zeros((len(features), self.dim))


def latent_dataset(n_fabrics: int, seed: int = 0, per_modality: int = 3, test_ids=()) -> Dataset:
    """Every observation's features are its fabric's true latents."""
    fabrics, _ = cluster_and_split(generate_fabrics(n_fabrics, seed), 2, seed, 0, seed)
    observations = [
        Observation(f.id, mod, k, latent_vector(f))
        for f in fabrics
        for mod in (Modality.DEPTH, Modality.COLOR, Modality.TOUCH_FOLD)
        for k in range(per_modality)
    ]
    return Dataset(fabrics=fabrics, observations=observations, feature_dim=4, test_ids=frozenset(test_ids))


def random_dataset(n_fabrics: int, seed: int = 0, per_modality: int = 5, dim: int = 8) -> Dataset:
    """Features independent of fabric identity."""
    rng = np.random.default_rng(seed)
    fabrics = [FabricRecord(i, 1.0, 3.0, 0, 150.0, cluster_id=i % 2) for i in range(n_fabrics)]
    observations = [
        Observation(f.id, mod, k, rng.standard_normal(dim))
        for f in fabrics
        for mod in (Modality.DEPTH, Modality.COLOR, Modality.TOUCH_FOLD)
        for k in range(per_modality)
    ]
    return Dataset(fabrics=fabrics, observations=observations, feature_dim=dim)


@pytest.fixture
def identity_embedder():
    return IdentityEmbedder()


@pytest.fixture(scope="session")
def toy_dataset() -> Dataset:
    fabrics, test_ids = cluster_and_split(generate_fabrics(12, 3), 3, 3, 2, 3)
    world = SynthWorld(seed=5, feature_dim=8)
    return synthesize_dataset(world, fabrics, TOY_COUNTS, test_ids)


def toy_model(arch, seed: int = 0, **kwargs):
    return build_model(arch, feature_dim=8, embedding_dim=4, hidden_dims=(6,), seed=seed, n_classes=3, **kwargs)


def toy_groups(model, dataset: Dataset, rng: np.random.Generator, n: int = 4) -> list[TripletGroup]:
    from vitac_model.pipeline.train_pipeline import GroupSampler

    sampler = GroupSampler(dataset, model)
    return [sampler.sample(rng, label=i % 2) for i in range(n)]


@pytest.fixture(params=list(Architecture), ids=lambda a: a.value)
def architecture(request):
    return request.param
