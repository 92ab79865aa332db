"""
Synthetic fabric world: latent physical parameters -> per-modality features.

Every modality owns a fixed, seeded two-layer tanh network that maps the
latents it can see to F features. Per-instance variation comes from three
sources, all drawn from a stream keyed by (world seed, fabric, modality,
instance seed):

* contact jitter on the exposed latents (touch presses only),
* nuisance latents that enter through a fixed linear channel
  (drape for depth and color, hue for color, press pose for touch),
* isotropic sensor noise of scale `noise_std`.

Flat presses only see stretch and density; fold presses also see thickness
and stiffness.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from vitac_common.exception import DataValidationError
from vitac_common.logger import get_logger
from vitac_common.seeding import substream
from vitac_data.fabrics import latent_vector
from vitac_data.records import (
    DEFAULT_INSTANCE_COUNTS,
    Dataset,
    FabricRecord,
    Modality,
    Observation,
)

log = get_logger(__name__)

LATENT_DIM = 4
THICKNESS, STIFFNESS, STRETCH, DENSITY = range(LATENT_DIM)

MODALITY_MASKS: dict[Modality, tuple[int, ...]] = {
    Modality.DEPTH: (THICKNESS, STIFFNESS, STRETCH, DENSITY),
    Modality.COLOR: (THICKNESS, STIFFNESS, STRETCH, DENSITY),
    Modality.TOUCH_FLAT: (STRETCH, DENSITY),
    Modality.TOUCH_FOLD: (THICKNESS, STIFFNESS, STRETCH, DENSITY),
}

# drape | drape + hue | press pose
NUISANCE_DIMS: dict[Modality, int] = {
    Modality.DEPTH: 1,
    Modality.COLOR: 2,
    Modality.TOUCH_FLAT: 1,
    Modality.TOUCH_FOLD: 1,
}

JITTERED = frozenset({Modality.TOUCH_FLAT, Modality.TOUCH_FOLD})


@dataclass(frozen=True)
class ObservationMap:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    nuisance: np.ndarray

    def clean(self, exposed: np.ndarray) -> np.ndarray:
        return np.tanh(self.w2 @ np.tanh(self.w1 @ exposed + self.b1) + self.b2)


@dataclass(frozen=True)
class SynthWorld:
    seed: int
    feature_dim: int = 32
    noise_std: float = 0.05
    hidden_width: int = 32
    nuisance_scale: float = 0.15
    contact_jitter: float = 0.1

    def __post_init__(self) -> None:
        if self.feature_dim < 1 or self.hidden_width < 1:
            raise DataValidationError("feature_dim and hidden_width must be >= 1")
        if self.noise_std < 0 or self.nuisance_scale < 0 or self.contact_jitter < 0:
            raise DataValidationError("noise, nuisance and jitter scales must be non-negative")

    @cached_property
    def maps(self) -> dict[Modality, ObservationMap]:
        maps = {}
        for mod in Modality:
            rng = substream(self.seed, "observation-map", mod.value)
            n_in = len(MODALITY_MASKS[mod])
            maps[mod] = ObservationMap(
                w1=rng.normal(0.0, 1.5 / np.sqrt(n_in), size=(self.hidden_width, n_in)),
                b1=rng.normal(0.0, 0.5, size=self.hidden_width),
                w2=rng.normal(0.0, 1.5 / np.sqrt(self.hidden_width), size=(self.feature_dim, self.hidden_width)),
                b2=rng.normal(0.0, 0.1, size=self.feature_dim),
                nuisance=rng.normal(0.0, self.nuisance_scale, size=(self.feature_dim, NUISANCE_DIMS[mod])),
            )
        return maps

    def _instance_draws(
        self, fabric: FabricRecord, modality: Modality, instance_seed: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rng = substream(self.seed, "observation", fabric.id, modality.value, instance_seed)
        jitter = rng.standard_normal(LATENT_DIM)
        nuisance = rng.standard_normal(NUISANCE_DIMS[modality])
        noise = rng.standard_normal(self.feature_dim)
        return jitter, nuisance, noise

    def exposed_latents(
        self, fabric: FabricRecord, modality: Modality, instance_seed: int | None = None
    ) -> np.ndarray:
        """Latents the modality sees for one instance; `None` gives the jitter-free values."""
        modality = _check_modality(modality)
        latents = latent_vector(fabric)
        if instance_seed is not None and modality in JITTERED:
            jitter, _, _ = self._instance_draws(fabric, modality, instance_seed)
            latents = latents + self.contact_jitter * jitter
        return latents[list(MODALITY_MASKS[modality])]

    def clean_features(self, fabric: FabricRecord, modality: Modality) -> np.ndarray:
        """Noiseless, nuisance-free and jitter-free output of the modality map."""
        modality = _check_modality(modality)
        return self.maps[modality].clean(self.exposed_latents(fabric, modality))


def _check_modality(modality: Modality | str) -> Modality:
    try:
        return Modality(modality)
    except ValueError as exc:
        raise DataValidationError(f"unknown modality {modality!r}") from exc


def synth_observe(
    world: SynthWorld,
    fabric: FabricRecord,
    modality: Modality,
    instance_seed: int,
    instance_index: int | None = None,
) -> Observation:
    modality = _check_modality(modality)
    mapping = world.maps[modality]
    jitter, nuisance, noise = world._instance_draws(fabric, modality, instance_seed)

    latents = latent_vector(fabric)
    if modality in JITTERED:
        latents = latents + world.contact_jitter * jitter
    exposed = latents[list(MODALITY_MASKS[modality])]

    features = mapping.clean(exposed) + mapping.nuisance @ nuisance + world.noise_std * noise
    return Observation(
        fabric_id=fabric.id,
        modality=modality,
        instance_index=instance_seed if instance_index is None else instance_index,
        features=features,
    )


def synthesize_dataset(
    world: SynthWorld,
    fabrics: Sequence[FabricRecord],
    counts: Mapping[Modality, int] | None = None,
    test_ids: Sequence[int] = (),
    seeds: Mapping[str, int] | None = None,
) -> Dataset:
    """All observations of all fabrics; instance k of a modality uses instance seed k."""
    counts = dict(DEFAULT_INSTANCE_COUNTS if counts is None else counts)
    observations = [
        synth_observe(world, fabric, mod, instance_seed=k)
        for fabric in fabrics
        for mod in Modality
        for k in range(counts.get(mod, 0))
    ]
    log.info(
        "Synthesized %d observations for %d fabrics (F=%d, noise_std=%.3g)",
        len(observations), len(fabrics), world.feature_dim, world.noise_std,
    )
    return Dataset(
        fabrics=list(fabrics),
        observations=observations,
        feature_dim=world.feature_dim,
        test_ids=frozenset(test_ids),
        seeds={"world_seed": world.seed, **(dict(seeds) if seeds else {})},
    )
