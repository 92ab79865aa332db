"""
Fabric records, observations and the in-memory dataset.

A `Dataset` owns a flat list of observations plus per-modality views (fabric
id vector, feature matrix, row lookup) built once on first use.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Iterable

import numpy as np
import pandas as pd

from vitac_common.exception import DataValidationError
from vitac_common.seeding import substream


class Modality(str, Enum):
    DEPTH = "depth"
    COLOR = "color"
    TOUCH_FLAT = "touch_flat"
    TOUCH_FOLD = "touch_fold"

    @property
    def code(self) -> int:
        return _MODALITY_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Modality":
        for mod, c in _MODALITY_CODES.items():
            if c == code:
                return mod
        raise DataValidationError(f"unknown modality code {code}")

    @classmethod
    def parse(cls, text: str) -> "Modality":
        key = text.strip().lower().replace("-", "_")
        if key == "touch":
            return cls.TOUCH_FOLD
        try:
            return cls(key)
        except ValueError as exc:
            raise DataValidationError(f"unknown modality {text!r}") from exc


_MODALITY_CODES = {
    Modality.DEPTH: 0,
    Modality.COLOR: 1,
    Modality.TOUCH_FLAT: 2,
    Modality.TOUCH_FOLD: 3,
}

# Instances per fabric in the captured collection: 10 depth, 10 color,
# 10 flat presses and 15 fold presses.
DEFAULT_INSTANCE_COUNTS: dict[Modality, int] = {
    Modality.DEPTH: 10,
    Modality.COLOR: 10,
    Modality.TOUCH_FLAT: 10,
    Modality.TOUCH_FOLD: 15,
}

ATTRIBUTE_COLUMNS = ("thickness_mm", "stiffness_score", "stretch_level", "density_gsm")


@dataclass(frozen=True)
class FabricRecord:
    id: int
    thickness_mm: float
    stiffness_score: float
    stretch_level: int
    density_gsm: float
    cluster_id: int | None = None

    def __post_init__(self) -> None:
        if not self.thickness_mm > 0:
            raise DataValidationError(f"fabric {self.id}: thickness must be positive")
        if not 0.0 <= self.stiffness_score <= 6.0:
            raise DataValidationError(f"fabric {self.id}: stiffness {self.stiffness_score} not in [0, 6]")
        if self.stretch_level not in (0, 1, 2):
            raise DataValidationError(f"fabric {self.id}: stretch level {self.stretch_level} not in {{0,1,2}}")
        if not self.density_gsm > 0:
            raise DataValidationError(f"fabric {self.id}: density must be positive")

    def attributes(self) -> tuple[float, float, float, float]:
        return (self.thickness_mm, self.stiffness_score, float(self.stretch_level), self.density_gsm)

    def with_cluster(self, cluster_id: int | None) -> "FabricRecord":
        return replace(self, cluster_id=None if cluster_id is None else int(cluster_id))


@dataclass(frozen=True)
class Observation:
    fabric_id: int
    modality: Modality
    instance_index: int
    features: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.instance_index < 0:
            raise DataValidationError("instance_index must be >= 0")
        if not np.all(np.isfinite(self.features)):
            raise DataValidationError(
                f"non-finite features for fabric {self.fabric_id} {self.modality.value}#{self.instance_index}"
            )


@dataclass
class ModalityView:
    """Column-oriented view of one modality's observations."""

    fabric_ids: np.ndarray
    instance_indices: np.ndarray
    features: np.ndarray
    rows_by_fabric: dict[int, np.ndarray]


@dataclass
class Dataset:
    fabrics: list[FabricRecord]
    observations: list[Observation]
    feature_dim: int
    test_ids: frozenset[int] = frozenset()
    seeds: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = [f.id for f in self.fabrics]
        if len(set(ids)) != len(ids):
            raise DataValidationError("fabric ids must be unique")
        known = set(ids)
        for obs in self.observations:
            if obs.fabric_id not in known:
                raise DataValidationError(f"observation refers to unknown fabric {obs.fabric_id}")
            if obs.features.shape != (self.feature_dim,):
                raise DataValidationError(
                    f"observation features have shape {obs.features.shape}, dataset F={self.feature_dim}"
                )
        self.test_ids = frozenset(int(i) for i in self.test_ids)
        if not self.test_ids <= known:
            raise DataValidationError("test ids refer to unknown fabrics")

    @cached_property
    def fabric_index(self) -> dict[int, FabricRecord]:
        return {f.id: f for f in self.fabrics}

    @property
    def fabric_ids(self) -> list[int]:
        return [f.id for f in self.fabrics]

    @property
    def train_ids(self) -> list[int]:
        return [f.id for f in self.fabrics if f.id not in self.test_ids]

    @property
    def modalities(self) -> list[Modality]:
        present = {obs.modality for obs in self.observations}
        return [m for m in Modality if m in present]

    @cached_property
    def _views(self) -> dict[Modality, ModalityView]:
        views: dict[Modality, ModalityView] = {}
        for mod in Modality:
            obs = [o for o in self.observations if o.modality is mod]
            fabric_ids = np.array([o.fabric_id for o in obs], dtype=np.int64)
            features = (
                np.stack([o.features for o in obs]).astype(np.float64)
                if obs
                else np.zeros((0, self.feature_dim))
            )
            rows = {
                int(fid): np.flatnonzero(fabric_ids == fid) for fid in np.unique(fabric_ids)
            }
            views[mod] = ModalityView(
                fabric_ids=fabric_ids,
                instance_indices=np.array([o.instance_index for o in obs], dtype=np.int64),
                features=features,
                rows_by_fabric=rows,
            )
        return views

    def view(self, modality: Modality) -> ModalityView:
        return self._views[Modality(modality)]

    def count(self, modality: Modality) -> int:
        return len(self.view(modality).fabric_ids)

    def subset(self, fabric_ids: Iterable[int]) -> "Dataset":
        keep = set(int(i) for i in fabric_ids)
        return Dataset(
            fabrics=[f for f in self.fabrics if f.id in keep],
            observations=[o for o in self.observations if o.fabric_id in keep],
            feature_dim=self.feature_dim,
            test_ids=self.test_ids & keep,
            seeds=dict(self.seeds),
        )

    def split_instances(self, fraction: float, seed: int) -> tuple["Dataset", "Dataset"]:
        """Per (fabric, modality), keep round(fraction * n) observations (at least one) and hold out the rest."""
        if not 0.0 < fraction <= 1.0:
            raise DataValidationError("fraction must be in (0, 1]")
        groups: dict[tuple[int, Modality], list[Observation]] = {}
        for obs in self.observations:
            groups.setdefault((obs.fabric_id, obs.modality), []).append(obs)
        kept: list[Observation] = []
        held: list[Observation] = []
        for fabric in self.fabrics:
            for mod in Modality:
                group = groups.get((fabric.id, mod))
                if not group:
                    continue
                rng = substream(seed, "instance-split", fabric.id, mod.value)
                order = rng.permutation(len(group))
                n_keep = max(1, int(round(fraction * len(group))))
                kept.extend(group[i] for i in sorted(order[:n_keep]))
                held.extend(group[i] for i in sorted(order[n_keep:]))
        return (
            Dataset(self.fabrics, kept, self.feature_dim, self.test_ids, dict(self.seeds)),
            Dataset(self.fabrics, held, self.feature_dim, self.test_ids, dict(self.seeds)),
        )

    def fabrics_frame(self) -> pd.DataFrame:
        return fabrics_frame(self.fabrics, self.test_ids)


def fabrics_frame(fabrics: Iterable[FabricRecord], test_ids: Iterable[int] = ()) -> pd.DataFrame:
    test = set(test_ids)
    rows = [
        {
            "id": f.id,
            "thickness_mm": f.thickness_mm,
            "stiffness_score": f.stiffness_score,
            "stretch_level": f.stretch_level,
            "density_gsm": f.density_gsm,
            "cluster_id": f.cluster_id,
            "is_test": f.id in test,
        }
        for f in fabrics
    ]
    return pd.DataFrame(rows, columns=["id", *ATTRIBUTE_COLUMNS, "cluster_id", "is_test"])
