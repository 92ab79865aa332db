from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, field_validator

from vitac_common.exception import DataValidationError
from vitac_data.records import Modality
from vitac_model.joint import Architecture


class TrainConfig(BaseModel):
    """`train.*` keys. Batch 32 / 2,000 iterations are desk-scale defaults."""

    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(0.001, gt=0)
    batch_size: int = Field(32, ge=1)
    iterations: int = Field(2000, ge=0)
    margin: float = Field(2.0, gt=0)
    negative_ratio: float = Field(0.5, gt=0, lt=1)
    aux_weight: float = Field(1.0, ge=0)
    master_seed: int = 0
    n_presses: int = Field(3, ge=1)


class ModelConfig(BaseModel):
    """`model.*` keys."""

    model_config = ConfigDict(extra="forbid")

    arch: Architecture = Architecture.CROSS_MODAL
    embedding_dim: int = Field(64, ge=1)
    hidden_dims: str = "128"
    touch_modality: Modality = Modality.TOUCH_FOLD
    snn_modalities: str = "depth,depth"
    n_classes: int = Field(8, ge=1)

    @field_validator("hidden_dims")
    @classmethod
    def _check_hidden(cls, value: str) -> str:
        dims = [d.strip() for d in value.split(",") if d.strip()]
        if not all(d.isdigit() and int(d) > 0 for d in dims):
            raise ValueError(f"hidden_dims must be comma-separated positive integers, got {value!r}")
        return ",".join(dims)

    @field_validator("snn_modalities")
    @classmethod
    def _check_snn(cls, value: str) -> str:
        try:
            mods = [Modality.parse(m).value for m in value.split(",") if m.strip()]
        except DataValidationError as exc:
            raise ValueError(str(exc)) from exc
        if len(mods) != 2:
            raise ValueError(f"snn_modalities needs exactly two modalities, got {value!r}")
        return ",".join(mods)

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(int(d) for d in self.hidden_dims.split(",") if d)

    @property
    def branches(self) -> tuple[Modality, ...]:
        if self.arch is Architecture.SNN2:
            return tuple(Modality(m) for m in self.snn_modalities.split(","))
        return (Modality.DEPTH, Modality.COLOR, self.touch_modality)
