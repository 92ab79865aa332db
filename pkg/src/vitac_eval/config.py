from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class EvalConfig(BaseModel):
    """`eval.*` keys: pick-1-from-N retrieval and the match-probability model."""

    model_config = ConfigDict(extra="forbid")

    n_candidates: int = Field(10, ge=2)
    n_distractor_fabrics: int = Field(9, ge=1)
    repetitions: int = Field(10, ge=1)
    prob_coefficient: float = Field(0.085, gt=0)
    top_ks: tuple[int, ...] = (1, 3)
    seed: int = 0
    workers: int = Field(1, ge=1)
    split: Literal["test", "train", "all"] = "test"

    @field_validator("top_ks", mode="before")
    @classmethod
    def _parse_top_ks(cls, value):
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        ks = tuple(sorted({int(v) for v in value}))
        if not ks or ks[0] < 1:
            raise ValueError("top_ks must be positive integers")
        return ks

    @model_validator(mode="after")
    def _check_candidates(self) -> "EvalConfig":
        if self.n_candidates != self.n_distractor_fabrics + 1:
            raise ValueError(
                f"eval.n_candidates ({self.n_candidates}) must equal "
                f"eval.n_distractor_fabrics + 1 ({self.n_distractor_fabrics + 1})"
            )
        if self.top_ks[-1] > self.n_candidates:
            raise ValueError(f"top_ks {self.top_ks} exceed n_candidates={self.n_candidates}")
        return self
