"""
Run file: flat `section.key = value` lines, `#` comments, blank lines ignored.

    # 50 fabric desk run
    world.n_fabrics = 50
    split.n_test = 10
    model.arch = multi_input
    eval.top_ks = 1,3

Sections map onto typed configs; unknown sections or keys are rejected and
every key has a default. `paths.*` may also come from `VITAC_PATHS_*`
environment variables or a `.env` file; values in the run file win.
"""
from __future__ import annotations

from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from vitac_common.exception import ConfigError
from vitac_common.logger import get_logger
from vitac_data.records import DEFAULT_INSTANCE_COUNTS, Modality
from vitac_eval.config import EvalConfig
from vitac_ingest.config import DATASET_FILE, RUNS_DIR, IngestConfig
from vitac_model.config import ModelConfig, TrainConfig

log = get_logger(__name__)


class WorldConfig(BaseModel):
    """`world.*`: synthetic collection size, observation model and instance counts."""

    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    n_fabrics: int = Field(118, ge=1)
    noise_std: float = Field(0.05, ge=0)
    feature_dim: int = Field(32, ge=1)
    hidden_width: int = Field(32, ge=1)
    nuisance_scale: float = Field(0.15, ge=0)
    contact_jitter: float = Field(0.1, ge=0)
    n_depth: int = Field(DEFAULT_INSTANCE_COUNTS[Modality.DEPTH], ge=0)
    n_color: int = Field(DEFAULT_INSTANCE_COUNTS[Modality.COLOR], ge=0)
    n_touch_flat: int = Field(DEFAULT_INSTANCE_COUNTS[Modality.TOUCH_FLAT], ge=0)
    n_touch_fold: int = Field(DEFAULT_INSTANCE_COUNTS[Modality.TOUCH_FOLD], ge=0)

    @property
    def counts(self) -> dict[Modality, int]:
        return {
            Modality.DEPTH: self.n_depth,
            Modality.COLOR: self.n_color,
            Modality.TOUCH_FLAT: self.n_touch_flat,
            Modality.TOUCH_FOLD: self.n_touch_fold,
        }


class SplitConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_test: int = Field(18, ge=0)
    seed: int = 0


class ClusterConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = Field(8, ge=1)
    seed: int = 0
    n_init: int = Field(20, ge=1)


class PathsConfig(BaseSettings):
    """Output locations; `VITAC_PATHS_<KEY>` or `.env` override the defaults."""

    model_config = SettingsConfigDict(env_prefix="VITAC_PATHS_", env_file=".env", extra="ignore")

    dataset: Path = DATASET_FILE
    checkpoint: Path = RUNS_DIR / "model.gfab"
    loss_csv: Path = RUNS_DIR / "loss.csv"
    precision_csv: Path = RUNS_DIR / "precision.csv"
    confusion_csv: Path = RUNS_DIR / "confusion.csv"


_SECTIONS: dict[str, type[BaseModel]] = {
    "world": WorldConfig,
    "split": SplitConfig,
    "cluster": ClusterConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
    "ingest": IngestConfig,
    "paths": PathsConfig,
}


def parse_run_text(text: str) -> dict[str, dict[str, str]]:
    """Raw `{section: {key: value}}` strings; grammar errors name the line."""
    sections: dict[str, dict[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw.strip()!r}")
        name, value = (part.strip() for part in line.split("=", 1))
        if "." not in name:
            raise ConfigError(f"line {lineno}: key {name!r} has no section (use e.g. world.{name})")
        section, key = name.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"line {lineno}: unknown section {section!r} in key {name!r}")
        if key in sections.get(section, {}):
            raise ConfigError(f"line {lineno}: key {name!r} set twice")
        sections.setdefault(section, {})[key] = value
    return sections


def _format(value) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(_format(v) for v in value)
    return str(value)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    world: WorldConfig = Field(default_factory=WorldConfig)
    split: SplitConfig = Field(default_factory=SplitConfig)
    cluster: ClusterConfig = Field(default_factory=ClusterConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    ingest: IngestConfig = Field(default_factory=IngestConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    @model_validator(mode="after")
    def _cross_checks(self) -> "RunConfig":
        n = self.world.n_fabrics
        if self.cluster.k > n:
            raise ValueError(f"cluster.k={self.cluster.k} must be <= world.n_fabrics={n}")
        if self.split.n_test >= n:
            raise ValueError(f"split.n_test={self.split.n_test} must be < world.n_fabrics={n}")
        return self

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        raw = parse_run_text(text)
        parts = {}
        for name, section in _SECTIONS.items():
            values = raw.get(name, {})
            unknown = sorted(set(values) - set(section.model_fields))
            if unknown:
                raise ConfigError(f"unknown key {name}.{unknown[0]}")
            try:
                parts[name] = section(**values)
            except ValidationError as exc:
                raise ConfigError(_describe(exc, name)) from exc
        try:
            return cls(**parts)
        except ValidationError as exc:
            raise ConfigError(_describe(exc)) from exc

    @classmethod
    def from_file(cls, path: Path | None) -> "RunConfig":
        if path is None:
            return cls.from_text("")
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read run file {path}: {exc}") from exc
        config = cls.from_text(text)
        log.info("Loaded run config %s", path)
        return config

    def updated(self, section: str, **values) -> "RunConfig":
        """Copy with `section.key` overrides (e.g. from CLI flags), re-validated."""
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section {section!r}")
        current = getattr(self, section).model_dump()
        current.update({k: v for k, v in values.items() if v is not None})
        try:
            parts = {name: getattr(self, name) for name in _SECTIONS}
            parts[section] = _SECTIONS[section](**current)
        except ValidationError as exc:
            raise ConfigError(_describe(exc, section)) from exc
        try:
            return RunConfig(**parts)
        except ValidationError as exc:
            raise ConfigError(_describe(exc)) from exc

    def echo(self) -> list[str]:
        """Resolved `section.key = value` lines, in section and field order."""
        lines = []
        for name in _SECTIONS:
            section = getattr(self, name)
            for key in type(section).model_fields:
                lines.append(f"{name}.{key} = {_format(getattr(section, key))}")
        return lines


def _describe(exc: ValidationError, section: str | None = None) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in ((section,) if section else ()) + tuple(err["loc"])) or "config"
        if err["type"] == "extra_forbidden":
            parts.append(f"unknown key {loc}")
        else:
            parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def load_run_config(path: Path | None = None) -> RunConfig:
    return RunConfig.from_file(path)
