from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field

ROOT_DIR     = Path(__file__).resolve().parents[2]
DATASETS_DIR = ROOT_DIR / "datasets"

# immutable data
RAW_DIR   = DATASETS_DIR / "raw"
PROC_DIR  = DATASETS_DIR / "processed"
RUNS_DIR  = ROOT_DIR / "runs"

# Granular paths
RAW_IMAGE_DIR   = RAW_DIR  / "fabrics"          # <fabric_id>/<modality>/<instance>.pnm
FABRICS_CSV     = "fabrics.csv"                 # optional attribute table inside an image root
DATASET_FILE    = PROC_DIR / "fabrics.gfds"


class IngestConfig(BaseModel):
    """Image ingestion knobs (`ingest.*` keys of a run file)."""

    model_config = ConfigDict(extra="forbid")

    augment: bool = False
    n_variants: int = Field(2, ge=0)
    backbone_seed: int = 0
    backbone_size: int = Field(64, ge=1)
    feature_dim: int = Field(256, ge=1)
    seed: int = 0
