from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
from tqdm import tqdm

from vitac_common.exception import (
    DataValidationError,
    FileFormatError,
    IngestError,
    error_message_detail,
)
from vitac_common.logger import get_logger
from vitac_common.seeding import substream
from vitac_data.records import ATTRIBUTE_COLUMNS, Dataset, FabricRecord, Modality, Observation
from vitac_data.split import cluster_and_split
from vitac_ingest.components.augment import augment_variants
from vitac_ingest.components.backbone import FrozenBackbone, featurize, select_deepest_frame
from vitac_ingest.components.pnm import PixelImage, read_pnm
from vitac_ingest.config import FABRICS_CSV, IngestConfig

log = get_logger(__name__)

# attributes assumed when an image root ships no fabrics.csv
_PLACEHOLDER_ATTRIBUTES = dict(thickness_mm=1.0, stiffness_score=3.0, stretch_level=0, density_gsm=150.0)


@dataclass
class IngestResult:
    dataset: Dataset
    errors: list[tuple[Path, str]] = field(default_factory=list)


class IngestPipeline:
    """
    Image tree -> featurized dataset.

    Layout: `<root>/<fabric_id>/<modality>/<instance>.pnm`, where an instance
    may also be a directory of frames from one press (the deepest frame is
    kept). Malformed files are reported and skipped; the run only fails when a
    fabric is left without observations in a modality present elsewhere.
    """

    def __init__(self, root_dir: Path, config: IngestConfig | None = None):
        self.root_dir = Path(root_dir)
        self.config = config or IngestConfig()
        self.backbones = {
            c: FrozenBackbone(
                seed=self.config.backbone_seed,
                channels=c,
                size=self.config.backbone_size,
                feature_dim=self.config.feature_dim,
            )
            for c in (1, 3)
        }
        self.errors: list[tuple[Path, str]] = []

    def run(
        self,
        cluster_k: int | None = None,
        n_test: int = 0,
        cluster_seed: int = 0,
        split_seed: int = 0,
    ) -> IngestResult:
        if not self.root_dir.is_dir():
            raise IngestError(f"image root {self.root_dir} is not a directory")
        fabric_dirs = sorted(
            (p for p in self.root_dir.iterdir() if p.is_dir() and p.name.isdigit()),
            key=lambda p: int(p.name),
        )
        if not fabric_dirs:
            raise IngestError(f"no <fabric_id>/ directories under {self.root_dir}; empty input")

        observations: list[Observation] = []
        for fabric_dir in tqdm(fabric_dirs, desc="Ingesting fabrics"):
            observations.extend(self._ingest_fabric(int(fabric_dir.name), fabric_dir))
        if not observations:
            raise IngestError(f"no readable images under {self.root_dir}; empty input")

        self._check_coverage([int(p.name) for p in fabric_dirs], observations)
        records, markers = self._load_fabrics([int(p.name) for p in fabric_dirs])

        test_ids: list[int] = []
        if cluster_k is not None and all(m is not None for m in markers):
            records, test_ids = cluster_and_split(records, cluster_k, cluster_seed, n_test, split_seed)
        elif cluster_k is not None:
            log.warning("No %s under %s: fabrics left unclustered and unsplit", FABRICS_CSV, self.root_dir)

        dataset = Dataset(
            fabrics=records,
            observations=observations,
            feature_dim=self.config.feature_dim,
            test_ids=frozenset(test_ids),
            seeds={"backbone_seed": self.config.backbone_seed, "ingest_seed": self.config.seed},
        )
        log.info("Ingested %d observations from %d fabrics (%d files rejected)",
                 len(observations), len(records), len(self.errors))
        return IngestResult(dataset=dataset, errors=list(self.errors))

    def _ingest_fabric(self, fabric_id: int, fabric_dir: Path) -> list[Observation]:
        out: list[Observation] = []
        for mod_dir in sorted(p for p in fabric_dir.iterdir() if p.is_dir()):
            try:
                modality = Modality.parse(mod_dir.name)
            except DataValidationError:
                log.warning("Unknown modality directory skipped: %s", mod_dir)
                continue
            index = sum(1 for o in out if o.modality is modality)
            for entry in sorted(mod_dir.iterdir()):
                image = self._load_instance(entry)
                if image is None:
                    continue
                views = [image]
                if self.config.augment and modality is Modality.COLOR:
                    rng = substream(self.config.seed, "augment", fabric_id, entry.name)
                    views += augment_variants(image, self.config.n_variants, rng)
                try:
                    features = [featurize(view, self.backbones[view.channels]) for view in views]
                except Exception as exc:
                    self._reject(entry, exc)
                    continue
                for vector in features:
                    out.append(Observation(fabric_id, modality, index, vector))
                    index += 1
        return out

    def _load_instance(self, entry: Path) -> PixelImage | None:
        try:
            if entry.is_dir():
                frames = [read_pnm(p) for p in sorted(entry.glob("*.pnm"))]
                return select_deepest_frame(frames)
            if entry.suffix.lower() != ".pnm":
                return None
            return read_pnm(entry)
        except (FileFormatError, DataValidationError, OSError, ValueError) as exc:
            self._reject(entry, exc)
            return None

    def _reject(self, path: Path, exc: Exception) -> None:
        log.error("Rejected %s: %s", path, error_message_detail(exc))
        self.errors.append((path, str(exc)))

    @staticmethod
    def _check_coverage(fabric_ids: list[int], observations: list[Observation]) -> None:
        required = sorted({o.modality for o in observations}, key=lambda m: m.code)
        seen = {(o.fabric_id, o.modality) for o in observations}
        for fid in fabric_ids:
            missing = [m.value for m in required if (fid, m) not in seen]
            if missing:
                raise IngestError(f"fabric {fid} has no usable observations for: {', '.join(missing)}")

    def _load_fabrics(self, fabric_ids: list[int]) -> tuple[list[FabricRecord], list[int | None]]:
        """Records plus a per-fabric marker (None where attributes were not supplied)."""
        csv_path = self.root_dir / FABRICS_CSV
        if not csv_path.exists():
            return [FabricRecord(id=fid, **_PLACEHOLDER_ATTRIBUTES) for fid in fabric_ids], [None] * len(fabric_ids)

        table = pd.read_csv(csv_path)
        missing_cols = [c for c in ("id", *ATTRIBUTE_COLUMNS) if c not in table.columns]
        if missing_cols:
            raise DataValidationError(f"{csv_path} lacks columns {missing_cols}")
        table = table.set_index("id")
        records, markers = [], []
        for fid in fabric_ids:
            if fid not in table.index:
                log.warning("Fabric %d missing from %s; placeholder attributes used", fid, csv_path)
                records.append(FabricRecord(id=fid, **_PLACEHOLDER_ATTRIBUTES))
                markers.append(None)
                continue
            row = table.loc[fid]
            records.append(
                FabricRecord(
                    id=fid,
                    thickness_mm=float(row["thickness_mm"]),
                    stiffness_score=float(row["stiffness_score"]),
                    stretch_level=int(row["stretch_level"]),
                    density_gsm=float(row["density_gsm"]),
                )
            )
            markers.append(fid)
        return records, markers
