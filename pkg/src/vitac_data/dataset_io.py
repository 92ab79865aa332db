"""
Self-describing binary dataset file.

Layout (all little-endian)::

    b"GFDS"  u32 version  u32 header_len  header (UTF-8 JSON, sorted keys)
    fabric records   n_fabrics x {i4 id, f8 thickness, f8 stiffness, i4 stretch,
                                  f8 density, i4 cluster (-1 = none), u1 is_test}
    observation index n_obs x {i4 fabric_id, u1 modality code, i4 instance}
    features          n_obs x F f4, row-major
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from vitac_common.exception import (
    BadMagicError,
    FileFormatError,
    TruncatedFileError,
    VersionMismatchError,
)
from vitac_common.logger import get_logger
from vitac_data.records import Dataset, FabricRecord, Modality, Observation

log = get_logger(__name__)

MAGIC = b"GFDS"
VERSION = 1
_PREAMBLE = struct.Struct("<4sII")

FABRIC_DTYPE = np.dtype(
    [
        ("id", "<i4"),
        ("thickness_mm", "<f8"),
        ("stiffness_score", "<f8"),
        ("stretch_level", "<i4"),
        ("density_gsm", "<f8"),
        ("cluster_id", "<i4"),
        ("is_test", "u1"),
    ]
)
OBS_DTYPE = np.dtype([("fabric_id", "<i4"), ("modality", "u1"), ("instance_index", "<i4")])


def dataset_to_bytes(dataset: Dataset) -> bytes:
    fabrics = np.zeros(len(dataset.fabrics), dtype=FABRIC_DTYPE)
    for i, f in enumerate(dataset.fabrics):
        fabrics[i] = (
            f.id, f.thickness_mm, f.stiffness_score, f.stretch_level, f.density_gsm,
            -1 if f.cluster_id is None else f.cluster_id, f.id in dataset.test_ids,
        )
    index = np.zeros(len(dataset.observations), dtype=OBS_DTYPE)
    features = np.zeros((len(dataset.observations), dataset.feature_dim), dtype="<f4")
    for i, obs in enumerate(dataset.observations):
        index[i] = (obs.fabric_id, obs.modality.code, obs.instance_index)
        features[i] = obs.features

    header = {
        "feature_dim": dataset.feature_dim,
        "n_fabrics": len(dataset.fabrics),
        "n_observations": len(dataset.observations),
        "counts": {m.value: dataset.count(m) for m in Modality},
        "seeds": {k: int(v) for k, v in sorted(dataset.seeds.items())},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return b"".join(
        [
            _PREAMBLE.pack(MAGIC, VERSION, len(header_bytes)),
            header_bytes,
            fabrics.tobytes(),
            index.tobytes(),
            features.tobytes(),
        ]
    )


def dataset_from_bytes(data: bytes) -> Dataset:
    if len(data) < _PREAMBLE.size:
        if not MAGIC.startswith(data[:4]):
            raise BadMagicError(f"dataset file starts with {data[:4]!r}, expected {MAGIC!r}")
        raise TruncatedFileError("dataset file ends inside its preamble")
    magic, version, header_len = _PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"dataset file starts with {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionMismatchError(f"dataset format version {version}, this build reads {VERSION}")

    offset = _PREAMBLE.size
    if len(data) < offset + header_len:
        raise TruncatedFileError("dataset file ends inside its header")
    try:
        header = json.loads(data[offset: offset + header_len].decode("utf-8"))
        n_fab, n_obs, dim = int(header["n_fabrics"]), int(header["n_observations"]), int(header["feature_dim"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FileFormatError("dataset header is not valid JSON with the expected keys") from exc
    offset += header_len

    expected = n_fab * FABRIC_DTYPE.itemsize + n_obs * OBS_DTYPE.itemsize + n_obs * dim * 4
    if len(data) - offset < expected:
        raise TruncatedFileError(
            f"dataset body has {len(data) - offset} bytes, header declares {expected}"
        )
    if len(data) - offset > expected:
        raise FileFormatError(f"{len(data) - offset - expected} trailing bytes after dataset body")

    fabrics = np.frombuffer(data, dtype=FABRIC_DTYPE, count=n_fab, offset=offset)
    offset += n_fab * FABRIC_DTYPE.itemsize
    index = np.frombuffer(data, dtype=OBS_DTYPE, count=n_obs, offset=offset)
    offset += n_obs * OBS_DTYPE.itemsize
    features = np.frombuffer(data, dtype="<f4", count=n_obs * dim, offset=offset).reshape(n_obs, dim)

    records = [
        FabricRecord(
            id=int(r["id"]),
            thickness_mm=float(r["thickness_mm"]),
            stiffness_score=float(r["stiffness_score"]),
            stretch_level=int(r["stretch_level"]),
            density_gsm=float(r["density_gsm"]),
            cluster_id=None if int(r["cluster_id"]) < 0 else int(r["cluster_id"]),
        )
        for r in fabrics
    ]
    observations = [
        Observation(
            fabric_id=int(r["fabric_id"]),
            modality=Modality.from_code(int(r["modality"])),
            instance_index=int(r["instance_index"]),
            features=features[i].astype(np.float64),
        )
        for i, r in enumerate(index)
    ]
    return Dataset(
        fabrics=records,
        observations=observations,
        feature_dim=dim,
        test_ids=frozenset(int(r["id"]) for r in fabrics if r["is_test"]),
        seeds={k: int(v) for k, v in header.get("seeds", {}).items()},
    )


def save_dataset(dataset: Dataset, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dataset_to_bytes(dataset))
    log.info("Saved dataset (%d fabrics, %d observations) -> %s",
             len(dataset.fabrics), len(dataset.observations), path)
    return path


def load_dataset(path: Path) -> Dataset:
    path = Path(path)
    dataset = dataset_from_bytes(path.read_bytes())
    log.info("Loaded dataset %s: %d fabrics, %d observations, F=%d",
             path, len(dataset.fabrics), len(dataset.observations), dataset.feature_dim)
    return dataset
