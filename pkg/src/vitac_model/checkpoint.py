"""
Checkpoint file for a `JointModel`.

Layout (little-endian)::

    b"GFAB"  u32 version  u32 meta_len  meta (UTF-8 JSON, sorted keys)
    weights  every array of `JointModel.parameters()` in order, f4, row-major

The meta block names the architecture, branch modalities, the encoder layer
widths per modality, head shapes, margin, aux weight, presses, the backbone
seed of the features the model was trained on, and the training config echo.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from vitac_common.exception import (
    BadMagicError,
    DataValidationError,
    FileFormatError,
    ModelCompatibilityError,
    TruncatedFileError,
    VersionMismatchError,
    error_message_detail,
)
from vitac_common.logger import get_logger
from vitac_data.records import Modality
from vitac_model.encoder import Encoder, EncoderSpec
from vitac_model.heads import ClassifierHead
from vitac_model.joint import JointModel

log = get_logger(__name__)

MAGIC = b"GFAB"
VERSION = 1
_PREAMBLE = struct.Struct("<4sII")


def _meta(model: JointModel) -> dict:
    return {
        "architecture": model.architecture.value,
        "branches": [m.value for m in model.branches],
        "encoders": {m.value: list(model.encoders[m].spec.layer_dims) for m in model.modalities},
        "heads": {m.value: [h.n_classes, h.in_dim] for m, h in model.heads.items()},
        "margin": float(model.margin),
        "aux_weight": float(model.aux_weight),
        "presses": int(model.presses),
        "backbone_seed": model.backbone_seed,
        "train_config": model.train_config,
    }


def checkpoint_to_bytes(model: JointModel) -> bytes:
    meta = json.dumps(_meta(model), sort_keys=True, separators=(",", ":")).encode("utf-8")
    weights = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in model.parameters())
    return _PREAMBLE.pack(MAGIC, VERSION, len(meta)) + meta + weights


def checkpoint_from_bytes(data: bytes) -> JointModel:
    if len(data) < _PREAMBLE.size:
        if not MAGIC.startswith(data[:4]):
            raise BadMagicError(f"checkpoint starts with {data[:4]!r}, expected {MAGIC!r}")
        raise TruncatedFileError("checkpoint ends inside its preamble")
    magic, version, meta_len = _PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"checkpoint starts with {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionMismatchError(f"checkpoint format version {version}, this build reads {VERSION}")
    offset = _PREAMBLE.size
    if len(data) < offset + meta_len:
        raise TruncatedFileError("checkpoint ends inside its meta block")
    try:
        meta = json.loads(data[offset: offset + meta_len].decode("utf-8"))
        architecture = meta["architecture"]
        branches = tuple(Modality(m) for m in meta["branches"])
        specs = {Modality(m): EncoderSpec(tuple(dims)) for m, dims in meta["encoders"].items()}
        head_shapes = {Modality(m): _head_shape(shape) for m, shape in meta["heads"].items()}
        margin = float(meta["margin"])
        aux_weight = float(meta["aux_weight"])
        presses = int(meta["presses"])
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise FileFormatError(f"checkpoint meta block is not valid: {exc!r}") from exc
    missing = [m.value for m in dict.fromkeys(branches) if m not in specs]
    if missing:
        raise FileFormatError(f"checkpoint meta has no encoder for branch modalities {missing}")
    offset += meta_len

    order = list(dict.fromkeys(branches))
    shapes: list[tuple[int, ...]] = []
    for mod in order:
        dims = specs[mod].layer_dims
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            shapes.extend([(fan_out, fan_in), (fan_out,)])
    for mod in order:
        if mod in head_shapes:
            k, e = head_shapes[mod]
            shapes.extend([(k, e), (k,)])
    expected = 4 * sum(int(np.prod(s)) for s in shapes)
    if len(data) - offset < expected:
        raise TruncatedFileError(f"checkpoint weights have {len(data) - offset} bytes, meta declares {expected}")
    if len(data) - offset > expected:
        raise FileFormatError(f"{len(data) - offset - expected} trailing bytes after checkpoint weights")

    params: list[np.ndarray] = []
    for shape in shapes:
        n = int(np.prod(shape))
        params.append(np.frombuffer(data, dtype="<f4", count=n, offset=offset).astype(np.float64).reshape(shape))
        offset += 4 * n

    try:
        encoders, heads, pos = {}, {}, 0
        for mod in order:
            n = 2 * specs[mod].n_layers
            encoders[mod] = Encoder(specs[mod], weights=params[pos:pos + n:2], biases=params[pos + 1:pos + n:2])
            pos += n
        for mod in order:
            if mod in head_shapes:
                heads[mod] = ClassifierHead(params[pos], params[pos + 1])
                pos += 2
        return JointModel(
            architecture=architecture,
            branches=branches,
            encoders=encoders,
            heads=heads,
            margin=margin,
            aux_weight=aux_weight,
            presses=presses,
            backbone_seed=meta.get("backbone_seed"),
            train_config=meta.get("train_config", {}),
        )
    except (ValueError, DataValidationError, ModelCompatibilityError) as exc:
        raise FileFormatError(f"checkpoint describes an inconsistent model: {exc}") from exc


def _head_shape(shape) -> tuple[int, int]:
    k, e = (int(v) for v in shape)
    if k < 1 or e < 1:
        raise ValueError(f"head shape {shape} must be positive")
    return k, e


def save_checkpoint(model: JointModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_to_bytes(model))
    log.info("Saved %s checkpoint -> %s", model.architecture.value, path)
    return path


def load_checkpoint(path: Path) -> JointModel:
    path = Path(path)
    try:
        model = checkpoint_from_bytes(path.read_bytes())
    except FileFormatError as exc:
        log.error("Cannot load checkpoint %s: %s", path, error_message_detail(exc))
        raise
    log.info("Loaded %s checkpoint %s (F=%d, E=%d)",
             model.architecture.value, path, model.feature_dim, model.embedding_dim)
    return model
