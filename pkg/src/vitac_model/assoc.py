"""
Embedding distances, contrastive losses and max fusion.

All functions work on a single embedding (1-D) or on a batch whose last axis
is the embedding axis; scalar inputs give Python floats back.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from vitac_common.exception import ConfigError, NumericError, ShapeError


def _pair(e1: np.ndarray, e2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(e1, dtype=np.float64)
    b = np.asarray(e2, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"embedding shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _scalar_or_array(x: np.ndarray) -> float | np.ndarray:
    return float(x) if np.ndim(x) == 0 else x


def pair_distance(e1: np.ndarray, e2: np.ndarray) -> float | np.ndarray:
    """Euclidean distance along the last axis."""
    a, b = _pair(e1, e2)
    return _scalar_or_array(np.linalg.norm(a - b, axis=-1))


def d3_distance(e1: np.ndarray, e2: np.ndarray, e3: np.ndarray) -> float | np.ndarray:
    """||e1 - e2|| + ||e2 - e3|| + ||e3 - e1||."""
    _pair(e1, e2)
    _pair(e2, e3)
    return pair_distance(e1, e2) + pair_distance(e2, e3) + pair_distance(e3, e1)


def unit_difference(e1: np.ndarray, e2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(distance, d distance / d e1); the gradient is taken as zero where e1 == e2."""
    a, b = _pair(e1, e2)
    diff = a - b
    dist = np.linalg.norm(diff, axis=-1)
    safe = np.where(dist > 0.0, dist, 1.0)
    unit = np.where(np.expand_dims(dist > 0.0, -1), diff / np.expand_dims(safe, -1), 0.0)
    return dist, unit


def _contrastive(d: float | np.ndarray, y: int | np.ndarray, m: float):
    if not m > 0:
        raise ConfigError(f"margin must be positive, got {m}")
    dist = np.asarray(d, dtype=np.float64)
    label = np.asarray(y)
    if not np.all(np.isfinite(dist)) or np.any(dist < 0):
        raise NumericError("distances must be finite and non-negative")
    if not np.all((label == 0) | (label == 1)):
        raise ConfigError("labels must be 0 (same fabric) or 1 (different fabrics)")
    hinge = np.maximum(0.0, m - dist)
    loss = np.where(label == 0, 0.5 * dist * dist, 0.5 * hinge * hinge)
    grad = np.where(label == 0, dist, -hinge)
    return _scalar_or_array(loss), _scalar_or_array(grad)


def contrastive_loss3(d3: float | np.ndarray, y: int | np.ndarray, m: float = 2.0):
    """Three-way contrastive loss on D3; returns (loss, dloss/dd3).

    Y = 0: 0.5 * d3^2.  Y = 1: 0.5 * max(0, m - d3)^2.
    """
    return _contrastive(d3, y, m)


def contrastive_loss2(d: float | np.ndarray, y: int | np.ndarray, m: float = 2.0):
    """Pairwise contrastive loss of the two-branch Siamese network; returns (loss, dloss/dd)."""
    return _contrastive(d, y, m)


def fuse_max(embeddings: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise maximum and the index of the input that supplied each component.

    Ties go to the lowest index, so gradients route deterministically.
    """
    if len(embeddings) < 2:
        raise ShapeError(f"fuse_max needs at least two embeddings, got {len(embeddings)}")
    shapes = {np.shape(e) for e in embeddings}
    if len(shapes) != 1:
        raise ShapeError(f"fuse_max inputs differ in shape: {sorted(shapes)}")
    stacked = np.stack([np.asarray(e, dtype=np.float64) for e in embeddings])
    winners = np.argmax(stacked, axis=0)
    return np.take_along_axis(stacked, winners[None], axis=0)[0], winners


def fuse_max_backward(grad: np.ndarray, winners: np.ndarray, n_inputs: int) -> np.ndarray:
    """Scatter the fused gradient back onto the stacked inputs (shape (n_inputs, ...))."""
    out = np.zeros((n_inputs, *np.shape(grad)))
    np.put_along_axis(out, winners[None], np.asarray(grad, dtype=np.float64)[None], axis=0)
    return out
