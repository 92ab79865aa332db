"""
Frozen featurizer ahead of the trainable encoders.

Images are box-filtered to `size x size`, scaled to [0, 1], flattened and
pushed through a fixed seeded Gaussian projection (no bias) and a rectifier.
Training never touches these weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from vitac_common.exception import DataValidationError, ShapeError
from vitac_common.seeding import substream
from vitac_ingest.components.pnm import PixelImage


def _box_axis(a: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    n_in = a.shape[axis]
    edges = np.linspace(0.0, n_in, n_out + 1)
    starts = np.floor(edges[:-1]).astype(np.int64)
    stops = np.maximum(np.ceil(edges[1:]).astype(np.int64), starts + 1)
    zeros_shape = list(a.shape)
    zeros_shape[axis] = 1
    csum = np.concatenate([np.zeros(zeros_shape), np.cumsum(a, axis=axis)], axis=axis)
    sums = np.take(csum, stops, axis=axis) - np.take(csum, starts, axis=axis)
    widths = (stops - starts).astype(np.float64)
    shape = [1] * a.ndim
    shape[axis] = n_out
    return sums / widths.reshape(shape)


def box_downsample(pixels: np.ndarray, size: int) -> np.ndarray:
    """Area-average an (H, W, C) array onto (size, size, C)."""
    out = _box_axis(np.asarray(pixels, dtype=np.float64), size, axis=0)
    return _box_axis(out, size, axis=1)


@dataclass(frozen=True)
class FrozenBackbone:
    seed: int
    channels: int = 3
    size: int = 64
    feature_dim: int = 256

    def __post_init__(self) -> None:
        if self.channels not in (1, 3):
            raise ShapeError(f"backbone channels must be 1 or 3, got {self.channels}")
        if self.size < 1 or self.feature_dim < 1:
            raise ShapeError("backbone size and feature_dim must be >= 1")

    @property
    def input_dim(self) -> int:
        return self.size * self.size * self.channels

    @cached_property
    def projection(self) -> np.ndarray:
        rng = substream(self.seed, "backbone", self.channels, self.size, self.feature_dim)
        return rng.normal(0.0, 1.0 / np.sqrt(self.input_dim), size=(self.feature_dim, self.input_dim))


def featurize(img: PixelImage, backbone: FrozenBackbone) -> np.ndarray:
    if img.channels != backbone.channels:
        raise ShapeError(
            f"image has {img.channels} channels, backbone expects {backbone.channels}"
        )
    x = box_downsample(img.pixels, backbone.size) / img.max_value
    return np.maximum(backbone.projection @ x.reshape(-1), 0.0)


def select_deepest_frame(frames: Sequence[PixelImage]) -> PixelImage:
    """Frame whose mean absolute deviation from the first frame is largest (deepest press)."""
    if not frames:
        raise DataValidationError("press sequence has no frames")
    first = frames[0].pixels.astype(np.float64)
    deviations = []
    for frame in frames:
        if frame.pixels.shape != first.shape:
            raise ShapeError("all frames of a press sequence must share one shape")
        deviations.append(float(np.mean(np.abs(frame.pixels - first))))
    return frames[int(np.argmax(deviations))]
