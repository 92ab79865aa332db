"""
Color-image augmentations: gamma correction in [0.5, 2.0] and RGB channel
reordering, both applied as extra training views of a color capture.
"""
from __future__ import annotations

from itertools import permutations
from typing import Sequence

import numpy as np

from vitac_common.exception import DataValidationError
from vitac_ingest.components.pnm import PixelImage

GAMMA_RANGE = (0.5, 2.0)
CHANNEL_PERMUTATIONS: tuple[tuple[int, int, int], ...] = tuple(permutations(range(3)))


def gamma_correct(img: PixelImage, gamma: float) -> PixelImage:
    """Each sample s -> round(max * (s / max) ** gamma), halves rounded up."""
    lo, hi = GAMMA_RANGE
    if not lo <= gamma <= hi:
        raise DataValidationError(f"gamma {gamma} outside [{lo}, {hi}]")
    if gamma == 1.0:
        return img.with_pixels(img.pixels.copy())
    scaled = img.max_value * (img.pixels / img.max_value) ** gamma
    return img.with_pixels(np.floor(scaled + 0.5).astype(np.int64))


def permute_channels(img: PixelImage, perm: Sequence[int]) -> PixelImage:
    """Output channel i is input channel perm[i]."""
    if img.channels != 3:
        raise DataValidationError("channel permutation needs an RGB image")
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != [0, 1, 2]:
        raise DataValidationError(f"{perm} is not a permutation of (0, 1, 2)")
    return img.with_pixels(img.pixels[:, :, list(perm)])


def inverse_permutation(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)


def augment_variants(img: PixelImage, n: int, rng: np.random.Generator) -> list[PixelImage]:
    """`n` views, each with a uniform gamma in range and a random channel order."""
    variants = []
    for _ in range(n):
        gamma = float(rng.uniform(*GAMMA_RANGE))
        perm = CHANNEL_PERMUTATIONS[int(rng.integers(len(CHANNEL_PERMUTATIONS)))]
        out = gamma_correct(img, gamma)
        if img.channels == 3:
            out = permute_channels(out, perm)
        variants.append(out)
    return variants
