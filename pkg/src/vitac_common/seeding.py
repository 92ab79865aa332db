"""
Purpose-tagged random streams.

Every consumer of randomness (initialization, batch sampling, nuisance draws,
evaluation trials) derives its own generator from a master seed and a tuple of
tags, so reordering one consumer never perturbs another.
"""
from __future__ import annotations

import zlib
from typing import Union

import numpy as np

Tag = Union[str, int]


def _tag_words(tags: tuple[Tag, ...]) -> list[int]:
    words: list[int] = []
    for tag in tags:
        if isinstance(tag, (int, np.integer)):
            # keep negative ints distinct from their unsigned twin
            words.append(int(tag) & 0xFFFFFFFF)
            words.append(1 if int(tag) < 0 else 0)
        else:
            words.append(zlib.crc32(str(tag).encode("utf-8")))
    return words


def seed_sequence(master_seed: int, *tags: Tag) -> np.random.SeedSequence:
    """SeedSequence mixing `master_seed` with the given purpose tags."""
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, *_tag_words(tags)])


def substream(master_seed: int, *tags: Tag) -> np.random.Generator:
    """Independent generator for one purpose."""
    return np.random.default_rng(seed_sequence(master_seed, *tags))


def derive_seed(master_seed: int, *tags: Tag) -> int:
    """Plain integer seed for APIs that take one (31 bits, always non-negative)."""
    return int(seed_sequence(master_seed, *tags).generate_state(1)[0] & 0x7FFFFFFF)
