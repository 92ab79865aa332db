"""Normalized match probability p_i ∝ exp(-c * d_i^2)."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import softmax

from vitac_common.exception import ConfigError, DataValidationError, ShapeError

DEFAULT_COEFFICIENT = 0.085


def probabilities_from_sq_distances(sq_distances: np.ndarray, c: float = DEFAULT_COEFFICIENT) -> np.ndarray:
    """Softmax of -c * d^2 along the last axis; +inf distances get probability 0."""
    if not c > 0:
        raise ConfigError(f"probability coefficient must be positive, got {c}")
    d2 = np.asarray(sq_distances, dtype=np.float64)
    if d2.shape[-1] == 0:
        raise DataValidationError("match probability needs at least one candidate")
    return softmax(-c * d2, axis=-1)


def match_probability(
    e_target: np.ndarray,
    candidate_es: Sequence[np.ndarray] | np.ndarray,
    c: float = DEFAULT_COEFFICIENT,
) -> np.ndarray:
    if len(candidate_es) == 0:
        raise DataValidationError("match probability needs at least one candidate")
    target = np.asarray(e_target, dtype=np.float64)
    cands = np.asarray(candidate_es, dtype=np.float64)
    if cands.ndim != 2 or cands.shape[1] != target.shape[-1]:
        raise ShapeError(f"candidates {cands.shape} do not match target dim {target.shape[-1]}")
    d2 = np.sum((cands - target) ** 2, axis=1)
    return probabilities_from_sq_distances(d2, c)
