"""
Physical attribute model of a fabric collection.

Each fabric is described by thickness, stiffness, stretchiness and density.
Sampling ranges (the captured collection publishes no distributions):

    thickness   0.1 - 5 mm, log-uniform
    stiffness   0 - 6, uniform (0-5 rating scale with room for excess)
    stretch     {0, 1, 2} with weights 0.5 / 0.35 / 0.15
    density     30 - 600 g/m^2, log-uniform
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from vitac_common.exception import DataValidationError
from vitac_common.logger import get_logger
from vitac_data.records import ATTRIBUTE_COLUMNS, FabricRecord

log = get_logger(__name__)

THICKNESS_RANGE_MM = (0.1, 5.0)
STIFFNESS_RANGE = (0.0, 6.0)
STRETCH_WEIGHTS = (0.5, 0.35, 0.15)
DENSITY_RANGE_GSM = (30.0, 600.0)


def _log_uniform(rng: np.random.Generator, low: float, high: float, size: int) -> np.ndarray:
    return np.exp(rng.uniform(np.log(low), np.log(high), size=size))


def generate_fabrics(n: int, seed: int) -> list[FabricRecord]:
    if n < 1:
        raise DataValidationError(f"need at least one fabric, got n={n}")
    rng = np.random.default_rng(seed)
    thickness = _log_uniform(rng, *THICKNESS_RANGE_MM, size=n)
    stiffness = rng.uniform(*STIFFNESS_RANGE, size=n)
    stretch = rng.choice(3, size=n, p=STRETCH_WEIGHTS)
    density = _log_uniform(rng, *DENSITY_RANGE_GSM, size=n)
    return [
        FabricRecord(
            id=i,
            thickness_mm=float(thickness[i]),
            stiffness_score=float(stiffness[i]),
            stretch_level=int(stretch[i]),
            density_gsm=float(density[i]),
        )
        for i in range(n)
    ]


def attribute_matrix(fabrics: Sequence[FabricRecord]) -> np.ndarray:
    """Raw n x 4 attribute matrix; stretch level enters as its ordinal 0/1/2."""
    return np.array([f.attributes() for f in fabrics], dtype=np.float64).reshape(len(fabrics), 4)


def normalize_attributes(fabrics: Sequence[FabricRecord]) -> np.ndarray:
    """Column z-scores with the sample standard deviation; constant columns become zeros."""
    if len(fabrics) < 2:
        raise DataValidationError("normalizing attributes needs at least two fabrics")
    raw = attribute_matrix(fabrics)
    mean = raw.mean(axis=0)
    std = raw.std(axis=0, ddof=1)
    out = np.zeros_like(raw)
    for j, name in enumerate(ATTRIBUTE_COLUMNS):
        if std[j] == 0.0:
            log.warning("attribute %s has zero variance; column set to zeros", name)
            continue
        out[:, j] = (raw[:, j] - mean[j]) / std[j]
    return out


def latent_vector(fabric: FabricRecord) -> np.ndarray:
    """Attributes mapped onto roughly [-1, 1] against the fixed sampling ranges."""
    lo_t, hi_t = np.log(THICKNESS_RANGE_MM)
    lo_d, hi_d = np.log(DENSITY_RANGE_GSM)
    return np.array(
        [
            2.0 * (np.log(fabric.thickness_mm) - lo_t) / (hi_t - lo_t) - 1.0,
            fabric.stiffness_score / 3.0 - 1.0,
            float(fabric.stretch_level) - 1.0,
            2.0 * (np.log(fabric.density_gsm) - lo_d) / (hi_d - lo_d) - 1.0,
        ]
    )
