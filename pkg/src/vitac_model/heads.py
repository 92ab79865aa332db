"""Per-branch cluster classifier (affine map E -> k logits, softmax cross-entropy)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, softmax

from vitac_common.exception import DataValidationError, ShapeError


@dataclass
class ClassifierHead:
    weights: np.ndarray  # (k, E)
    biases: np.ndarray   # (k,)

    def __post_init__(self) -> None:
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ShapeError(f"head weights {self.weights.shape} / biases {self.biases.shape} disagree")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [self.weights, self.biases]


def head_init(embedding_dim: int, n_classes: int, seed: int) -> ClassifierHead:
    rng = np.random.default_rng(seed)
    return ClassifierHead(
        weights=rng.normal(0.0, np.sqrt(1.0 / embedding_dim), size=(n_classes, embedding_dim)),
        biases=np.zeros(n_classes),
    )


@dataclass
class HeadOutput:
    loss: float | np.ndarray
    logits: np.ndarray
    grad_weights: np.ndarray
    grad_biases: np.ndarray
    grad_embedding: np.ndarray


def classify_cluster(
    head: ClassifierHead,
    e: np.ndarray,
    label: int | np.ndarray,
    grad_scale: float | np.ndarray = 1.0,
) -> HeadOutput:
    """Cross-entropy of the cluster label; gradients are multiplied by `grad_scale`.

    Works on one embedding or a batch (rows); batch parameter gradients are sums.
    """
    emb = np.asarray(e, dtype=np.float64)
    batched = emb.ndim == 2
    emb2 = emb if batched else emb[None, :]
    labels = np.atleast_1d(np.asarray(label)).astype(np.int64)
    if emb2.shape[1] != head.in_dim:
        raise ShapeError(f"head expects embeddings of dim {head.in_dim}, got {emb2.shape[1]}")
    if labels.shape[0] != emb2.shape[0]:
        raise ShapeError(f"{labels.shape[0]} labels for {emb2.shape[0]} embeddings")
    if np.any(labels < 0) or np.any(labels >= head.n_classes):
        raise DataValidationError(f"cluster labels must be in [0, {head.n_classes}), got {labels.tolist()}")

    logits = emb2 @ head.weights.T + head.biases
    rows = np.arange(len(labels))
    loss = -log_softmax(logits, axis=1)[rows, labels]

    d_logits = softmax(logits, axis=1)
    d_logits[rows, labels] -= 1.0
    d_logits *= np.reshape(np.asarray(grad_scale, dtype=np.float64), (-1, 1))

    return HeadOutput(
        loss=loss if batched else float(loss[0]),
        logits=logits if batched else logits[0],
        grad_weights=d_logits.T @ emb2,
        grad_biases=d_logits.sum(axis=0),
        grad_embedding=d_logits @ head.weights if batched else (d_logits @ head.weights)[0],
    )
