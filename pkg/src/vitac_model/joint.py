"""
Joint embedding models and their loss.

Architectures
-------------
CROSS_MODAL  three branches (depth, color, touch), contrastive loss on D3.
AUXILIARY    CROSS_MODAL plus one cluster classifier per branch.
MULTI_INPUT  AUXILIARY whose touch branch max-fuses several presses.
SNN2         two branches, pairwise contrastive loss (same-modality pairs
             share one encoder, i.e. a Siamese network).

Encoders are keyed by modality, so branches that see the same modality share
weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from vitac_common.exception import DataValidationError, ModelCompatibilityError, ShapeError
from vitac_common.logger import get_logger
from vitac_common.seeding import derive_seed
from vitac_data.records import Modality, Observation
from vitac_model.assoc import (
    contrastive_loss2,
    contrastive_loss3,
    fuse_max,
    fuse_max_backward,
    unit_difference,
)
from vitac_model.encoder import Encoder, EncoderSpec, encoder_init
from vitac_model.heads import ClassifierHead, classify_cluster, head_init

log = get_logger(__name__)


class Architecture(str, Enum):
    CROSS_MODAL = "cross_modal"
    AUXILIARY = "auxiliary"
    MULTI_INPUT = "multi_input"
    SNN2 = "snn2"

    @property
    def has_heads(self) -> bool:
        return self in (Architecture.AUXILIARY, Architecture.MULTI_INPUT)

    @property
    def n_branches(self) -> int:
        return 2 if self is Architecture.SNN2 else 3


DEFAULT_BRANCHES: dict[Architecture, tuple[Modality, ...]] = {
    Architecture.CROSS_MODAL: (Modality.DEPTH, Modality.COLOR, Modality.TOUCH_FOLD),
    Architecture.AUXILIARY: (Modality.DEPTH, Modality.COLOR, Modality.TOUCH_FOLD),
    Architecture.MULTI_INPUT: (Modality.DEPTH, Modality.COLOR, Modality.TOUCH_FOLD),
    Architecture.SNN2: (Modality.DEPTH, Modality.DEPTH),
}


@dataclass(frozen=True)
class TripletGroup:
    """One training example: observations per branch, Y and per-branch cluster labels.

    A branch holds one observation, or several presses of one fabric for the
    multi-input touch branch.
    """

    branches: tuple[tuple[Observation, ...], ...]
    y: int
    cluster_labels: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.y not in (0, 1):
            raise DataValidationError(f"Y must be 0 or 1, got {self.y}")
        if not self.branches or any(len(b) == 0 for b in self.branches):
            raise DataValidationError("every branch needs at least one observation")
        for b in self.branches:
            if len({o.fabric_id for o in b}) != 1:
                raise DataValidationError("observations within one branch must share a fabric")
        same = len(set(self.fabric_ids)) == 1
        if same != (self.y == 0):
            raise DataValidationError(
                f"Y={self.y} inconsistent with branch fabrics {self.fabric_ids}"
            )
        if self.cluster_labels and len(self.cluster_labels) != len(self.branches):
            raise DataValidationError("one cluster label per branch expected")

    @property
    def fabric_ids(self) -> tuple[int, ...]:
        return tuple(b[0].fabric_id for b in self.branches)

    @property
    def x1(self) -> tuple[Observation, ...]:
        return self.branches[0]

    @property
    def x2(self) -> tuple[Observation, ...]:
        return self.branches[1]

    @property
    def x3(self) -> tuple[Observation, ...]:
        return self.branches[2]


@dataclass
class JointModel:
    architecture: Architecture
    branches: tuple[Modality, ...]
    encoders: dict[Modality, Encoder]
    heads: dict[Modality, ClassifierHead] = field(default_factory=dict)
    margin: float = 2.0
    aux_weight: float = 1.0
    presses: int = 1
    backbone_seed: int | None = None
    train_config: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.architecture = Architecture(self.architecture)
        self.branches = tuple(Modality(m) for m in self.branches)
        if len(self.branches) != self.architecture.n_branches:
            raise ModelCompatibilityError(
                f"{self.architecture.value} needs {self.architecture.n_branches} branches, got {len(self.branches)}"
            )
        missing = [m.value for m in self.modalities if m not in self.encoders]
        if missing:
            raise ModelCompatibilityError(f"no encoder for branch modalities {missing}")
        dims = {self.encoders[m].spec.out_dim for m in self.modalities}
        in_dims = {self.encoders[m].spec.in_dim for m in self.modalities}
        if len(dims) != 1 or len(in_dims) != 1:
            raise ShapeError(f"encoders disagree on dims: inputs {sorted(in_dims)}, outputs {sorted(dims)}")
        if self.architecture.has_heads:
            if set(self.heads) != set(self.modalities):
                raise ModelCompatibilityError("auxiliary architectures need one head per branch modality")
            if any(h.in_dim != self.embedding_dim for h in self.heads.values()):
                raise ShapeError("head input dim must equal the embedding dim")
        elif self.heads:
            raise ModelCompatibilityError(f"{self.architecture.value} carries no classifier heads")
        if self.presses < 1 or (self.presses > 1 and self.architecture is not Architecture.MULTI_INPUT):
            raise ModelCompatibilityError("several presses per group only apply to the multi-input net")

    @property
    def modalities(self) -> list[Modality]:
        """Distinct branch modalities in branch order."""
        return list(dict.fromkeys(self.branches))

    @property
    def feature_dim(self) -> int:
        return self.encoders[self.branches[0]].spec.in_dim

    @property
    def embedding_dim(self) -> int:
        return self.encoders[self.branches[0]].spec.out_dim

    @property
    def n_classes(self) -> int:
        return next(iter(self.heads.values())).n_classes if self.heads else 0

    def presses_for(self, branch: int) -> int:
        return self.presses if branch == len(self.branches) - 1 else 1

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for mod in self.modalities:
            params.extend(self.encoders[mod].parameters())
        for mod in self.modalities:
            if mod in self.heads:
                params.extend(self.heads[mod].parameters())
        return params

    def with_parameters(self, params: Sequence[np.ndarray]) -> "JointModel":
        params = list(params)
        encoders, heads, pos = {}, {}, 0
        for mod in self.modalities:
            n = 2 * self.encoders[mod].spec.n_layers
            encoders[mod] = self.encoders[mod].with_parameters(params[pos:pos + n])
            pos += n
        for mod in self.modalities:
            if mod in self.heads:
                heads[mod] = ClassifierHead(params[pos], params[pos + 1])
                pos += 2
        if pos != len(params):
            raise ShapeError(f"model has {pos} parameter arrays, got {len(params)}")
        return JointModel(
            architecture=self.architecture,
            branches=self.branches,
            encoders=encoders,
            heads=heads,
            margin=self.margin,
            aux_weight=self.aux_weight,
            presses=self.presses,
            backbone_seed=self.backbone_seed,
            train_config=dict(self.train_config),
        )

    def copy(self) -> "JointModel":
        return self.with_parameters([p.copy() for p in self.parameters()])

    def embed(self, modality: Modality, features: np.ndarray) -> np.ndarray:
        """Embeddings of raw feature vectors (one row per observation)."""
        modality = Modality(modality)
        if modality not in self.encoders:
            raise ModelCompatibilityError(
                f"model has no {modality.value} encoder (branches: {[m.value for m in self.branches]})"
            )
        out, _ = self.encoders[modality].forward(features)
        return out


def build_model(
    architecture: Architecture | str,
    feature_dim: int,
    embedding_dim: int = 64,
    hidden_dims: Sequence[int] = (128,),
    seed: int = 0,
    branches: Sequence[Modality] | None = None,
    n_classes: int = 8,
    margin: float = 2.0,
    aux_weight: float = 1.0,
    presses: int = 3,
) -> JointModel:
    arch = Architecture(architecture)
    branches = tuple(Modality(m) for m in (branches or DEFAULT_BRANCHES[arch]))
    spec = EncoderSpec((feature_dim, *hidden_dims, embedding_dim))
    modalities = list(dict.fromkeys(branches))
    encoders = {m: encoder_init(spec, derive_seed(seed, "encoder", m.value)) for m in modalities}
    heads = (
        {m: head_init(embedding_dim, n_classes, derive_seed(seed, "head", m.value)) for m in modalities}
        if arch.has_heads
        else {}
    )
    return JointModel(
        architecture=arch,
        branches=branches,
        encoders=encoders,
        heads=heads,
        margin=margin,
        aux_weight=aux_weight,
        presses=presses if arch is Architecture.MULTI_INPUT else 1,
    )


@dataclass
class BatchOutput:
    loss: float
    losses: np.ndarray
    distances: np.ndarray
    embeddings: list[np.ndarray]
    grads: list[np.ndarray]


@dataclass
class ForwardOutput:
    embeddings: tuple[np.ndarray, ...]
    distance: float
    loss: float
    grads: list[np.ndarray]


def _branch_inputs(model: JointModel, groups: Sequence[TripletGroup]) -> list[np.ndarray]:
    """Per branch, an array (presses, batch, F)."""
    inputs = []
    for b, mod in enumerate(model.branches):
        presses = model.presses_for(b)
        for g in groups:
            if len(g.branches) != len(model.branches):
                raise ModelCompatibilityError(
                    f"group has {len(g.branches)} branches, {model.architecture.value} needs {len(model.branches)}"
                )
            if len(g.branches[b]) != presses:
                raise ModelCompatibilityError(
                    f"branch {b} needs {presses} observation(s) per group, got {len(g.branches[b])}"
                )
            if any(o.modality is not mod for o in g.branches[b]):
                raise ModelCompatibilityError(f"branch {b} expects {mod.value} observations")
        inputs.append(
            np.stack([[g.branches[b][p].features for g in groups] for p in range(presses)]).astype(np.float64)
        )
    return inputs


def model_forward_batch(model: JointModel, groups: Sequence[TripletGroup]) -> BatchOutput:
    """Mean loss over the groups and its exact gradient for every model parameter."""
    if not groups:
        raise DataValidationError("empty batch")
    n = len(groups)
    y = np.array([g.y for g in groups])
    inputs = _branch_inputs(model, groups)

    # forward, one encoder pass per modality over all its branch slots
    raw: list[np.ndarray] = [np.empty(0)] * len(model.branches)
    caches = {}
    for mod in model.modalities:
        slots = [b for b, m in enumerate(model.branches) if m is mod]
        rows = np.concatenate([inputs[b].reshape(-1, inputs[b].shape[-1]) for b in slots])
        out, caches[mod] = model.encoders[mod].forward(rows)
        start = 0
        for b in slots:
            size = inputs[b].shape[0] * n
            raw[b] = out[start:start + size].reshape(inputs[b].shape[0], n, -1)
            start += size

    embeddings, winners = [], []
    for r in raw:
        if r.shape[0] > 1:
            fused, w = fuse_max(list(r))
            embeddings.append(fused)
            winners.append(w)
        else:
            embeddings.append(r[0])
            winners.append(None)

    # contrastive part
    grad_e = [np.zeros_like(e) for e in embeddings]
    if len(embeddings) == 3:
        d12, u12 = unit_difference(embeddings[0], embeddings[1])
        d23, u23 = unit_difference(embeddings[1], embeddings[2])
        d31, u31 = unit_difference(embeddings[2], embeddings[0])
        distances = d12 + d23 + d31
        losses, d_loss = contrastive_loss3(distances, y, model.margin)
        scale = (np.asarray(d_loss) / n)[:, None]
        grad_e[0] += scale * (u12 - u31)
        grad_e[1] += scale * (u23 - u12)
        grad_e[2] += scale * (u31 - u23)
    else:
        distances, u12 = unit_difference(embeddings[0], embeddings[1])
        losses, d_loss = contrastive_loss2(distances, y, model.margin)
        scale = (np.asarray(d_loss) / n)[:, None]
        grad_e[0] += scale * u12
        grad_e[1] -= scale * u12
    losses = np.atleast_1d(np.asarray(losses, dtype=np.float64))

    head_grads: dict[Modality, list[np.ndarray]] = {}
    if model.architecture.has_heads:
        labels = np.array([g.cluster_labels for g in groups])
        if labels.shape != (n, len(model.branches)):
            raise DataValidationError("auxiliary architectures need a cluster label for every branch")
        aux = np.zeros(n)
        for b, mod in enumerate(model.branches):
            out = classify_cluster(model.heads[mod], embeddings[b], labels[:, b], model.aux_weight / n)
            aux = aux + out.loss
            grad_e[b] += out.grad_embedding
            acc = head_grads.setdefault(mod, [np.zeros_like(p) for p in model.heads[mod].parameters()])
            acc[0] += out.grad_weights
            acc[1] += out.grad_biases
        losses = losses + model.aux_weight * aux

    # backward through fusion and encoders
    enc_grads: dict[Modality, list[np.ndarray]] = {}
    for mod in model.modalities:
        slots = [b for b, m in enumerate(model.branches) if m is mod]
        pieces = []
        for b in slots:
            presses = raw[b].shape[0]
            if winners[b] is None:
                g_raw = grad_e[b][None]
            else:
                g_raw = fuse_max_backward(grad_e[b], winners[b], presses)
            pieces.append(g_raw.reshape(presses * n, -1))
        grads = model.encoders[mod].backward(caches[mod], np.concatenate(pieces))
        enc_grads[mod] = grads.flat()

    flat: list[np.ndarray] = []
    for mod in model.modalities:
        flat.extend(enc_grads[mod])
    for mod in model.modalities:
        if mod in model.heads:
            flat.extend(head_grads[mod])

    return BatchOutput(
        loss=float(np.mean(losses)),
        losses=losses,
        distances=np.atleast_1d(distances),
        embeddings=embeddings,
        grads=flat,
    )


def model_forward(model: JointModel, group: TripletGroup) -> ForwardOutput:
    out = model_forward_batch(model, [group])
    return ForwardOutput(
        embeddings=tuple(e[0] for e in out.embeddings),
        distance=float(out.distances[0]),
        loss=out.loss,
        grads=out.grads,
    )
