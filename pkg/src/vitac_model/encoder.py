"""
Feed-forward branch encoders with exact backpropagation.

An encoder is a stack of affine layers; hidden layers are rectified, the last
layer is linear and its output is the embedding. Inputs may be one feature
vector or a batch matrix whose rows are samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from vitac_common.exception import ShapeError
from vitac_common.logger import get_logger

log = get_logger(__name__)


@dataclass(frozen=True)
class EncoderSpec:
    """Layer widths `[F, h1, ..., E]`."""

    layer_dims: tuple[int, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2:
            raise ShapeError(f"encoder needs at least an input and an output dim, got {dims}")
        if any(d < 1 for d in dims):
            raise ShapeError(f"all encoder dims must be >= 1, got {dims}")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1


@dataclass
class ActivationCache:
    """Everything backward needs: the 2-D input and each layer's pre-activation."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    post_activations: list[np.ndarray]
    batched: bool
    spec: EncoderSpec


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray | None = None

    def flat(self) -> list[np.ndarray]:
        """Interleaved `[dW0, db0, dW1, db1, ...]`, the order of `Encoder.parameters()`."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class Encoder:
    spec: EncoderSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.weights) != self.spec.n_layers or len(self.biases) != self.spec.n_layers:
            raise ShapeError(
                f"spec has {self.spec.n_layers} layers but got "
                f"{len(self.weights)} weight and {len(self.biases)} bias arrays"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.spec.layer_dims[i + 1], self.spec.layer_dims[i])
            if w.shape != expected or b.shape != (expected[0],):
                raise ShapeError(
                    f"layer {i}: weight {w.shape} / bias {b.shape} do not match {expected}"
                )

    def parameters(self) -> list[np.ndarray]:
        """Live references to the parameter arrays, interleaved W, b per layer."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_parameters(self, params: Sequence[np.ndarray]) -> "Encoder":
        params = list(params)
        if len(params) != 2 * self.spec.n_layers:
            raise ShapeError(f"expected {2 * self.spec.n_layers} arrays, got {len(params)}")
        return Encoder(self.spec, weights=params[0::2], biases=params[1::2])

    def copy(self) -> "Encoder":
        return self.with_parameters([p.copy() for p in self.parameters()])

    def forward(self, inputs: np.ndarray) -> tuple[np.ndarray, ActivationCache]:
        return encoder_forward(self, inputs)

    def backward(self, cache: ActivationCache, grad_output: np.ndarray) -> Gradients:
        return encoder_backward(self, cache, grad_output)


def encoder_init(spec: EncoderSpec, seed: int) -> Encoder:
    """He-scaled Gaussian weights (std sqrt(2 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_dims[:-1], spec.layer_dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Encoder(spec, weights=weights, biases=biases)


def encoder_forward(enc: Encoder, inputs: np.ndarray) -> tuple[np.ndarray, ActivationCache]:
    x = np.asarray(inputs, dtype=np.float64)
    batched = x.ndim == 2
    if x.ndim not in (1, 2):
        raise ShapeError(f"encoder input must be a vector or a matrix, got ndim={x.ndim}")
    x2 = x if batched else x[None, :]
    if x2.shape[1] != enc.spec.in_dim:
        raise ShapeError(f"encoder expects {enc.spec.in_dim} features, got {x2.shape[1]}")

    pre, post = [], []
    h = x2
    last = enc.spec.n_layers - 1
    for i, (w, b) in enumerate(zip(enc.weights, enc.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        post.append(h)

    cache = ActivationCache(
        inputs=x2, pre_activations=pre, post_activations=post, batched=batched, spec=enc.spec
    )
    return (h if batched else h[0]), cache


def encoder_backward(enc: Encoder, cache: ActivationCache, grad_output: np.ndarray) -> Gradients:
    """Gradients w.r.t. every weight, bias and the input; parameter grads sum over rows."""
    if cache.spec != enc.spec:
        raise ShapeError("activation cache was produced by an encoder with different layer dims")
    g = np.asarray(grad_output, dtype=np.float64)
    g = g if cache.batched else g[None, :]
    expected = cache.post_activations[-1].shape
    if g.shape != expected:
        raise ShapeError(f"grad_output shape {g.shape} does not match output {expected}")

    n = enc.spec.n_layers
    d_weights: list[np.ndarray] = [np.empty(0)] * n
    d_biases: list[np.ndarray] = [np.empty(0)] * n
    for i in reversed(range(n)):
        if i != n - 1:
            # rectifier mask: indicator of positive pre-activation
            g = g * (cache.pre_activations[i] > 0.0)
        layer_in = cache.inputs if i == 0 else cache.post_activations[i - 1]
        d_weights[i] = g.T @ layer_in
        d_biases[i] = g.sum(axis=0)
        g = g @ enc.weights[i]

    return Gradients(weights=d_weights, biases=d_biases, inputs=g if cache.batched else g[0])
