"""Central finite differences, the oracle for every analytic gradient."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from vitac_common.exception import NumericError
from vitac_model.encoder import Encoder, Gradients


def finite_diff_params(
    loss_fn: Callable[[], float],
    params: Sequence[np.ndarray],
    eps: float = 1e-5,
) -> list[np.ndarray]:
    """Perturb each scalar of `params` in place, restore it, return d(loss)/d(param)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    grads = []
    for p in params:
        g = np.zeros_like(p, dtype=np.float64)
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        for i in range(flat_p.size):
            original = flat_p[i]
            flat_p[i] = original + eps
            up = float(loss_fn())
            flat_p[i] = original - eps
            down = float(loss_fn())
            flat_p[i] = original
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(f"non-finite loss while differencing scalar {i}")
            flat_g[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def finite_diff_grad(
    loss_fn: Callable[[Encoder], float],
    enc: Encoder,
    eps: float = 1e-5,
) -> Gradients:
    """Finite-difference gradients of `loss_fn(enc)` for every weight and bias."""
    work = enc.copy()
    grads = finite_diff_params(lambda: loss_fn(work), work.parameters(), eps)
    return Gradients(weights=grads[0::2], biases=grads[1::2])


def relative_error(a: Sequence[np.ndarray] | np.ndarray, b: Sequence[np.ndarray] | np.ndarray) -> float:
    """`||a - b|| / (||a|| + ||b||)` over all arrays; 0 when both are zero."""
    fa = np.concatenate([np.ravel(x) for x in (a if isinstance(a, (list, tuple)) else [a])])
    fb = np.concatenate([np.ravel(x) for x in (b if isinstance(b, (list, tuple)) else [b])])
    scale = np.linalg.norm(fa) + np.linalg.norm(fb)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(fa - fb) / scale)
