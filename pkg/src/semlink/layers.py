"""Small dense-layer primitives shared by the codec and fusion modules.

Forward functions accept arrays with any leading shape (..., d_in) and
return matching outputs; backward functions take the upstream gradient and
the saved forward inputs, recomputing cheap intermediates instead of
carrying caches around.
"""

from __future__ import annotations

import numpy as np


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)


def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    y = x @ w
    if b is not None:
        y = y + b
    return y


def dense_backward(
    d_y: np.ndarray, x: np.ndarray, w: np.ndarray, with_bias: bool = True
):
    """Return (d_x, d_w, d_b); d_b is None when with_bias is False."""
    d_in, d_out = w.shape
    x2 = x.reshape(-1, d_in)
    dy2 = d_y.reshape(-1, d_out)
    d_w = x2.T @ dy2
    d_b = dy2.sum(axis=0) if with_bias else None
    d_x = (dy2 @ w.T).reshape(x.shape)
    return d_x, d_w, d_b


def relu_backward(d_y: np.ndarray, pre: np.ndarray) -> np.ndarray:
    return d_y * (pre > 0)


def tanh_backward(d_y: np.ndarray, out: np.ndarray) -> np.ndarray:
    return d_y * (1.0 - out * out)


def softmax_backward(d_y: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Backward through a last-axis softmax given its output."""
    inner = (d_y * out).sum(axis=-1, keepdims=True)
    return out * (d_y - inner)


def row_l1_normalize_backward(
    d_y: np.ndarray, x: np.ndarray, eps: float = 1e-12
) -> np.ndarray:
    """Backward through row_l1_normalize; zero rows pass gradients unchanged."""
    sums = x.sum(axis=-1, keepdims=True)
    active = sums > eps
    safe = np.where(active, sums, 1.0)
    y = x / safe
    d_x = (d_y - (d_y * y).sum(axis=-1, keepdims=True)) / safe
    return np.where(active, d_x, d_y)
