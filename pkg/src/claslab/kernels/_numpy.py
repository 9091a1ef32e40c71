"""Pure-numpy kernels. Reductions run sequentially over the last axis."""

from __future__ import annotations

import numpy as np


def linear(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``x @ w.T`` for float32 ``x`` (T, K) and ``w`` (O, K), summed in k order."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"linear: incompatible shapes {x.shape} and {w.shape}")
    out = np.zeros((x.shape[0], w.shape[0]), dtype=np.float32)
    for k in range(x.shape[1]):
        out += x[:, k : k + 1] * w[:, k]
    return out


def row_sum(x: np.ndarray) -> np.ndarray:
    """Sum of each row of a 2-D array, left to right."""
    out = np.zeros(x.shape[0], dtype=x.dtype)
    for k in range(x.shape[1]):
        out += x[:, k]
    return out


def tsne_grad(p: np.ndarray, y: np.ndarray, exaggeration: float) -> np.ndarray:
    """Exact t-SNE gradient of KL(P||Q) with respect to the 2-D layout ``y``."""
    d0 = y[:, 0:1] - y[:, 0]
    d1 = y[:, 1:2] - y[:, 1]
    num = 1.0 / (1.0 + (d0 * d0 + d1 * d1))
    np.fill_diagonal(num, 0.0)
    rows = np.cumsum(num, axis=1)[:, -1]
    z = np.cumsum(rows)[-1]
    w = (exaggeration * p - num / z) * num
    grad = np.empty_like(y)
    grad[:, 0] = 4.0 * np.cumsum(w * d0, axis=1)[:, -1]
    grad[:, 1] = 4.0 * np.cumsum(w * d1, axis=1)[:, -1]
    return grad
