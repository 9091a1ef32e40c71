"""Numba kernels; loop order matches the numpy fallbacks exactly."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _linear(x, wt):
    # wt is (K, O); the o loop is innermost so it vectorises, while each
    # out[t, o] still accumulates over k in ascending order.
    t_len, k_len = x.shape
    o_len = wt.shape[1]
    out = np.zeros((t_len, o_len), dtype=np.float32)
    for t in range(t_len):
        for k in range(k_len):
            xk = x[t, k]
            for o in range(o_len):
                out[t, o] += xk * wt[k, o]
    return out


def linear(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"linear: incompatible shapes {x.shape} and {w.shape}")
    return _linear(np.ascontiguousarray(x, dtype=np.float32), np.ascontiguousarray(w.T, dtype=np.float32))


@njit(cache=True, nogil=True)
def _row_sum(x):
    n, m = x.shape
    out = np.zeros(n, dtype=x.dtype)
    for i in range(n):
        s = out[i]
        for k in range(m):
            s += x[i, k]
        out[i] = s
    return out


def row_sum(x: np.ndarray) -> np.ndarray:
    if x.ndim != 2:
        raise ValueError("row_sum expects a 2-D array")
    return _row_sum(np.ascontiguousarray(x))


@njit(cache=True, nogil=True)
def _tsne_grad(p, y, exaggeration):
    n = y.shape[0]
    num = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                num[i, j] = 0.0
            else:
                d0 = y[i, 0] - y[j, 0]
                d1 = y[i, 1] - y[j, 1]
                num[i, j] = 1.0 / (1.0 + (d0 * d0 + d1 * d1))
    z = 0.0
    for i in range(n):
        r = 0.0
        for j in range(n):
            r += num[i, j]
        z += r
    grad = np.empty((n, 2))
    for i in range(n):
        g0 = 0.0
        g1 = 0.0
        for j in range(n):
            w = (exaggeration * p[i, j] - num[i, j] / z) * num[i, j]
            g0 += w * (y[i, 0] - y[j, 0])
            g1 += w * (y[i, 1] - y[j, 1])
        grad[i, 0] = 4.0 * g0
        grad[i, 1] = 4.0 * g1
    return grad


def tsne_grad(p: np.ndarray, y: np.ndarray, exaggeration: float) -> np.ndarray:
    return _tsne_grad(np.ascontiguousarray(p, dtype=np.float64), np.ascontiguousarray(y, dtype=np.float64), float(exaggeration))
