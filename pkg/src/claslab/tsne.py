"""Exact O(N^2) t-SNE for small embedding sets.

Gaussian input affinities with per-point bandwidths found by bisection,
symmetrised to a joint P; Student-t output affinities; gradient descent with
momentum, per-parameter gains and early exaggeration. The gradient is the
only backend-dependent step and both backends produce identical bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import PerplexityError


def squared_distances(x: np.ndarray) -> np.ndarray:
    # explicit differences: no cancellation and no BLAS-dependent rounding
    x = np.asarray(x, dtype=np.float64)
    d = np.zeros((x.shape[0], x.shape[0]))
    for k in range(x.shape[1]):
        diff = x[:, k : k + 1] - x[:, k]
        d += diff * diff
    return d


def conditional_affinities(d2: np.ndarray, perplexity: float, tol: float = 1e-5, max_iter: int = 200):
    """Row-stochastic P(j|i) whose perplexities match ``perplexity`` to within ``tol``.

    Bisection runs on the Gaussian precision of every row at once.
    Returns (P, precisions, achieved perplexities).
    """
    n = d2.shape[0]
    off = ~np.eye(n, dtype=bool)
    # shifting each row by its smallest off-diagonal distance leaves P unchanged
    shifted = d2 - np.where(off, d2, np.inf).min(axis=1, keepdims=True)
    target = np.log(perplexity)
    beta = np.ones(n)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    p = np.zeros_like(d2)
    perp = np.zeros(n)
    for _ in range(max_iter):
        e = np.where(off, np.exp(-shifted * beta[:, None]), 0.0)
        s = e.sum(axis=1)
        p_new = e / s[:, None]
        h = np.log(s) + beta * (shifted * p_new).sum(axis=1)
        perp_new = np.exp(h)
        upd = ~done
        p[upd] = p_new[upd]
        perp[upd] = perp_new[upd]
        done |= np.abs(perp_new - perplexity) < tol
        if done.all():
            return p, beta, perp
        too_flat = h > target
        lo = np.where(upd & too_flat, beta, lo)
        hi = np.where(upd & ~too_flat, beta, hi)
        grow = np.where(np.isinf(hi), beta * 2.0, (lo + hi) / 2.0)
        shrink = (lo + hi) / 2.0
        beta = np.where(upd, np.where(too_flat, grow, shrink), beta)
    bad = np.flatnonzero(~done)
    raise PerplexityError(f"bandwidth search did not reach perplexity {perplexity} for points {bad[:5].tolist()}")


def joint_affinities(x: np.ndarray, perplexity: float, tol: float = 1e-5):
    n = x.shape[0]
    if not 0 < perplexity < n / 3:
        raise PerplexityError(f"perplexity must lie in (0, N/3) = (0, {n / 3:.3g}), got {perplexity}")
    pc, _, perp = conditional_affinities(squared_distances(x), perplexity, tol)
    p = (pc + pc.T) / (2.0 * n)
    return p, perp


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    d2 = squared_distances(y)
    num = 1.0 / (1.0 + d2)
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], 1e-300))))


def pca_init(x: np.ndarray, scale: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    xc = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(xc, full_matrices=False)
    comps = vt[:2]
    # fix the SVD sign ambiguity: largest-magnitude loading positive
    signs = np.sign(comps[np.arange(2), np.abs(comps).argmax(axis=1)])
    y = (xc[:, None, :] * (comps * signs[:, None])[None, :, :]).sum(axis=2)
    std = y[:, 0].std()
    return y / std * scale if std > 0 else y


@dataclass
class TSNEResult:
    coords: np.ndarray
    p: np.ndarray
    perplexities: np.ndarray
    kl_initial: float
    kl_post_exaggeration: float
    kl_final: float


def tsne_2d(
    x: np.ndarray,
    perplexity: float = 30.0,
    n_iter: int = 1000,
    seed: int = 0,
    learning_rate: float = 200.0,
    exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    init: str = "pca",
) -> TSNEResult:
    """Project ``x`` (N x d, N <= 2000) to 2-D. Deterministic for a given seed."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if x.ndim != 2 or n < 4:
        raise ValueError("t-SNE needs an (N, d) array with N >= 4")
    if n > 2000:
        raise ValueError("exact t-SNE is limited to N <= 2000")
    p, perp = joint_affinities(x, perplexity)
    if init == "pca":
        y = pca_init(x)
    elif init == "random":
        y = np.random.default_rng(seed).standard_normal((n, 2)) * 1e-4
    else:
        raise ValueError(f"unknown init {init!r}")
    kl0 = kl_divergence(p, y)
    kl_mid = kl0
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    for it in range(n_iter):
        early = it < exaggeration_iters
        momentum = 0.5 if early else 0.8
        grad = kernels.tsne_grad(p, y, exaggeration if early else 1.0)
        flip = np.sign(grad) != np.sign(update)
        gains = np.where(flip, gains + 0.2, gains * 0.8)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - learning_rate * (gains * grad)
        y = y + update
        if it + 1 == exaggeration_iters:
            kl_mid = kl_divergence(p, y)
    return TSNEResult(y, p, perp, kl0, kl_mid, kl_divergence(p, y))
