from __future__ import annotations

import numpy as np
import pytest
from sklearn.metrics import silhouette_score

from claslab.errors import PerplexityError
from claslab.tsne import conditional_affinities, joint_affinities, kl_divergence, squared_distances, tsne_2d


def two_clusters(n_per, seed=0):
    rng = np.random.default_rng(seed)
    centre = np.zeros(10)
    centre[0] = 10.0
    x = np.vstack([rng.normal(0, 1, (n_per, 10)), rng.normal(0, 1, (n_per, 10)) + centre])
    return x, np.repeat([0, 1], n_per)


def test_squared_distances_oracle(rng):
    x = rng.normal(size=(7, 3))
    ref = np.array([[float(np.sum((a - b) ** 2)) for b in x] for a in x])
    np.testing.assert_allclose(squared_distances(x), ref, rtol=1e-14)
    assert np.all(np.diag(squared_distances(x)) == 0)


def test_joint_p_normalised_and_symmetric(rng):
    for _ in range(5):
        x = rng.normal(size=(60, 5))
        p, perp = joint_affinities(x, 10.0)
        assert abs(p.sum() - 1.0) <= 1e-9
        assert np.array_equal(p, p.T)
        assert np.all(np.diag(p) == 0)
        assert np.all(np.abs(perp - 10.0) < 1e-5)


def test_conditional_rows_hit_perplexity(rng):
    x = rng.normal(size=(40, 4))
    pc, _, perp = conditional_affinities(squared_distances(x), 5.0)
    np.testing.assert_allclose(pc.sum(axis=1), 1.0, atol=1e-12)
    # recompute each row's perplexity from its distribution
    h = -np.sum(np.where(pc > 0, pc * np.log(np.where(pc > 0, pc, 1.0)), 0.0), axis=1)
    assert np.all(np.abs(np.exp(h) - 5.0) < 1e-5)
    np.testing.assert_allclose(perp, np.exp(h), atol=1e-9)


def test_infeasible_perplexity(rng):
    x = rng.normal(size=(30, 3))
    with pytest.raises(PerplexityError):
        joint_affinities(x, 10.0)
    with pytest.raises(PerplexityError):
        tsne_2d(x, perplexity=0.0)


def test_input_limits():
    with pytest.raises(ValueError):
        tsne_2d(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        tsne_2d(np.zeros((10, 2)), perplexity=2.0, init="spiral")


def test_kl_zero_when_distributions_match():
    y = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    num = 1.0 / (1.0 + squared_distances(y))
    np.fill_diagonal(num, 0.0)
    assert abs(kl_divergence(num / num.sum(), y)) < 1e-15


def test_clusters_separate_and_kl_drops():
    x, labels = two_clusters(40)
    res = tsne_2d(x, perplexity=10.0)
    assert res.kl_final < res.kl_post_exaggeration
    assert res.kl_final < res.kl_initial
    assert silhouette_score(res.coords, labels) > 0
    # orient by cluster means and split on the first axis
    c0, c1 = res.coords[labels == 0].mean(0), res.coords[labels == 1].mean(0)
    axis = (c1 - c0) / np.linalg.norm(c1 - c0)
    proj = res.coords @ axis
    thr = (c0 @ axis + c1 @ axis) / 2
    assert np.all((proj > thr) == (labels == 1))


def test_deterministic():
    x, _ = two_clusters(15, seed=3)
    a = tsne_2d(x, perplexity=5.0, n_iter=200, seed=4)
    b = tsne_2d(x, perplexity=5.0, n_iter=200, seed=4)
    assert np.array_equal(a.coords, b.coords)
    r1 = tsne_2d(x, perplexity=5.0, n_iter=50, seed=1, init="random")
    r2 = tsne_2d(x, perplexity=5.0, n_iter=50, seed=1, init="random")
    assert np.array_equal(r1.coords, r2.coords)
