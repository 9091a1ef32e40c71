"""Representation geometry: sentence embeddings, cosine to the anchor, centroids, regressions."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import svg
from .corpus import ParallelCorpus
from .errors import DegenerateInputError, ShapeError
from .model import ModelWeights, forward
from .stattests import LinearFit, linear_fit
from .steering import Steering
from .tsne import TSNEResult, tsne_2d

POOLS = ("mean", "last")


@dataclass(frozen=True)
class SentenceEmbedding:
    vector: np.ndarray
    lang: str
    sample_id: str
    layer: int

    def __post_init__(self):
        if self.vector.ndim != 1:
            raise ShapeError("embedding must be a 1-D vector")
        if not np.all(np.isfinite(self.vector)):
            raise DegenerateInputError(f"non-finite embedding for {self.sample_id}/{self.lang}")


def default_layer(model: ModelWeights) -> int:
    return max(model.config.n_layers - 2, 0)


def _pool(states: np.ndarray, pool: str) -> np.ndarray:
    if pool == "mean":
        # float64 accumulation in position order
        return states.astype(np.float64).mean(axis=0)
    if pool == "last":
        return states[-1].astype(np.float64)
    raise ValueError(f"pool must be one of {POOLS}")


def embed_tokens(
    model: ModelWeights,
    tokens: Sequence[int],
    layers: Sequence[int],
    steer=None,
    pool: str = "mean",
) -> dict[int, np.ndarray]:
    """Pooled residual-stream state after each requested layer (one forward pass)."""
    out = forward(model, tokens, steer=steer, hidden=layers)
    return {li: _pool(out.hidden[li], pool) for li in layers}


def embed(
    model: ModelWeights,
    tokenizer,
    text: str,
    lang: str,
    layer: int | None = None,
    steer=None,
    pool: str = "mean",
    sample_id: str = "",
) -> SentenceEmbedding:
    layer = default_layer(model) if layer is None else layer
    vec = embed_tokens(model, tokenizer.encode(text), [layer], steer, pool)[layer]
    return SentenceEmbedding(vec, lang, sample_id, layer)


def embed_many(
    model: ModelWeights,
    tokenizer,
    corpus: ParallelCorpus,
    layers: Sequence[int],
    steering: Steering | None = None,
    pool: str = "mean",
    workers: int = 1,
) -> dict[int, dict[str, dict[str, np.ndarray]]]:
    """Embeddings as ``{layer: {lang: {sample_id: vector}}}`` for every sample and language."""
    layers = sorted(set(layers))
    jobs = [(s.id, lang, s.texts[lang]) for s in corpus for lang in corpus.languages]

    def run(job):
        sid, lang, text = job
        hook = None if steering is None else steering.hook_for(lang)
        return embed_tokens(model, tokenizer.encode(text), layers, hook, pool)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    out: dict[int, dict[str, dict[str, np.ndarray]]] = {li: {lang: {} for lang in corpus.languages} for li in layers}
    for (sid, lang, _), vecs in zip(jobs, results):
        for li in layers:
            out[li][lang][sid] = vecs[li]
    return out


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine of a zero vector is undefined")
    return min(1.0, max(-1.0, float(a @ b) / (na * nb)))


def mean_cosine(vectors: Mapping[str, np.ndarray], anchor: Mapping[str, np.ndarray]) -> float:
    """Mean over sample ids of cos(vector, anchor vector); ids must pair up exactly."""
    if set(vectors) != set(anchor):
        missing = sorted(set(vectors) ^ set(anchor))
        raise KeyError(f"unpaired sample ids: {missing[:5]}")
    if not vectors:
        raise DegenerateInputError("no samples to compare")
    return float(np.mean([cosine(vectors[k], anchor[k]) for k in sorted(vectors)]))


@dataclass
class AlignmentReport:
    anchor: str
    layers: tuple[int, ...]
    before: dict[str, float]
    after: dict[str, float]

    @property
    def delta(self) -> dict[str, float]:
        return {k: self.after[k] - self.before[k] for k in self.before}

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["language", "cos_before", "cos_after", "delta"])
            for lang in self.before:
                w.writerow([lang, repr(self.before[lang]), repr(self.after[lang]), repr(self.delta[lang])])

    def plot(self, path: str | Path) -> None:
        langs = list(self.before)
        svg.bars(path, langs, {"baseline": [self.before[x] for x in langs], "steered": [self.after[x] for x in langs]},
                 f"cosine to {self.anchor}", "cosine")


def cosine_to_anchor(
    before: Mapping[int, Mapping[str, Mapping[str, np.ndarray]]],
    after: Mapping[int, Mapping[str, Mapping[str, np.ndarray]]],
    anchor: str,
    layers: Sequence[int] | None = None,
) -> AlignmentReport:
    """Per non-anchor language: mean cosine to the anchor, averaged over ``layers``.

    ``before`` and ``after`` are ``{layer: {lang: {sample_id: vector}}}``. The
    anchor side of each comparison comes from the same run as the language side.
    """
    layers = tuple(sorted(before)) if layers is None else tuple(layers)
    if not layers:
        raise ValueError("need at least one layer")
    langs = [lang for lang in before[layers[0]] if lang != anchor]
    res = {}
    for name, emb in (("before", before), ("after", after)):
        res[name] = {
            lang: float(np.mean([mean_cosine(emb[li][lang], emb[li][anchor]) for li in layers])) for lang in langs
        }
    return AlignmentReport(anchor, layers, res["before"], res["after"])


def centroid(vectors: Sequence[np.ndarray]) -> np.ndarray:
    if len(vectors) == 0:
        raise DegenerateInputError("centroid of an empty set")
    return np.mean(np.asarray(vectors, dtype=np.float64), axis=0)


@dataclass
class AlignmentGainFit:
    languages: tuple[str, ...]
    alignment_delta: tuple[float, ...]
    metric_delta: tuple[float, ...]
    fit: LinearFit

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["language", "metric_delta", "alignment_delta"])
            for row in zip(self.languages, self.metric_delta, self.alignment_delta):
                w.writerow([row[0], repr(row[1]), repr(row[2])])

    def to_dict(self) -> dict:
        return {"slope": self.fit.slope, "intercept": self.fit.intercept, "r": self.fit.r, "n": len(self.languages)}

    def plot(self, path: str | Path) -> None:
        groups = {lang: [(x, y)] for lang, x, y in zip(self.languages, self.metric_delta, self.alignment_delta)}
        svg.scatter(path, groups, "alignment change vs metric change", "metric delta", "cosine delta",
                    fit=(self.fit.slope, self.fit.intercept))


def alignment_vs_gain(
    alignment_delta: Mapping[str, float],
    metric_delta: Mapping[str, float],
    anchor: str | None = None,
) -> AlignmentGainFit:
    """Least-squares fit of alignment change (y) on metric change (x) across languages."""
    langs = tuple(lang for lang in alignment_delta if lang != anchor)
    missing = [lang for lang in langs if lang not in metric_delta]
    if missing:
        raise KeyError(f"no metric delta for {missing}")
    if len(langs) < 2:
        raise DegenerateInputError("need at least two non-anchor languages")
    xs = tuple(float(metric_delta[lang]) for lang in langs)
    ys = tuple(float(alignment_delta[lang]) for lang in langs)
    return AlignmentGainFit(langs, ys, xs, linear_fit(xs, ys))


@dataclass
class Projection:
    langs: list[str]
    sample_ids: list[str]
    result: TSNEResult

    def centroids(self) -> dict[str, np.ndarray]:
        return {
            lang: centroid([c for c, l2 in zip(self.result.coords, self.langs) if l2 == lang])
            for lang in dict.fromkeys(self.langs)
        }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["language", "sample_id", "x", "y"])
            for lang, sid, (x, y) in zip(self.langs, self.sample_ids, self.result.coords):
                w.writerow([lang, sid, repr(float(x)), repr(float(y))])
            for lang, (x, y) in self.centroids().items():
                w.writerow([lang, "centroid", repr(float(x)), repr(float(y))])

    def plot(self, path: str | Path, title: str = "t-SNE") -> None:
        groups: dict[str, list] = {}
        for lang, (x, y) in zip(self.langs, self.result.coords):
            groups.setdefault(lang, []).append((float(x), float(y)))
        cents = self.centroids()
        groups["centroid"] = [(float(c[0]), float(c[1])) for c in cents.values()]
        svg.scatter(path, groups, title, star="centroid")


def project(
    embeddings: Mapping[str, Mapping[str, np.ndarray]],
    perplexity: float = 30.0,
    n_iter: int = 1000,
    seed: int = 0,
) -> Projection:
    """t-SNE of ``{lang: {sample_id: vector}}`` with rows in language then id order."""
    langs, ids, rows = [], [], []
    for lang, vecs in embeddings.items():
        for sid in sorted(vecs):
            langs.append(lang)
            ids.append(sid)
            rows.append(vecs[sid])
    return Projection(langs, ids, tsne_2d(np.asarray(rows), perplexity, n_iter, seed))
