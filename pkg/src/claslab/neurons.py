"""Dataset-level neuron statistics, four-way categorization and bridge-layer selection."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .binfmt import read_container, write_container
from .corpus import ParallelCorpus
from .errors import ActivationError, CorpusError, FormatError, LengthError
from .model import ModelWeights, forward

STATS_MAGIC = b"CLS1"

DEAD, SPECIFIC, PARTIAL, ALL = 0, 1, 2, 3
KIND_NAMES = ("dead", "language_specific", "partial_shared", "all_shared")
_RLE_CODES = {DEAD: "D", PARTIAL: "P", ALL: "A"}


@dataclass(frozen=True)
class ActivationStats:
    """Mean activation per (layer, neuron, language).

    ``mean_act[l, n, k]`` is the mean over samples of the per-sample mean over
    token positions of ``|h|`` (or of ``h`` in signed mode).
    """

    languages: tuple[str, ...]
    mean_act: np.ndarray
    sample_count: int
    position_counts: np.ndarray
    corpus_digest: str
    signed: bool = False

    @property
    def n_layers(self) -> int:
        return self.mean_act.shape[0]

    @property
    def d_ff(self) -> int:
        return self.mean_act.shape[1]

    def save(self, path: str | Path) -> None:
        header = {
            "format": "CLS1",
            "languages": list(self.languages),
            "dims": list(self.mean_act.shape),
            "sample_count": self.sample_count,
            "position_counts": self.position_counts.tolist(),
            "corpus_digest": self.corpus_digest,
            "signed": self.signed,
            "t_act": None,
        }
        write_container(path, STATS_MAGIC, header, {"mean_act": self.mean_act})

    @classmethod
    def load(cls, path: str | Path) -> "ActivationStats":
        header, tensors = read_container(path, STATS_MAGIC)
        try:
            mean_act = tensors["mean_act"]
            if list(mean_act.shape) != header["dims"]:
                raise FormatError(f"{path}: dims {header['dims']} disagree with tensor {mean_act.shape}")
            return cls(
                tuple(header["languages"]),
                mean_act,
                int(header["sample_count"]),
                np.asarray(header["position_counts"], dtype=np.int64),
                header["corpus_digest"],
                bool(header.get("signed", False)),
            )
        except KeyError as exc:
            raise FormatError(f"{path}: stats header missing {exc.args[0]!r}") from exc


def _sample_means(model: ModelWeights, tokenizer, texts: Sequence[str], signed: bool):
    layers = range(model.config.n_layers)
    means = np.empty((model.config.n_layers, model.config.d_ff, len(texts)), dtype=np.float64)
    counts = []
    for k, text in enumerate(texts):
        tokens = tokenizer.encode(text)
        if len(tokens) > model.config.max_seq_len:
            raise LengthError(f"text of {len(tokens)} tokens exceeds max_seq_len")
        acts = forward(model, tokens, capture=layers).activations
        for li in layers:
            a = acts[li].astype(np.float64)
            means[li, :, k] = (a if signed else np.abs(a)).mean(axis=0)
        counts.append(len(tokens))
    return means, counts


def collect_stats(
    model: ModelWeights,
    corpus: ParallelCorpus,
    tokenizer,
    signed: bool = False,
    workers: int = 1,
) -> ActivationStats:
    """Per-language mean activations over every layer, one sample at a time.

    Each sample is weighted equally regardless of its length. Samples may be
    processed by several threads; the reduction always runs in sample order.
    """
    if len(corpus) == 0:
        raise CorpusError("cannot collect statistics from an empty corpus")
    langs = corpus.languages

    def job(sample):
        return _sample_means(model, tokenizer, [sample.texts[code] for code in langs], signed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, corpus.samples))
    else:
        results = [job(s) for s in corpus.samples]

    total = np.zeros((model.config.n_layers, model.config.d_ff, len(langs)), dtype=np.float64)
    counts = []
    for sample, (means, cnt) in zip(corpus.samples, results):
        if not np.isfinite(means).all():
            li, n, k = np.argwhere(~np.isfinite(means))[0]
            raise ActivationError(
                f"non-finite activation at layer {li}, neuron {n} (sample {sample.id!r}, language {langs[k]!r})"
            )
        total += means
        counts.append(cnt)
    mean_act = (total / len(corpus)).astype(np.float32)
    if not np.isfinite(mean_act).all():
        li, n, _ = np.argwhere(~np.isfinite(mean_act))[0]
        raise ActivationError(f"activation overflow at layer {li}, neuron {n}")
    return ActivationStats(langs, mean_act, len(corpus), np.asarray(counts, dtype=np.int64), corpus.digest(), signed)


@dataclass(frozen=True)
class NeuronCategory:
    kind: str
    lang: str | None = None

    def __str__(self) -> str:
        return f"{self.kind}({self.lang})" if self.lang else self.kind


@dataclass(frozen=True)
class CategoryTable:
    """Category code per (layer, neuron) plus the provenance of the statistics.

    ``codes`` holds DEAD/SPECIFIC/PARTIAL/ALL; ``spec_lang`` holds the language
    index for SPECIFIC neurons and -1 elsewhere.
    """

    codes: np.ndarray
    spec_lang: np.ndarray
    languages: tuple[str, ...]
    t_act: float
    corpus_digest: str
    signed: bool = False

    @property
    def n_layers(self) -> int:
        return self.codes.shape[0]

    @property
    def d_ff(self) -> int:
        return self.codes.shape[1]

    def category(self, layer: int, neuron: int) -> NeuronCategory:
        code = int(self.codes[layer, neuron])
        lang = self.languages[self.spec_lang[layer, neuron]] if code == SPECIFIC else None
        return NeuronCategory(KIND_NAMES[code], lang)

    def counts(self) -> np.ndarray:
        """(n_layers, 4) neuron counts per category."""
        return np.stack([(self.codes == c).sum(axis=1) for c in (DEAD, SPECIFIC, PARTIAL, ALL)], axis=1)

    def provenance(self) -> dict:
        return {
            "t_act": self.t_act,
            "languages": list(self.languages),
            "corpus_digest": self.corpus_digest,
            "signed": self.signed,
        }

    def to_json(self) -> dict:
        layers = []
        for li in range(self.n_layers):
            runs: list[list] = []
            for n in range(self.d_ff):
                code = int(self.codes[li, n])
                tag = f"S:{self.languages[self.spec_lang[li, n]]}" if code == SPECIFIC else _RLE_CODES[code]
                if runs and runs[-1][0] == tag:
                    runs[-1][1] += 1
                else:
                    runs.append([tag, 1])
            layers.append(runs)
        return {
            "format": "claslab-categories/1",
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "provenance": self.provenance(),
            "layers": layers,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CategoryTable":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            prov = doc["provenance"]
            langs = tuple(prov["languages"])
            n_layers, d_ff = int(doc["n_layers"]), int(doc["d_ff"])
            codes = np.zeros((n_layers, d_ff), dtype=np.uint8)
            spec = np.full((n_layers, d_ff), -1, dtype=np.int16)
            decode = {v: k for k, v in _RLE_CODES.items()}
            for li, runs in enumerate(doc["layers"]):
                n = 0
                for tag, length in runs:
                    if tag.startswith("S:"):
                        codes[li, n : n + length] = SPECIFIC
                        spec[li, n : n + length] = langs.index(tag[2:])
                    else:
                        codes[li, n : n + length] = decode[tag]
                    n += length
                if n != d_ff:
                    raise FormatError(f"{path}: layer {li} covers {n} neurons, expected {d_ff}")
            return cls(codes, spec, langs, float(prov["t_act"]), prov["corpus_digest"], bool(prov.get("signed", False)))
        except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"{path}: not a category file ({exc})") from exc


def categorize(stats: ActivationStats, t_act: float = 0.0) -> CategoryTable:
    """Assign each neuron a category from which languages it is active for.

    Active means ``mean_act > t_act`` (strict). No active language gives dead,
    one gives language-specific, all gives all-shared, anything between is
    partial-shared.
    """
    if t_act < 0 or not np.isfinite(t_act):
        raise ValueError("t_act must be a finite value >= 0")
    n_lang = len(stats.languages)
    if n_lang < 2:
        raise ValueError("categorization needs at least two languages")
    active = stats.mean_act > np.float32(t_act)
    count = active.sum(axis=2)
    codes = np.full(count.shape, PARTIAL, dtype=np.uint8)
    codes[count == 0] = DEAD
    codes[count == 1] = SPECIFIC
    codes[count == n_lang] = ALL
    spec = np.where(codes == SPECIFIC, active.argmax(axis=2), -1).astype(np.int16)
    return CategoryTable(codes, spec, stats.languages, float(t_act), stats.corpus_digest, stats.signed)


@dataclass(frozen=True)
class LayerCategoryDistribution:
    """Per-layer fractions, columns ordered (dead, language_specific, partial_shared, all_shared)."""

    fractions: np.ndarray

    @property
    def n_layers(self) -> int:
        return self.fractions.shape[0]

    def column(self, kind: str) -> np.ndarray:
        return self.fractions[:, KIND_NAMES.index(kind)]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("layer",) + KIND_NAMES)
            for li, row in enumerate(self.fractions):
                w.writerow([li] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "LayerCategoryDistribution":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        try:
            rows.sort(key=lambda r: int(r["layer"]))
            frac = np.array([[float(r[k]) for k in KIND_NAMES] for r in rows], dtype=np.float64)
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{path}: expected columns layer,{','.join(KIND_NAMES)}") from exc
        if frac.size == 0 or not np.allclose(frac.sum(axis=1), 1.0, atol=1e-6) or (frac < 0).any():
            raise FormatError(f"{path}: each row must be non-negative fractions summing to 1")
        return cls(frac)


def layer_distribution(table: CategoryTable) -> LayerCategoryDistribution:
    return LayerCategoryDistribution(table.counts().astype(np.float64) / table.d_ff)


def select_bridge_layers(
    dist: LayerCategoryDistribution,
    window: int,
    exclude_tail: int = 2,
    min_layer: int | None = None,
) -> tuple[int, ...]:
    """Contiguous window maximising sum(partial_shared - dead - language_specific).

    Candidates start at ``min_layer`` (default: first layer of the upper half)
    and end before the last ``exclude_tail`` layers. Ties go to the deeper
    window.
    """
    n = dist.n_layers
    if window < 1 or exclude_tail < 0:
        raise ValueError("window must be >= 1 and exclude_tail >= 0")
    if window + exclude_tail > n:
        raise ValueError(f"window {window} + exclude_tail {exclude_tail} exceeds {n} layers")
    lo = n // 2 if min_layer is None else min_layer
    hi = n - exclude_tail - window
    if lo > hi:
        raise ValueError(f"no {window}-layer window fits between layer {lo} and the excluded tail")
    score = dist.column("partial_shared") - dist.column("dead") - dist.column("language_specific")
    best, best_start = None, lo
    for start in range(lo, hi + 1):
        s = float(np.sum(score[start : start + window]))
        if best is None or s >= best:
            best, best_start = s, start
    return tuple(range(best_start, best_start + window))
