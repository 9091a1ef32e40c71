"""Constrained-logit classification, greedy span generation and (alpha, beta, gamma) grid search."""

from __future__ import annotations

import csv
import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import (
    DEFAULT_CLASSIFY_TEMPLATE,
    DEFAULT_SPAN_TEMPLATE,
    ClassifySample,
    SpanSample,
    build_prompt,
)
from .errors import CorpusError, LengthError
from .model import ModelWeights, forward, greedy_decode
from .steering import Steering

MAX_NEW_TOKENS = 32
DEFAULT_BETAS = (0.2, 0.4, 0.6)
DEFAULT_GAMMAS = (0.1, 0.2, 0.4)
DEFAULT_ALPHAS = (-1.0, -0.5, 0.0, 0.5, 1.0)
DEFAULT_DEV_SIZE = 200


def normalize_answer(text: str) -> list[str]:
    """Casefold, drop Unicode punctuation, split on whitespace."""
    text = unicodedata.normalize("NFC", text).casefold()
    text = "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))
    return text.split()


def token_f1(pred: str, gold: str) -> float:
    p, g = normalize_answer(pred), normalize_answer(gold)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    same = sum((Counter(p) & Counter(g)).values())
    if same == 0:
        return 0.0
    precision = same / len(p)
    recall = same / len(g)
    return 2 * precision * recall / (precision + recall)


def macro_f1(gold: Sequence[int], pred: Sequence[int]) -> float:
    """Mean per-class F1 over the classes that occur in gold or predictions."""
    classes = sorted(set(gold) | set(pred))
    scores = []
    for c in classes:
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        scores.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores)) if scores else 0.0


@dataclass(frozen=True)
class LabelSet:
    token_ids: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "token_ids", tuple(int(t) for t in self.token_ids))
        if len(set(self.token_ids)) != len(self.token_ids) or not self.token_ids:
            raise ValueError("label tokens must be distinct and non-empty")

    @classmethod
    def from_strings(cls, tokenizer, labels: Iterable[str] = ("0", "1", "2")) -> "LabelSet":
        return cls(tuple(tokenizer.token_id(s) for s in labels))

    def check(self, vocab_size: int) -> None:
        if max(self.token_ids) >= vocab_size or min(self.token_ids) < 0:
            raise ValueError("label token id outside the vocabulary")


@dataclass
class LanguageResult:
    lang: str
    metric: float
    n: int
    macro_f1: float | None = None


@dataclass
class EvalReport:
    task: str
    results: dict[str, LanguageResult]
    config_hash: str
    baseline: bool
    details: list[dict] = field(default_factory=list, repr=False)

    def metric(self, lang: str) -> float:
        return self.results[lang].metric

    def rows(self) -> list[list]:
        return [
            [r.lang, repr(r.metric), r.n, "" if r.macro_f1 is None else repr(r.macro_f1), self.config_hash]
            for r in self.results.values()
        ]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["language", "metric", "n", "macro_f1", "config_hash"])
            w.writerows(self.rows())

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "metric_name": "accuracy" if self.task == "classify" else "token_f1",
            "baseline": self.baseline,
            "config_hash": self.config_hash,
            "languages": {
                r.lang: {"metric": r.metric, "n": r.n, "macro_f1": r.macro_f1} for r in self.results.values()
            },
            "details": self.details,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "EvalReport":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        results = {k: LanguageResult(k, v["metric"], v["n"], v.get("macro_f1")) for k, v in d["languages"].items()}
        return cls(d["task"], results, d["config_hash"], d["baseline"], d.get("details", []))


def _partition(samples, languages: Sequence[str] | None):
    groups: dict[str, list] = {}
    for s in samples:
        groups.setdefault(s.lang, []).append(s)
    langs = list(languages) if languages is not None else list(groups)
    for lang in langs:
        if not groups.get(lang):
            raise CorpusError(f"no samples for language {lang!r}")
    return [(lang, groups[lang]) for lang in langs]


def _encode(tokenizer, model: ModelWeights, prompt: str, reserve: int = 0) -> list[int]:
    tokens = tokenizer.encode(prompt)
    if len(tokens) + reserve > model.config.max_seq_len:
        raise LengthError(f"prompt of {len(tokens)} tokens (+{reserve} new) exceeds max_seq_len")
    return tokens


def _hash(steering: Steering | None) -> str:
    return "baseline" if steering is None else steering.config.digest()


def eval_classify(
    model: ModelWeights,
    samples: Sequence[ClassifySample],
    labels: LabelSet,
    tokenizer,
    template: str = DEFAULT_CLASSIFY_TEMPLATE,
    steering: Steering | None = None,
    languages: Sequence[str] | None = None,
) -> EvalReport:
    """Accuracy and macro-F1 per language from label-token logits at the last prompt position."""
    labels.check(model.config.vocab_size)
    ids = np.asarray(labels.token_ids)
    results, details = {}, []
    for lang, group in _partition(samples, languages):
        hook = None if steering is None else steering.hook_for(lang)
        gold, pred = [], []
        for s in group:
            tokens = _encode(tokenizer, model, build_prompt(s, template))
            logits = forward(model, tokens, steer=hook, last_only=True).logits[0]
            choice = int(np.argmax(logits[ids]))
            gold.append(s.label)
            pred.append(choice)
            details.append({"id": s.id, "lang": lang, "pred": choice, "gold": s.label})
        acc = sum(g == p for g, p in zip(gold, pred)) / len(gold)
        results[lang] = LanguageResult(lang, acc, len(gold), macro_f1(gold, pred))
    return EvalReport("classify", results, _hash(steering), steering is None, details)


def eval_span(
    model: ModelWeights,
    samples: Sequence[SpanSample],
    tokenizer,
    template: str = DEFAULT_SPAN_TEMPLATE,
    steering: Steering | None = None,
    languages: Sequence[str] | None = None,
    max_new: int = MAX_NEW_TOKENS,
) -> EvalReport:
    """Mean token-level F1 of greedy generations against the gold answers."""
    results, details = {}, []
    for lang, group in _partition(samples, languages):
        hook = None if steering is None else steering.hook_for(lang)
        scores = []
        for s in group:
            tokens = _encode(tokenizer, model, build_prompt(s, template), reserve=max_new)
            out = greedy_decode(model, tokens, max_new, steer=hook)
            text = tokenizer.decode(out.tokens[len(tokens) :])
            f1 = token_f1(text, s.answer)
            scores.append(f1)
            details.append({"id": s.id, "lang": lang, "pred": text, "gold": s.answer, "f1": f1})
        results[lang] = LanguageResult(lang, float(np.mean(scores)), len(scores))
    return EvalReport("span", results, _hash(steering), steering is None, details)


def dev_test_split(samples: Sequence, n: int) -> tuple[list, list]:
    """First ``n`` samples of each language go to dev, the rest to test."""
    seen: Counter = Counter()
    dev, test = [], []
    for s in samples:
        (dev if seen[s.lang] < n else test).append(s)
        seen[s.lang] += 1
    return dev, test


@dataclass
class GridSearchResult:
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    gammas: tuple[float, ...]
    cells: dict[tuple[float, float, float], float]
    """(alpha, beta, gamma) -> mean metric over the non-anchor languages."""
    baseline: float
    best: tuple[float, float, float]
    best_metric: float
    languages: tuple[str, ...] = ()

    def to_csv(self, path: str | Path) -> None:
        """One row per (beta, gamma) sheet, one column per alpha."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["beta", "gamma"] + [f"alpha={a!r}" for a in self.alphas])
            for b in self.betas:
                for g in self.gammas:
                    w.writerow([repr(b), repr(g)] + [repr(self.cells[(a, b, g)]) for a in self.alphas])

    def to_dict(self) -> dict:
        a, b, g = self.best
        return {
            "alphas": list(self.alphas),
            "betas": list(self.betas),
            "gammas": list(self.gammas),
            "languages": list(self.languages),
            "baseline_metric": self.baseline,
            "best": {"alpha": a, "beta": b, "gamma": g, "metric": self.best_metric},
        }


def grid_search(
    model: ModelWeights,
    samples: Sequence,
    steering: Steering,
    tokenizer,
    task: str = "classify",
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    betas: Sequence[float] = DEFAULT_BETAS,
    gammas: Sequence[float] = DEFAULT_GAMMAS,
    dev_size: int = DEFAULT_DEV_SIZE,
    template: str | None = None,
    labels: LabelSet | None = None,
) -> GridSearchResult:
    """Evaluate every (alpha, beta, gamma) cell plus the unsteered baseline on a dev slice.

    Cells score the mean metric over non-anchor languages (the anchor is never
    steered). alpha = 0 cells reuse the baseline, since the steering rule is
    then the exact identity. The argmax prefers, on ties, smaller |alpha|,
    then smaller beta, then smaller gamma; the baseline counts as (0, 0, 0).
    """
    if not (alphas and betas and gammas):
        raise ValueError("grids must be non-empty")
    dev, _ = dev_test_split(samples, dev_size)
    anchor = steering.config.anchor
    langs = [lang for lang in dict.fromkeys(s.lang for s in dev) if lang != anchor]
    if not langs:
        raise CorpusError("grid search needs at least one non-anchor language in the dev slice")

    def run(st: Steering | None) -> float:
        if task == "classify":
            rep = eval_classify(model, dev, labels or LabelSet.from_strings(tokenizer), tokenizer,
                                template or DEFAULT_CLASSIFY_TEMPLATE, st, langs)
        elif task == "span":
            rep = eval_span(model, dev, tokenizer, template or DEFAULT_SPAN_TEMPLATE, st, langs)
        else:
            raise ValueError(f"unknown task {task!r}")
        return float(np.mean([rep.metric(lang) for lang in langs]))

    base = run(None)
    cells = {}
    for b in betas:
        for g in gammas:
            for a in alphas:
                cells[(a, b, g)] = base if a == 0 else run(steering.with_coefficients(a, b, g))
    candidates = [((0.0, 0.0, 0.0), base)] + list(cells.items())
    best, best_metric = min(candidates, key=lambda kv: (-kv[1], abs(kv[0][0]), kv[0][1], kv[0][2]))
    return GridSearchResult(tuple(alphas), tuple(betas), tuple(gammas), cells, base, best, best_metric, tuple(langs))
