"""Parallel corpora, task datasets and prompt templates.

File formats (UTF-8 JSON lines):

* parallel corpus: ``{"id": str, "texts": {lang: text, ...}}`` per line
* classification task: ``{"id", "lang", "premise", "hypothesis", "label"}``
* span task: ``{"id", "lang", "context", "question", "answer"}``
* rejection report: ``{"id", "line", "missing": [lang, ...]}``
"""

from __future__ import annotations

import hashlib
import json
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import CorpusError, TemplateError

DEFAULT_CLASSIFY_TEMPLATE = (
    "Premise: {premise}\nHypothesis: {hypothesis}\n"
    "Relation (0=entailment, 1=neutral, 2=contradiction):"
)
DEFAULT_SPAN_TEMPLATE = "Context: {context}\nQuestion: {question}\nAnswer:"


def language_id(code: str) -> str:
    if not isinstance(code, str) or not code or code != code.lower() or code != code.strip():
        raise CorpusError(f"invalid language id {code!r}: must be a non-empty lowercase string")
    return code


@dataclass(frozen=True)
class ParallelSample:
    id: str
    texts: dict[str, str]

    def to_json(self) -> str:
        return json.dumps({"id": self.id, "texts": self.texts}, ensure_ascii=False, sort_keys=True)


@dataclass(frozen=True)
class Rejection:
    id: str
    line: int
    missing: tuple[str, ...]


@dataclass(frozen=True)
class ParallelCorpus:
    languages: tuple[str, ...]
    samples: tuple[ParallelSample, ...]
    rejections: tuple[Rejection, ...] = field(default=(), compare=False)

    def __post_init__(self):
        langs = set(self.languages)
        seen = set()
        for s in self.samples:
            if set(s.texts) != langs:
                raise CorpusError(f"sample {s.id!r} languages {sorted(s.texts)} != {sorted(langs)}")
            if s.id in seen:
                raise CorpusError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[ParallelSample]:
        return iter(self.samples)

    def subset(self, k: int) -> "ParallelCorpus":
        """First ``k`` samples in file order (all samples are complete)."""
        return ParallelCorpus(self.languages, self.samples[:k], self.rejections)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(sorted(self.languages)).encode())
        for s in self.samples:
            h.update(b"\n")
            h.update(s.to_json().encode("utf-8"))
        return h.hexdigest()

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for s in self.samples:
                fh.write(s.to_json() + "\n")


def _read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def load_parallel_corpus(path: str | Path, languages: Sequence[str], limit: int | None = None) -> ParallelCorpus:
    """Load samples covering every language in ``languages``.

    Incomplete samples are kept in ``corpus.rejections`` rather than silently
    dropped. With ``limit`` only the first ``limit`` complete samples are kept.
    Texts for languages outside ``languages`` are discarded.
    """
    langs = tuple(language_id(code) for code in languages)
    if len(set(langs)) != len(langs) or not langs:
        raise CorpusError("languages must be non-empty and distinct")
    samples: list[ParallelSample] = []
    rejections: list[Rejection] = []
    for lineno, obj in _read_jsonl(path):
        sid, texts = obj.get("id"), obj.get("texts")
        if not isinstance(sid, str) or not sid or not isinstance(texts, dict):
            raise CorpusError(f"{path}:{lineno}: need a string 'id' and a 'texts' object")
        present = {k for k, v in texts.items() if isinstance(v, str) and v.strip()}
        missing = tuple(code for code in langs if code not in present)
        if missing:
            rejections.append(Rejection(sid, lineno, missing))
            continue
        if limit is not None and len(samples) >= limit:
            continue
        samples.append(ParallelSample(sid, {code: texts[code] for code in langs}))
    return ParallelCorpus(langs, tuple(samples), tuple(rejections))


def write_rejections(rejections: Iterable[Rejection], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rejections:
            fh.write(json.dumps({"id": r.id, "line": r.line, "missing": list(r.missing)}, sort_keys=True) + "\n")


@dataclass(frozen=True)
class ClassifySample:
    id: str
    lang: str
    premise: str
    hypothesis: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1, 2):
            raise CorpusError(f"{self.id}: label {self.label!r} not in {{0,1,2}}")
        if not self.premise or not self.hypothesis:
            raise CorpusError(f"{self.id}: empty premise or hypothesis")


@dataclass(frozen=True)
class SpanSample:
    id: str
    lang: str
    context: str
    question: str
    answer: str

    def __post_init__(self):
        if not (self.context and self.question and self.answer):
            raise CorpusError(f"{self.id}: empty context, question or answer")


def _load_task(path, cls, fields):
    out = []
    for lineno, obj in _read_jsonl(path):
        try:
            kwargs = {f: obj[f] for f in fields}
        except KeyError as exc:
            raise CorpusError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from exc
        kwargs["lang"] = language_id(kwargs["lang"])
        try:
            out.append(cls(**kwargs))
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return out


def load_classify_samples(path: str | Path) -> list[ClassifySample]:
    return _load_task(path, ClassifySample, ("id", "lang", "premise", "hypothesis", "label"))


def load_span_samples(path: str | Path) -> list[SpanSample]:
    return _load_task(path, SpanSample, ("id", "lang", "context", "question", "answer"))


def build_prompt(sample, template: str) -> str:
    """Substitute ``{field}`` placeholders from the sample's attributes.

    Classification templates should end exactly where the label token goes;
    the evaluator reads logits at the final prompt position.
    """
    out = []
    for literal, name, spec, conv in string.Formatter().parse(template):
        out.append(literal)
        if name is None:
            continue
        if spec or conv or not name.isidentifier():
            raise TemplateError(f"unsupported placeholder {{{name}}} in template")
        if not hasattr(sample, name):
            raise TemplateError(f"unknown placeholder {{{name}}} for {type(sample).__name__}")
        out.append(str(getattr(sample, name)))
    return "".join(out)
