from __future__ import annotations

import json

import pytest

from claslab.corpus import (
    DEFAULT_CLASSIFY_TEMPLATE,
    DEFAULT_SPAN_TEMPLATE,
    ClassifySample,
    SpanSample,
    build_prompt,
    load_classify_samples,
    load_parallel_corpus,
    load_span_samples,
    write_rejections,
)
from claslab.errors import CorpusError, TemplateError
from claslab.synthetic import LANGUAGES, generate

from conftest import DATA


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def test_three_complete_samples(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"id": f"s{i}", "texts": {"en": f"e{i}", "de": f"d{i}"}} for i in range(3)])
    c = load_parallel_corpus(p, ["en", "de"])
    assert len(c) == 3
    assert [s.id for s in c] == ["s0", "s1", "s2"]
    assert not c.rejections


def test_missing_language_is_rejected_not_dropped(tmp_path):
    rows = [{"id": "a", "texts": {"en": "x", "de": "y"}}, {"id": "b", "texts": {"en": "x"}}]
    c = load_parallel_corpus(write_jsonl(tmp_path / "c.jsonl", rows), ["en", "de"])
    assert len(c) == 1
    assert len(c.rejections) == 1
    r = c.rejections[0]
    assert (r.id, r.line, r.missing) == ("b", 2, ("de",))
    write_rejections(c.rejections, tmp_path / "rej.jsonl")
    assert json.loads((tmp_path / "rej.jsonl").read_text()) == {"id": "b", "line": 2, "missing": ["de"]}


def test_empty_text_counts_as_missing(tmp_path):
    rows = [{"id": "a", "texts": {"en": "x", "de": "  "}}]
    c = load_parallel_corpus(write_jsonl(tmp_path / "c.jsonl", rows), ["en", "de"])
    assert len(c) == 0 and c.rejections[0].missing == ("de",)


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "a", "texts": {"en": "x"}}\n{not json\n')
    with pytest.raises(CorpusError, match=":2:"):
        load_parallel_corpus(p, ["en"])


def test_duplicate_ids(tmp_path):
    rows = [{"id": "a", "texts": {"en": "x"}}, {"id": "a", "texts": {"en": "y"}}]
    with pytest.raises(CorpusError):
        load_parallel_corpus(write_jsonl(tmp_path / "c.jsonl", rows), ["en"])


def test_invalid_language_code(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [])
    with pytest.raises(CorpusError):
        load_parallel_corpus(p, ["EN"])


def test_first_100_complete_samples():
    c = load_parallel_corpus(DATA / "parallel.jsonl", LANGUAGES, limit=100)
    assert len(c) == 100
    assert c.samples[0].id == "s000" and c.samples[-1].id == "s099"
    # rejections are still reported past the limit
    assert [r.id for r in c.rejections] == ["x000", "x001"]


def test_round_trip(tmp_path):
    c = load_parallel_corpus(DATA / "parallel.jsonl", LANGUAGES)
    c.write(tmp_path / "out.jsonl")
    back = load_parallel_corpus(tmp_path / "out.jsonl", LANGUAGES)
    assert back == c
    assert back.digest() == c.digest()


def test_alignment_invariant():
    c = load_parallel_corpus(DATA / "parallel.jsonl", LANGUAGES)
    for s in c:
        assert set(s.texts) == set(LANGUAGES)


def test_language_subset_keeps_only_requested(tmp_path):
    c = load_parallel_corpus(DATA / "parallel.jsonl", ["en", "de"])
    assert len(c) == 122 - 1  # x001 lacks de
    assert all(set(s.texts) == {"en", "de"} for s in c)


def test_bundled_corpus_matches_generator():
    recs = generate()
    for name, rows in recs.items():
        lines = (DATA / f"{name}.jsonl").read_text(encoding="utf-8").splitlines()
        assert [json.loads(x) for x in lines] == rows


def test_task_loaders():
    cls = load_classify_samples(DATA / "classify.jsonl")
    span = load_span_samples(DATA / "span.jsonl")
    assert len(cls) == len(span) == 360
    assert {s.label for s in cls} == {0, 1, 2}
    assert all(s.answer in s.context for s in span)


def test_task_loader_errors(tmp_path):
    p = write_jsonl(tmp_path / "t.jsonl", [{"id": "a", "lang": "en", "premise": "p", "hypothesis": "h", "label": 3}])
    with pytest.raises(CorpusError, match=":1:"):
        load_classify_samples(p)
    p = write_jsonl(tmp_path / "t.jsonl", [{"id": "a", "lang": "en", "premise": "p"}])
    with pytest.raises(CorpusError, match="missing field"):
        load_classify_samples(p)


def test_prompt_exact_concatenation():
    s = ClassifySample("a", "en", "It rains.", "It is wet.", 0)
    assert build_prompt(s, "P:{premise} H:{hypothesis} A:") == "P:It rains. H:It is wet. A:"
    assert build_prompt(s, DEFAULT_CLASSIFY_TEMPLATE) == build_prompt(s, DEFAULT_CLASSIFY_TEMPLATE)
    assert build_prompt(s, DEFAULT_CLASSIFY_TEMPLATE).endswith(":")


def test_span_prompt_contains_fields():
    s = SpanSample("a", "de", "Anna kauft den Apfel.", "Wer kauft den Apfel?", "Anna")
    p = build_prompt(s, DEFAULT_SPAN_TEMPLATE)
    assert s.context in p and s.question in p


def test_unknown_placeholder():
    s = SpanSample("a", "de", "c", "q", "x")
    with pytest.raises(TemplateError, match="premise"):
        build_prompt(s, "{premise}")
    with pytest.raises(TemplateError):
        build_prompt(s, "{context!r}")
    with pytest.raises(KeyError):  # TemplateError is also a KeyError
        build_prompt(s, "{nope}")
