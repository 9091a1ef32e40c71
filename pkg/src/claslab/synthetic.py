"""Deterministic generator for the small bundled three-language corpus (en, de, fr).

Sentences are assembled from a fixed parallel lexicon, so every sample has an
exact translation in each language. Two extra samples are missing a language
on purpose and exercise the rejection path of the corpus loader.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

LANGUAGES = ("en", "de", "fr")

NAMES = ("Anna", "Ben", "Clara", "David", "Eva", "Felix", "Greta", "Hugo", "Ida", "Jonas", "Karl", "Lena")

NOUNS = (
    {"en": "the apple", "de": "den Apfel", "fr": "la pomme"},
    {"en": "the book", "de": "das Buch", "fr": "le livre"},
    {"en": "the car", "de": "das Auto", "fr": "la voiture"},
    {"en": "the dog", "de": "den Hund", "fr": "le chien"},
    {"en": "the house", "de": "das Haus", "fr": "la maison"},
    {"en": "the letter", "de": "den Brief", "fr": "la lettre"},
    {"en": "the ball", "de": "den Ball", "fr": "la balle"},
    {"en": "the cake", "de": "den Kuchen", "fr": "le gâteau"},
)

VERBS = (
    {"en": "buys", "de": "kauft", "fr": "achète"},
    {"en": "sees", "de": "sieht", "fr": "voit"},
    {"en": "finds", "de": "findet", "fr": "trouve"},
    {"en": "paints", "de": "malt", "fr": "peint"},
)

PLACES = (
    {"en": "in the park", "de": "im Park", "fr": "au parc"},
    {"en": "at school", "de": "in der Schule", "fr": "à l'école"},
    {"en": "in the city", "de": "in der Stadt", "fr": "en ville"},
    {"en": "at the market", "de": "auf dem Markt", "fr": "au marché"},
)

NOTHING = {"en": "{name} {verb} nothing.", "de": "{name} {verb} nichts.", "fr": "{name} ne {verb} rien."}
WHO = {"en": "Who {verb} {obj}?", "de": "Wer {verb} {obj}?", "fr": "Qui {verb} {obj} ?"}


def _clause(lang: str, name: str, verb: dict, noun: dict, place: dict | None = None) -> str:
    parts = [name, verb[lang], noun[lang]] + ([place[lang]] if place else [])
    return " ".join(parts) + "."


def generate(n: int = 120, seed: int = 0) -> dict[str, list[dict]]:
    """Return the parallel, classification and span records for ``n`` samples."""
    rng = np.random.default_rng(seed)
    parallel, classify, span = [], [], []
    for i in range(n):
        sid = f"s{i:03d}"
        a, b = rng.choice(len(NAMES), size=2, replace=False)
        v1, v2 = rng.choice(len(VERBS), size=2, replace=False)
        n1, n2 = rng.choice(len(NOUNS), size=2, replace=False)
        p1, p2 = rng.choice(len(PLACES), size=2, replace=False)
        label = int(rng.integers(3))
        name, other = NAMES[a], NAMES[b]
        texts, ctxs = {}, {}
        for lang in LANGUAGES:
            texts[lang] = _clause(lang, name, VERBS[v1], NOUNS[n1], PLACES[p1])
            ctxs[lang] = texts[lang] + " " + _clause(lang, other, VERBS[v2], NOUNS[n2])
        parallel.append({"id": sid, "texts": texts})
        for lang in LANGUAGES:
            if label == 0:
                hyp = _clause(lang, name, VERBS[v1], NOUNS[n1])
            elif label == 1:
                hyp = _clause(lang, name, VERBS[v1], NOUNS[n2], PLACES[p2])
            else:
                hyp = NOTHING[lang].format(name=name, verb=VERBS[v1][lang])
            classify.append({"id": sid, "lang": lang, "premise": texts[lang], "hypothesis": hyp, "label": label})
            question = WHO[lang].format(verb=VERBS[v1][lang], obj=NOUNS[n1][lang])
            span.append({"id": sid, "lang": lang, "context": ctxs[lang], "question": question, "answer": name})
    # incomplete samples for the rejection report
    parallel.append({"id": "x000", "texts": {"en": "Anna reads.", "de": "Anna liest."}})
    parallel.append({"id": "x001", "texts": {"en": "Ben sings.", "de": "", "fr": "Ben chante."}})
    return {"parallel": parallel, "classify": classify, "span": span}


def write_corpus(out_dir: str | Path, n: int = 120, seed: int = 0) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, records in generate(n, seed).items():
        path = out / f"{name}.jsonl"
        path.write_text("".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records), encoding="utf-8")
        paths.append(path)
    return paths
