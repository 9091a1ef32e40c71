"""Byte-level tokenizer plus an optional vocabulary-file tokenizer."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import FormatError


class ByteTokenizer:
    """UTF-8 bytes map to ids 0..255; ids >= 256 are specials.

    With ``vocab_size >= 258`` id 256 is ``<bos>`` and 257 is ``<eos>``.
    Smaller vocabularies have no BOS and the model config names the EOS id.
    """

    def __init__(self, vocab_size: int = 258, eos_token: int | None = None):
        if vocab_size < 256:
            raise ValueError("byte tokenizer needs vocab_size >= 256")
        self.vocab_size = vocab_size
        self.bos_token = 256 if vocab_size >= 258 else None
        if eos_token is None:
            eos_token = 257 if vocab_size >= 258 else 0
        self.eos_token = eos_token

    def encode(self, text: str, add_bos: bool = True) -> list[int]:
        ids = list(text.encode("utf-8"))
        if add_bos and self.bos_token is not None:
            ids.insert(0, self.bos_token)
        return ids

    def decode(self, ids) -> str:
        return bytes(i for i in ids if 0 <= i < 256 and i != self.eos_token).decode("utf-8", errors="replace")

    def token_id(self, piece: str) -> int:
        ids = self.encode(piece, add_bos=False)
        if len(ids) != 1:
            raise ValueError(f"{piece!r} is not a single token")
        return ids[0]


class VocabTokenizer:
    """Greedy longest-match tokenizer over a JSON vocabulary file.

    File format: ``{"tokens": [str, ...], "bos": int|null, "eos": int}``; a
    token's id is its list index.
    """

    def __init__(self, tokens: list[str], eos_token: int, bos_token: int | None = None):
        self.tokens = list(tokens)
        self.vocab_size = len(self.tokens)
        self.eos_token = eos_token
        self.bos_token = bos_token
        self._index = {}
        for i, tok in enumerate(self.tokens):
            if tok and i not in (eos_token, bos_token):
                self._index.setdefault(tok, i)
        self._max_len = max((len(t) for t in self._index), default=1)

    @classmethod
    def from_file(cls, path: str | Path) -> "VocabTokenizer":
        try:
            spec = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(spec["tokens"], int(spec["eos"]), spec.get("bos"))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: not a vocabulary file ({exc})") from exc

    def encode(self, text: str, add_bos: bool = True) -> list[int]:
        ids = [self.bos_token] if add_bos and self.bos_token is not None else []
        i = 0
        while i < len(text):
            for size in range(min(self._max_len, len(text) - i), 0, -1):
                tid = self._index.get(text[i : i + size])
                if tid is not None:
                    ids.append(tid)
                    i += size
                    break
            else:
                raise ValueError(f"character {text[i]!r} at offset {i} is not in the vocabulary")
        return ids

    def decode(self, ids) -> str:
        return "".join(self.tokens[i] for i in ids if i not in (self.eos_token, self.bos_token))

    def token_id(self, piece: str) -> int:
        ids = self.encode(piece, add_bos=False)
        if len(ids) != 1:
            raise ValueError(f"{piece!r} is not a single token")
        return ids[0]
