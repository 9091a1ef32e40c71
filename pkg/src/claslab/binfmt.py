"""Tagged binary container used by the weight (CLW1) and stats (CLS1) files.

Layout::

    magic      4 bytes, e.g. b"CLW1"
    hlen       u64 little-endian, byte length of the header
    header     UTF-8 JSON object, keys sorted; "tensors" maps
               name -> {"offset": int, "shape": [...]}; offsets count bytes
               from the start of the data section
    data       concatenated little-endian float32 tensors, row-major

Tensors are written in sorted-name order so identical content always gives
identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .errors import FormatError

_LE_F32 = np.dtype("<f4")


def write_container(path: str | Path, magic: bytes, header: dict[str, Any], tensors: dict[str, np.ndarray]) -> None:
    if len(magic) != 4:
        raise ValueError("magic must be 4 bytes")
    directory = {}
    chunks = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=_LE_F32)
        directory[name] = {"offset": offset, "shape": list(arr.shape)}
        raw = arr.tobytes(order="C")
        chunks.append(raw)
        offset += len(raw)
    full = dict(header)
    full["tensors"] = directory
    head = json.dumps(full, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        for raw in chunks:
            fh.write(raw)


def read_container(path: str | Path, magic: bytes) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    blob = Path(path).read_bytes()
    if blob[:4] != magic:
        raise FormatError(f"{path}: expected magic {magic!r}, found {blob[:4]!r}")
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<Q", blob[4:12])
    try:
        header = json.loads(blob[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad JSON header: {exc}") from exc
    data = memoryview(blob)[12 + hlen :]
    tensors = {}
    for name, entry in header.pop("tensors", {}).items():
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        start = int(entry["offset"])
        end = start + 4 * count
        if start < 0 or end > len(data):
            raise FormatError(f"{path}: tensor {name!r} runs past end of file")
        arr = np.frombuffer(data[start:end], dtype=_LE_F32).reshape(shape)
        tensors[name] = arr.astype(np.float32)
    return header, tensors
