"""Masked boost/suppress/blend steering of MLP intermediates.

For a non-anchor input, at every position of every bridge layer::

    h1 = h * (1 + beta * m_shared)
    h2 = h1 * (1 - gamma * m_spec)
    h_final = (1 - alpha) * h + alpha * h2

Because the masks are binary and disjoint this collapses to ``h * f`` with a
per-neuron factor, which is what the hooks apply. Anchor-language inputs are
never modified.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ProvenanceError, ShapeError
from .neurons import PARTIAL, SPECIFIC, CategoryTable

log = logging.getLogger(__name__)

SPEC_SCOPES = ("union", "per-language")


@dataclass(frozen=True)
class SteeringConfig:
    languages: tuple[str, ...]
    anchor: str
    bridge_layers: tuple[int, ...]
    t_act: float = 0.0
    beta: float = 0.4
    gamma: float = 0.2
    alpha: float = 1.0
    spec_scope: str = "union"

    def __post_init__(self):
        object.__setattr__(self, "languages", tuple(self.languages))
        object.__setattr__(self, "bridge_layers", tuple(sorted({int(b) for b in self.bridge_layers})))
        if self.anchor not in self.languages:
            raise ValueError(f"anchor {self.anchor!r} not among languages {self.languages}")
        if len(set(self.languages)) != len(self.languages):
            raise ValueError("languages must be distinct")
        if any(b < 0 for b in self.bridge_layers):
            raise ValueError("bridge layers must be non-negative")
        for name in ("t_act", "beta", "gamma", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.t_act < 0:
            raise ValueError("t_act must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            clamped = min(max(self.gamma, 0.0), 1.0)
            log.warning("gamma=%s clamped to %s", self.gamma, clamped)
            object.__setattr__(self, "gamma", clamped)
        if self.spec_scope not in SPEC_SCOPES:
            raise ValueError(f"spec_scope must be one of {SPEC_SCOPES}")

    def with_coefficients(self, alpha: float, beta: float, gamma: float) -> "SteeringConfig":
        return replace(self, alpha=alpha, beta=beta, gamma=gamma)

    def check_layers(self, n_layers: int) -> None:
        allowed = n_layers - 2
        bad = [b for b in self.bridge_layers if b >= allowed]
        if bad:
            raise ValueError(f"bridge layers {bad} fall in the final two layers (or beyond) of a {n_layers}-layer model")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["languages"] = list(self.languages)
        d["bridge_layers"] = list(self.bridge_layers)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "SteeringConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        for k in ("t_act", "beta", "gamma", "alpha"):
            if k in known:
                known[k] = float(known[k])
        return cls(**known)

    @classmethod
    def load(cls, path: str | Path) -> "SteeringConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class LayerMask:
    shared: np.ndarray
    spec: np.ndarray

    def __post_init__(self):
        if self.shared.shape != self.spec.shape or self.shared.ndim != 1:
            raise ShapeError("masks must be 1-D with equal widths")
        if np.any(self.shared & self.spec):
            raise ValueError("shared and language-specific masks overlap")


@dataclass(frozen=True)
class SteeringMasks:
    layers: dict[int, LayerMask]

    def __getitem__(self, layer: int) -> LayerMask:
        return self.layers[layer]


def build_masks(table: CategoryTable, config: SteeringConfig, lang: str | None = None) -> SteeringMasks:
    """Masks for each bridge layer.

    ``m_shared`` marks partial-shared neurons. ``m_spec`` marks neurons specific
    to any non-anchor language (``union`` scope) or to ``lang`` only
    (``per-language`` scope). Anchor-specific neurons are never in ``m_spec``.
    """
    if set(table.languages) != set(config.languages):
        raise ProvenanceError(f"table languages {table.languages} != config languages {config.languages}")
    if table.t_act != config.t_act:
        raise ProvenanceError(f"table built with t_act={table.t_act}, config expects {config.t_act}")
    config.check_layers(table.n_layers)
    anchor_idx = table.languages.index(config.anchor)
    if config.spec_scope == "per-language":
        if lang is None:
            raise ValueError("per-language scope needs a target language")
        if lang not in table.languages:
            raise ValueError(f"unknown language {lang!r}")
        target = table.languages.index(lang)
        spec_sel = (table.spec_lang == target) & (target != anchor_idx)
    else:
        spec_sel = table.spec_lang != anchor_idx
    masks = {}
    for li in config.bridge_layers:
        codes = table.codes[li]
        masks[li] = LayerMask(codes == PARTIAL, (codes == SPECIFIC) & spec_sel[li])
    return SteeringMasks(masks)


def steering_factor(mask: LayerMask, beta: float, gamma: float, alpha: float) -> np.ndarray:
    """Per-neuron multiplier ``(1 - alpha) + alpha * g`` with g = (1 + beta m_shared)(1 - gamma m_spec).

    Evaluated as ``1 + alpha * (g - 1)`` so that neurons outside both masks,
    and the whole vector when alpha == 0 or beta == gamma == 0, get exactly 1.
    """
    g = (1.0 + beta * mask.shared.astype(np.float64)) * (1.0 - gamma * mask.spec.astype(np.float64))
    return 1.0 + alpha * (g - 1.0)


def steer(h: np.ndarray, mask: LayerMask, beta: float, gamma: float, alpha: float) -> np.ndarray:
    """Closed-form steering of one d_ff vector (or a (T, d_ff) block)."""
    h = np.asarray(h, dtype=np.float32)
    if h.shape[-1] != mask.shared.shape[0]:
        raise ShapeError(f"activation width {h.shape[-1]} != mask width {mask.shared.shape[0]}")
    return (h.astype(np.float64) * steering_factor(mask, beta, gamma, alpha)).astype(np.float32)


def steer_staged(h: np.ndarray, mask: LayerMask, beta: float, gamma: float, alpha: float) -> np.ndarray:
    """Reference boost -> suppress -> blend evaluation, one stage at a time."""
    h = np.asarray(h, dtype=np.float32)
    if h.shape[-1] != mask.shared.shape[0]:
        raise ShapeError(f"activation width {h.shape[-1]} != mask width {mask.shared.shape[0]}")
    h64 = h.astype(np.float64)
    h1 = h64 * (1.0 + beta * mask.shared.astype(np.float64))
    h2 = h1 * (1.0 - gamma * mask.spec.astype(np.float64))
    return ((1.0 - alpha) * h64 + alpha * h2).astype(np.float32)


class FactorHook:
    """Model hook multiplying ``h`` by a fixed per-layer factor vector."""

    def __init__(self, factors: dict[int, np.ndarray]):
        self._factors = {int(k): np.asarray(v, dtype=np.float64) for k, v in factors.items()}
        self.layers = frozenset(self._factors)

    def __call__(self, layer: int, position: int, h: np.ndarray) -> np.ndarray:
        f = self._factors.get(layer)
        if f is None:
            return h
        return (h.astype(np.float64) * f).astype(np.float32)


def steering_hook(config: SteeringConfig, masks: SteeringMasks, input_lang: str) -> FactorHook:
    """Hook for one input language; the identity for the anchor."""
    if input_lang not in config.languages:
        raise ValueError(f"input language {input_lang!r} not in {config.languages}")
    if input_lang == config.anchor:
        return FactorHook({})
    return FactorHook(
        {li: steering_factor(masks[li], config.beta, config.gamma, config.alpha) for li in config.bridge_layers}
    )


class Steering:
    """A steering config bound to its category table; hands out per-language hooks."""

    def __init__(self, config: SteeringConfig, table: CategoryTable):
        self.config = config
        self.table = table
        self._masks: dict[str | None, SteeringMasks] = {}
        self._masks_for(config.anchor)  # validates provenance up front

    def _masks_for(self, lang: str | None) -> SteeringMasks:
        key = None if self.config.spec_scope == "union" else lang
        if key not in self._masks:
            self._masks[key] = build_masks(self.table, self.config, key)
        return self._masks[key]

    def masks(self, lang: str | None = None) -> SteeringMasks:
        return self._masks_for(lang)

    def hook_for(self, lang: str) -> FactorHook:
        return steering_hook(self.config, self._masks_for(lang), lang)

    def with_coefficients(self, alpha: float, beta: float, gamma: float) -> "Steering":
        other = Steering.__new__(Steering)
        other.config = self.config.with_coefficients(alpha, beta, gamma)
        other.table = self.table
        other._masks = self._masks
        return other


def hook_for(steering: Steering | None, lang: str) -> FactorHook | None:
    return None if steering is None else steering.hook_for(lang)
