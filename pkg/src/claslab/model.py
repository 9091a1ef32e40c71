"""Minimal pre-norm decoder with SwiGLU MLPs, activation capture and greedy decoding.

Architecture: token embedding, then per layer
``x += attn(rmsnorm(x))`` and ``x += W_down(h)`` with
``h = silu(W_gate m) * (W_up m)``, ``m = rmsnorm(x)``; a final RMS norm and
an untied unembedding. Attention is causal multi-head with rotary position
encoding (rotate-half convention, base 10000).

All tensors are float32. Every dot product goes through
:func:`claslab.kernels.linear`, which accumulates in a fixed index order, so
a forward pass is bit-reproducible on a given platform.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Protocol, Sequence

import numpy as np

from . import kernels
from .binfmt import read_container, write_container
from .errors import FormatError, LengthError, ShapeError

WEIGHT_MAGIC = b"CLW1"
_LAYER_TENSORS = ("attn_norm", "wq", "wk", "wv", "wo", "mlp_norm", "w_gate", "w_up", "w_down")


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    d_model: int
    d_ff: int
    n_heads: int
    vocab_size: int = 258
    max_seq_len: int = 512
    eos_token: int | None = None
    """Defaults to the last id (257, the byte tokenizer's EOS, at vocab 258)."""
    rope_base: float = 10000.0
    norm_eps: float = 1e-5

    def __post_init__(self):
        for name in ("n_layers", "d_model", "d_ff", "n_heads", "vocab_size", "max_seq_len"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.eos_token is None:
            object.__setattr__(self, "eos_token", self.vocab_size - 1)
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.head_dim % 2:
            raise ValueError("head dimension must be even for rotary encoding")
        if not 0 <= self.eos_token < self.vocab_size:
            raise ValueError("eos_token must be a valid token id")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[int, ...]
    lang: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class LayerWeights:
    attn_norm: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    mlp_norm: np.ndarray
    w_gate: np.ndarray
    w_up: np.ndarray
    w_down: np.ndarray


@dataclass(frozen=True)
class ModelWeights:
    """Immutable parameter set; arrays are read-only after construction."""

    config: ModelConfig
    embed: np.ndarray
    layers: tuple[LayerWeights, ...]
    final_norm: np.ndarray
    unembed: np.ndarray

    def __post_init__(self):
        cfg = self.config
        d, f, v = cfg.d_model, cfg.d_ff, cfg.vocab_size
        if len(self.layers) != cfg.n_layers:
            raise ShapeError(f"expected {cfg.n_layers} layers, got {len(self.layers)}")
        expected = {
            "attn_norm": (d,), "wq": (d, d), "wk": (d, d), "wv": (d, d), "wo": (d, d),
            "mlp_norm": (d,), "w_gate": (f, d), "w_up": (f, d), "w_down": (d, f),
        }
        checks = [("embed", self.embed, (v, d)), ("final_norm", self.final_norm, (d,)), ("unembed", self.unembed, (v, d))]
        for i, layer in enumerate(self.layers):
            checks += [(f"layers.{i}.{n}", getattr(layer, n), expected[n]) for n in _LAYER_TENSORS]
        for name, arr, shape in checks:
            if arr.shape != shape:
                raise ShapeError(f"{name}: shape {arr.shape}, expected {shape}")
            if arr.dtype != np.float32:
                raise ShapeError(f"{name}: dtype {arr.dtype}, expected float32")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name}: non-finite values")
            arr.flags.writeable = False

    def tensors(self) -> dict[str, np.ndarray]:
        out = {"embed": self.embed, "final_norm": self.final_norm, "unembed": self.unembed}
        for i, layer in enumerate(self.layers):
            for n in _LAYER_TENSORS:
                out[f"layers.{i}.{n}"] = getattr(layer, n)
        return out

    @classmethod
    def from_tensors(cls, config: ModelConfig, tensors: dict[str, np.ndarray]) -> "ModelWeights":
        try:
            layers = tuple(
                LayerWeights(**{n: np.array(tensors[f"layers.{i}.{n}"], dtype=np.float32) for n in _LAYER_TENSORS})
                for i in range(config.n_layers)
            )
            return cls(
                config,
                np.array(tensors["embed"], dtype=np.float32),
                layers,
                np.array(tensors["final_norm"], dtype=np.float32),
                np.array(tensors["unembed"], dtype=np.float32),
            )
        except KeyError as exc:
            raise FormatError(f"missing tensor {exc.args[0]!r}") from exc

    def save(self, path: str | Path) -> None:
        write_container(path, WEIGHT_MAGIC, {"format": "CLW1", "config": self.config.to_dict()}, self.tensors())

    @classmethod
    def load(cls, path: str | Path) -> "ModelWeights":
        header, tensors = read_container(path, WEIGHT_MAGIC)
        try:
            config = ModelConfig.from_dict(header["config"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}: header lacks a valid config") from exc
        return cls.from_tensors(config, tensors)


class SteeringHook(Protocol):
    """Replacement hook for MLP intermediates.

    Called as ``hook(layer, position, h)`` with ``h`` the read-only d_ff vector
    for that position; must return a vector of the same width. ``layers`` names
    the layers it applies to. Plain callables without ``layers`` are applied at
    every layer.
    """

    layers: frozenset[int]

    def __call__(self, layer: int, position: int, h: np.ndarray) -> np.ndarray: ...


HookLike = SteeringHook | Callable[[int, int, np.ndarray], np.ndarray]


class ForwardOutput(NamedTuple):
    logits: np.ndarray
    """(T, vocab) float32; (1, vocab) for the last position when ``last_only``."""
    activations: dict[int, np.ndarray]
    """layer -> (T, d_ff) MLP intermediate, as computed before any hook."""
    hidden: dict[int, np.ndarray]
    """layer -> (T, d_model) residual stream after that layer's block."""


def silu(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return (x / (np.float32(1.0) + np.exp(-x))).astype(np.float32, copy=False)


def rms_norm(x: np.ndarray, scale: np.ndarray, eps: float) -> np.ndarray:
    ms = kernels.row_sum(x * x) / np.float32(x.shape[1])
    inv = np.float32(1.0) / np.sqrt(ms + np.float32(eps))
    return (x * inv[:, None]) * scale


def mlp_intermediate(x: np.ndarray, w_gate: np.ndarray, w_up: np.ndarray) -> np.ndarray:
    """SwiGLU intermediate ``silu(W_gate x) * (W_up x)`` for a vector or a (T, d_model) block."""
    x = np.asarray(x, dtype=np.float32)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or w_gate.shape != w_up.shape or w_gate.shape[1] != x2.shape[1]:
        raise ShapeError(f"mlp_intermediate: x {x.shape}, W_gate {w_gate.shape}, W_up {w_up.shape}")
    h = silu(kernels.linear(x2, w_gate)) * kernels.linear(x2, w_up)
    return h[0] if single else h


def _rope_tables(n: int, head_dim: int, base: float) -> tuple[np.ndarray, np.ndarray]:
    inv_freq = base ** (-np.arange(0, head_dim, 2, dtype=np.float64) / head_dim)
    ang = np.arange(n, dtype=np.float64)[:, None] * inv_freq[None, :]
    ang = np.concatenate([ang, ang], axis=1)
    return np.cos(ang).astype(np.float32), np.sin(ang).astype(np.float32)


def _rotate(x: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    half = x.shape[1] // 2
    rot = np.concatenate([-x[:, half:], x[:, :half]], axis=1)
    return x * cos + rot * sin


def _attention(a: np.ndarray, lw: LayerWeights, cfg: ModelConfig, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    q = kernels.linear(a, lw.wq)
    k = kernels.linear(a, lw.wk)
    v = kernels.linear(a, lw.wv)
    t_len, hd = a.shape[0], cfg.head_dim
    scale = np.float32(1.0 / math.sqrt(hd))
    future = np.triu(np.ones((t_len, t_len), dtype=bool), k=1)
    out = np.empty((t_len, cfg.d_model), dtype=np.float32)
    for head in range(cfg.n_heads):
        sl = slice(head * hd, (head + 1) * hd)
        qh = _rotate(q[:, sl], cos, sin)
        kh = _rotate(k[:, sl], cos, sin)
        scores = kernels.linear(qh, kh) * scale
        scores[future] = -np.inf
        e = np.exp(scores - scores.max(axis=1, keepdims=True))
        probs = e / kernels.row_sum(e)[:, None]
        out[:, sl] = kernels.linear(probs, np.ascontiguousarray(v[:, sl].T))
    return kernels.linear(out, lw.wo)


def _as_tokens(model: ModelWeights, seq: TokenSequence | Sequence[int]) -> np.ndarray:
    tokens = np.asarray(seq.tokens if isinstance(seq, TokenSequence) else list(seq), dtype=np.int64)
    cfg = model.config
    if tokens.ndim != 1 or tokens.size == 0:
        raise ValueError("token sequence must be a non-empty 1-D list")
    if tokens.size > cfg.max_seq_len:
        raise LengthError(f"sequence of {tokens.size} tokens exceeds max_seq_len={cfg.max_seq_len}")
    if tokens.min() < 0 or tokens.max() >= cfg.vocab_size:
        raise ValueError("token id out of range")
    return tokens


def _hook_layers(hook, n_layers: int) -> frozenset[int]:
    if hook is None:
        return frozenset()
    layers = getattr(hook, "layers", None)
    return frozenset(range(n_layers)) if layers is None else frozenset(layers)


def forward(
    model: ModelWeights,
    seq: TokenSequence | Sequence[int],
    capture: Sequence[int] = (),
    steer: HookLike | None = None,
    hidden: Sequence[int] = (),
    last_only: bool = False,
) -> ForwardOutput:
    """Run the decoder over ``seq``.

    ``capture`` lists layers whose MLP intermediates are returned; ``hidden``
    lists layers whose post-block residual stream is returned. ``steer`` is
    invoked once per (hooked layer, position) and its return value replaces
    ``h`` before the down-projection.
    """
    cfg = model.config
    tokens = _as_tokens(model, seq)
    capture = frozenset(capture)
    hidden_set = frozenset(hidden)
    for lyr in capture | hidden_set:
        if not 0 <= lyr < cfg.n_layers:
            raise ValueError(f"layer {lyr} out of range")
    hooked = _hook_layers(steer, cfg.n_layers)

    t_len = tokens.size
    cos, sin = _rope_tables(t_len, cfg.head_dim, cfg.rope_base)
    x = model.embed[tokens].astype(np.float32)
    acts: dict[int, np.ndarray] = {}
    states: dict[int, np.ndarray] = {}
    for li, lw in enumerate(model.layers):
        x = x + _attention(rms_norm(x, lw.attn_norm, cfg.norm_eps), lw, cfg, cos, sin)
        h = mlp_intermediate(rms_norm(x, lw.mlp_norm, cfg.norm_eps), lw.w_gate, lw.w_up)
        h.flags.writeable = False
        if li in capture:
            acts[li] = h
        if li in hooked:
            h_final = np.empty_like(h)
            for t in range(t_len):
                r = np.asarray(steer(li, t, h[t]), dtype=np.float32)
                if r.shape != (cfg.d_ff,):
                    raise ShapeError(f"hook returned shape {r.shape} at layer {li}, expected ({cfg.d_ff},)")
                h_final[t] = r
            h = h_final
        x = x + kernels.linear(h, lw.w_down)
        if li in hidden_set:
            states[li] = x.copy()
    xn = rms_norm(x[-1:] if last_only else x, model.final_norm, cfg.norm_eps)
    return ForwardOutput(kernels.linear(xn, model.unembed), acts, states)


def greedy_decode(
    model: ModelWeights,
    prompt: TokenSequence | Sequence[int],
    max_new: int,
    steer: HookLike | None = None,
) -> TokenSequence:
    """Append argmax tokens (lowest id on ties) until EOS or ``max_new`` tokens."""
    if max_new < 0:
        raise ValueError("max_new must be >= 0")
    lang = prompt.lang if isinstance(prompt, TokenSequence) else ""
    tokens = list(_as_tokens(model, prompt))
    if len(tokens) + max_new > model.config.max_seq_len:
        raise LengthError(
            f"prompt of {len(tokens)} tokens + {max_new} new exceeds max_seq_len={model.config.max_seq_len}"
        )
    for _ in range(max_new):
        logits = forward(model, tokens, steer=steer, last_only=True).logits[0]
        nxt = int(np.argmax(logits))
        tokens.append(nxt)
        if nxt == model.config.eos_token:
            break
    return TokenSequence(tuple(tokens), lang)


def gen_toy_model(seed: int, config: ModelConfig, proj_std: float | None = None) -> ModelWeights:
    """Seeded random weights for desk-scale experiments.

    Projection matrices (attention and MLP) are Gaussian with std
    ``0.02 / sqrt(n_layers)`` unless ``proj_std`` overrides it; embeddings are
    standard normal, the unembedding has std ``1/sqrt(d_model)`` and norm
    scales are ones. Draw order is fixed, so seed and config determine every
    bit.
    """
    rng = np.random.default_rng(seed)
    std = 0.02 / math.sqrt(config.n_layers) if proj_std is None else float(proj_std)
    d, f, v = config.d_model, config.d_ff, config.vocab_size

    def gauss(shape, s):
        return (rng.standard_normal(shape) * s).astype(np.float32)

    embed = gauss((v, d), 1.0)
    layers = []
    for _ in range(config.n_layers):
        layers.append(
            LayerWeights(
                attn_norm=np.ones(d, np.float32),
                wq=gauss((d, d), std),
                wk=gauss((d, d), std),
                wv=gauss((d, d), std),
                wo=gauss((d, d), std),
                mlp_norm=np.ones(d, np.float32),
                w_gate=gauss((f, d), std),
                w_up=gauss((f, d), std),
                w_down=gauss((d, f), std),
            )
        )
    unembed = gauss((v, d), 1.0 / math.sqrt(d))
    return ModelWeights(config, embed, tuple(layers), np.ones(d, np.float32), unembed)
