from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from claslab.errors import LengthError, ShapeError
from claslab.model import (
    ModelConfig,
    ModelWeights,
    TokenSequence,
    forward,
    gen_toy_model,
    greedy_decode,
    mlp_intermediate,
    rms_norm,
)

finite = st.floats(-4, 4, allow_nan=False, width=32)


def with_tensors(model: ModelWeights, **updates) -> ModelWeights:
    t = {k: np.array(v) for k, v in model.tensors().items()}
    t.update(updates)
    return ModelWeights.from_tensors(model.config, t)


# -- mlp_intermediate --------------------------------------------------------


def test_mlp_zero_input_gives_zero(rng):
    wg = rng.standard_normal((6, 4)).astype(np.float32)
    wu = rng.standard_normal((6, 4)).astype(np.float32)
    assert np.array_equal(mlp_intermediate(np.zeros(4, np.float32), wg, wu), np.zeros(6, np.float32))


def test_mlp_scalar_example():
    h = mlp_intermediate(np.array([1.0], np.float32), np.array([[1.0]], np.float32), np.array([[2.0]], np.float32))
    assert h.shape == (1,)
    assert abs(float(h[0]) - 2.0 / (1.0 + math.exp(-1.0))) < 1e-6
    assert abs(float(h[0]) - 1.4621) < 1e-4


def test_mlp_zero_up_projection_gives_zero(rng):
    wg = rng.standard_normal((5, 3)).astype(np.float32)
    x = rng.standard_normal(3).astype(np.float32)
    assert not np.any(mlp_intermediate(x, wg, np.zeros((5, 3), np.float32)))


def test_mlp_shape_errors():
    with pytest.raises(ShapeError):
        mlp_intermediate(np.zeros(3, np.float32), np.zeros((2, 4), np.float32), np.zeros((2, 4), np.float32))
    with pytest.raises(ShapeError):
        mlp_intermediate(np.zeros(4, np.float32), np.zeros((2, 4), np.float32), np.zeros((3, 4), np.float32))


@settings(max_examples=60, deadline=None)
@given(x=arrays(np.float32, 5, elements=finite), row=st.integers(0, 6), seed=st.integers(0, 2**16))
def test_gate_nullity(x, row, seed):
    rng = np.random.default_rng(seed)
    wg = rng.standard_normal((7, 5)).astype(np.float32)
    wu = rng.standard_normal((7, 5)).astype(np.float32)
    wu[row] = 0.0
    assert mlp_intermediate(x, wg, wu)[row] == 0.0


@settings(max_examples=40, deadline=None)
@given(x=arrays(np.float32, (3, 4), elements=finite), seed=st.integers(0, 2**16))
def test_mlp_matches_float64_definition(x, seed):
    rng = np.random.default_rng(seed)
    wg = rng.standard_normal((6, 4)).astype(np.float32)
    wu = rng.standard_normal((6, 4)).astype(np.float32)
    g = x.astype(np.float64) @ wg.T.astype(np.float64)
    ref = g / (1 + np.exp(-g)) * (x.astype(np.float64) @ wu.T.astype(np.float64))
    np.testing.assert_allclose(mlp_intermediate(x, wg, wu), ref, rtol=1e-4, atol=1e-4)


# -- config and weights --------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(2, 30, 8, 4)
    with pytest.raises(ValueError):
        ModelConfig(0, 32, 8, 4)
    with pytest.raises(ValueError):
        ModelConfig(2, 12, 8, 4)  # odd head dim
    with pytest.raises(ValueError):
        ModelConfig(2, 32, 8, 4, vocab_size=100, eos_token=100)
    assert ModelConfig(2, 32, 8, 4).eos_token == 257
    assert ModelConfig(2, 32, 8, 4, vocab_size=256).eos_token == 255


def test_default_init_scale():
    m = gen_toy_model(0, ModelConfig(4, 64, 128, 4))
    w = np.concatenate([m.layers[i].w_gate.ravel() for i in range(4)])
    assert abs(w.std() - 0.02 / math.sqrt(4)) < 0.001
    assert np.all(m.final_norm == 1.0)


def test_weights_are_read_only(tiny_model):
    with pytest.raises(ValueError):
        tiny_model.layers[0].w_up[0, 0] = 1.0


def test_non_finite_weights_rejected(tiny_model):
    bad = np.array(tiny_model.embed)
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        with_tensors(tiny_model, embed=bad)


def test_shape_mismatch_rejected(tiny_model):
    with pytest.raises(ShapeError):
        with_tensors(tiny_model, **{"layers.0.w_up": np.zeros((3, 3), np.float32)})


def test_same_seed_identical_files(tmp_path):
    cfg = ModelConfig(4, 32, 64, 4)
    gen_toy_model(7, cfg).save(tmp_path / "a.clw")
    gen_toy_model(7, cfg).save(tmp_path / "b.clw")
    gen_toy_model(8, cfg).save(tmp_path / "c.clw")
    assert (tmp_path / "a.clw").read_bytes() == (tmp_path / "b.clw").read_bytes()
    assert (tmp_path / "a.clw").read_bytes() != (tmp_path / "c.clw").read_bytes()


def test_vocab_256_model_loads_and_runs(tmp_path):
    cfg = ModelConfig(n_layers=4, d_model=32, d_ff=64, n_heads=4, vocab_size=256)
    m = gen_toy_model(1, cfg)
    m.save(tmp_path / "m.clw")
    loaded = ModelWeights.load(tmp_path / "m.clw")
    assert loaded.config == cfg
    for name, arr in m.tensors().items():
        assert np.array_equal(arr, loaded.tensors()[name])
    out = forward(loaded, [1, 2, 3, 250])
    assert out.logits.shape == (4, 256)
    assert np.array_equal(out.logits, forward(m, [1, 2, 3, 250]).logits)


# -- forward -------------------------------------------------------------------


def test_forward_deterministic(small_model, tok):
    t = tok.encode("Clara findet das Buch.")
    assert np.array_equal(forward(small_model, t).logits, forward(small_model, t).logits)


def test_forward_accepts_token_sequence(tiny_model):
    seq = TokenSequence((256, 65, 66), "en")
    assert np.array_equal(forward(tiny_model, seq).logits, forward(tiny_model, [256, 65, 66]).logits)


def test_identity_hook_matches_plain(small_model, tok):
    t = tok.encode("Eva sieht den Hund.")
    base = forward(small_model, t).logits
    hooked = forward(small_model, t, steer=lambda layer, pos, h: h).logits
    assert np.array_equal(base, hooked)


def test_hook_called_once_per_layer_and_position(small_model, tok):
    t = tok.encode("Hugo malt.")
    calls = []

    class Hook:
        layers = frozenset({2, 5})

        def __call__(self, layer, pos, h):
            calls.append((layer, pos))
            assert h.shape == (small_model.config.d_ff,)
            assert not h.flags.writeable
            return h

    forward(small_model, t, steer=Hook())
    assert sorted(calls) == sorted((li, p) for li in (2, 5) for p in range(len(t)))
    assert len(calls) == len(set(calls))


def test_hook_sees_captured_h(small_model, tok):
    t = tok.encode("Ida.")
    seen = {}

    def hook(layer, pos, h):
        seen[(layer, pos)] = np.array(h)
        return h

    out = forward(small_model, t, capture=range(8), steer=hook)
    for (layer, pos), h in seen.items():
        assert np.array_equal(out.activations[layer][pos], h)


def test_capture_all_layers_shape(small_model, tok):
    t = tok.encode("Karl hat den Ball.")
    out = forward(small_model, t, capture=range(8))
    assert sorted(out.activations) == list(range(8))
    for a in out.activations.values():
        assert a.shape == (len(t), small_model.config.d_ff)
        assert np.isfinite(a).all()


def test_hook_locality(small_model, tok):
    t = tok.encode("Lena trouve la lettre.")
    layer = 4

    class Double:
        layers = frozenset({layer})

        def __call__(self, li, pos, h):
            return h * np.float32(2.0)

    base = forward(small_model, t, capture=range(8))
    hooked = forward(small_model, t, capture=range(8), steer=Double())
    for li in range(layer + 1):  # layer itself: captured h is pre-hook
        assert np.array_equal(base.activations[li], hooked.activations[li])
    assert not np.array_equal(base.activations[layer + 1], hooked.activations[layer + 1])
    assert not np.array_equal(base.logits, hooked.logits)


def test_hook_bad_shape_rejected(tiny_model):
    with pytest.raises(ShapeError):
        forward(tiny_model, [256, 1, 2], steer=lambda li, p, h: h[:3])


def test_too_long_sequence(tiny_model):
    with pytest.raises(LengthError):
        forward(tiny_model, [1] * 129)


def test_last_only_matches_full(small_model, tok):
    t = tok.encode("David voit la voiture.")
    full = forward(small_model, t).logits
    last = forward(small_model, t, last_only=True).logits
    assert np.array_equal(full[-1:], last)


def test_causality(small_model, tok):
    t = tok.encode("Felix kauft das Auto.")
    a = forward(small_model, t).logits
    b = forward(small_model, t[:-3] + [1, 2, 3]).logits
    assert np.array_equal(a[: len(t) - 3], b[: len(t) - 3])


def test_finite_difference_wu_gradient():
    """d(logit)/d(W_u[n, i]) from a central difference vs the analytic chain rule."""
    cfg = ModelConfig(1, 16, 24, 2, vocab_size=64, max_seq_len=32)
    m = gen_toy_model(11, cfg, proj_std=0.3)
    tokens = [3, 17, 42, 5, 9]
    tgt, n, i = 7, 4, 2
    out = forward(m, tokens, capture=[0], hidden=[0])
    lw = m.layers[0]
    x64 = lambda a: np.asarray(a, dtype=np.float64)  # noqa: E731
    h = x64(out.activations[0][-1])
    x_final = x64(out.hidden[0][-1])
    x_mid = x_final - x64(lw.w_down) @ h
    r_mid = math.sqrt(float(np.mean(x_mid**2)) + cfg.norm_eps)
    a = x_mid / r_mid * x64(lw.mlp_norm)
    g = x64(lw.w_gate) @ a
    silu_g = g / (1 + np.exp(-g))
    # d logit / d x_final through the final RMS norm
    s, u = x64(m.final_norm), x64(m.unembed[tgt])
    r = math.sqrt(float(np.mean(x_final**2)) + cfg.norm_eps)
    dx = s * u / r - x_final * float(np.sum(s * u * x_final)) / (cfg.d_model * r**3)
    analytic = float(dx @ x64(lw.w_down[:, n])) * silu_g[n] * a[i]

    eps = 1e-2
    vals = []
    for sign in (1, -1):
        w = np.array(lw.w_up)
        w[n, i] += sign * eps
        vals.append(float(forward(with_tensors(m, **{"layers.0.w_up": w}), tokens).logits[-1, tgt]))
    numeric = (vals[0] - vals[1]) / (2 * eps)
    assert abs(analytic) > 1e-3
    assert abs(numeric - analytic) <= 1e-3 * abs(analytic)


def test_rms_norm_unit_scale(rng):
    x = rng.standard_normal((4, 8)).astype(np.float32)
    y = rms_norm(x, np.ones(8, np.float32), 0.0)
    np.testing.assert_allclose((y.astype(np.float64) ** 2).mean(axis=1), 1.0, rtol=1e-5)


# -- greedy decode -------------------------------------------------------------


def eos_model() -> ModelWeights:
    """Zero blocks, a constant positive feature and an unembedding favouring EOS."""
    cfg = ModelConfig(2, 8, 16, 2, vocab_size=20, eos_token=19, max_seq_len=64)
    base = gen_toy_model(0, cfg)
    t = {k: np.zeros_like(v) for k, v in base.tensors().items()}
    embed = np.random.default_rng(0).standard_normal((20, 8)).astype(np.float32)
    embed[:, 0] = 5.0
    t["embed"] = embed
    t["final_norm"] = np.eye(8, dtype=np.float32)[0]
    unembed = np.zeros((20, 8), np.float32)
    unembed[19, 0] = 10.0
    t["unembed"] = unembed
    for i in range(2):
        t[f"layers.{i}.attn_norm"] = np.ones(8, np.float32)
        t[f"layers.{i}.mlp_norm"] = np.ones(8, np.float32)
    return ModelWeights.from_tensors(cfg, t)


def test_decode_zero_new_tokens(tiny_model):
    prompt = TokenSequence((256, 10, 11), "en")
    assert greedy_decode(tiny_model, prompt, 0) == prompt


def test_decode_eos_at_first_step():
    out = greedy_decode(eos_model(), [1, 2, 3], 32)
    assert out.tokens == (1, 2, 3, 19)


def test_decode_tie_breaks_to_lowest_id():
    m = eos_model()
    t = {k: np.array(v) for k, v in m.tensors().items()}
    t["unembed"] = np.zeros_like(t["unembed"])  # all logits equal
    out = greedy_decode(ModelWeights.from_tensors(m.config, t), [1, 2], 3)
    assert out.tokens == (1, 2, 0, 0, 0)


def test_decode_budget(small_model, tok):
    prompt = tok.encode("Context: Anna sieht den Hund.\nQuestion: Wer?\nAnswer:")
    out = greedy_decode(small_model, prompt, 32)
    assert 0 < len(out) - len(prompt) <= 32
    assert out.tokens[: len(prompt)] == tuple(prompt)
    again = greedy_decode(small_model, prompt, 32)
    assert again == out


def test_decode_capacity_error(tiny_model):
    with pytest.raises(LengthError):
        greedy_decode(tiny_model, [1] * 100, 32)
