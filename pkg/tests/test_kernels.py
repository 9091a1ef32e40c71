from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from claslab import kernels
from claslab.kernels import _numba, _numpy


def test_default_backend_is_numba():
    if os.environ.get("CLASLAB_BACKEND", "") in ("", "numba"):
        assert kernels.BACKEND == "numba"


@pytest.mark.parametrize("shape", [(1, 1, 1), (5, 7, 3), (17, 32, 64), (3, 64, 258)])
def test_linear_backends_bit_identical(shape, rng):
    t, k, o = shape
    x = rng.standard_normal((t, k)).astype(np.float32)
    w = rng.standard_normal((o, k)).astype(np.float32)
    a, b = _numpy.linear(x, w), _numba.linear(x, w)
    assert a.dtype == b.dtype == np.float32
    assert np.array_equal(a, b)
    # close to a float64 reference
    np.testing.assert_allclose(a, x.astype(np.float64) @ w.T.astype(np.float64), rtol=1e-4, atol=1e-4)


def test_linear_sequential_accumulation():
    # 1e8 + 1 - 1e8 in float32 depends on order; sequential k order gives 0
    x = np.array([[1e8, 1.0, -1e8]], dtype=np.float32)
    w = np.ones((1, 3), dtype=np.float32)
    assert _numpy.linear(x, w)[0, 0] == 0.0
    assert _numba.linear(x, w)[0, 0] == 0.0


def test_linear_shape_check():
    with pytest.raises(ValueError):
        _numba.linear(np.zeros((2, 3), np.float32), np.zeros((4, 2), np.float32))
    with pytest.raises(ValueError):
        _numpy.linear(np.zeros((2, 3), np.float32), np.zeros((4, 2), np.float32))


def test_row_sum_backends_bit_identical(rng):
    for dtype in (np.float32, np.float64):
        x = rng.standard_normal((13, 29)).astype(dtype)
        assert np.array_equal(_numpy.row_sum(x), _numba.row_sum(x))
        ref = np.array([sum(float(v) for v in row) for row in x.astype(np.float64)])
        np.testing.assert_allclose(_numpy.row_sum(x), ref, rtol=1e-5)


def test_tsne_grad_backends_bit_identical(rng):
    n = 40
    p = rng.random((n, n))
    p = p + p.T
    np.fill_diagonal(p, 0.0)
    p /= p.sum()
    y = rng.standard_normal((n, 2))
    for ex in (1.0, 12.0):
        assert np.array_equal(_numpy.tsne_grad(p, y, ex), _numba.tsne_grad(p, y, ex))


def test_tsne_grad_matches_closed_form(rng):
    n = 12
    p = rng.random((n, n))
    p = p + p.T
    np.fill_diagonal(p, 0.0)
    p /= p.sum()
    y = rng.standard_normal((n, 2))
    d2 = ((y[:, None, :] - y[None, :, :]) ** 2).sum(-1)
    num = 1.0 / (1.0 + d2)
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    ref = 4.0 * (((p - q) * num)[:, :, None] * (y[:, None, :] - y[None, :, :])).sum(1)
    np.testing.assert_allclose(_numpy.tsne_grad(p, y, 1.0), ref, rtol=1e-10, atol=1e-14)


def test_forward_identical_across_backends_in_subprocess(small_model, tok):
    """The env flag selects the backend at import time; logits must not change."""
    from claslab.model import forward

    tokens = tok.encode("Anna kauft den Apfel im Park.")
    here = forward(small_model, tokens).logits
    code = (
        "import sys, numpy as np\n"
        "from claslab import kernels\n"
        "from claslab.model import ModelConfig, gen_toy_model, forward\n"
        "from claslab.tokenizer import ByteTokenizer\n"
        "assert kernels.BACKEND == 'numpy'\n"
        "m = gen_toy_model(7, ModelConfig(8, 32, 64, 4), proj_std=0.2)\n"
        "out = forward(m, ByteTokenizer().encode('Anna kauft den Apfel im Park.')).logits\n"
        "sys.stdout.buffer.write(out.tobytes())\n"
    )
    env = {**os.environ, "CLASLAB_BACKEND": "numpy"}
    proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, check=True)
    other = np.frombuffer(proc.stdout, dtype=np.float32).reshape(here.shape)
    assert np.array_equal(here, other)


def test_bad_backend_flag_rejected():
    env = {**os.environ, "CLASLAB_BACKEND": "cuda"}
    proc = subprocess.run([sys.executable, "-c", "import claslab.kernels"], env=env, capture_output=True, text=True)
    assert proc.returncode != 0
    assert "CLASLAB_BACKEND" in proc.stderr
