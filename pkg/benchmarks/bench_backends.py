"""Time the numba and numpy kernel backends on the pipeline's hot paths.

Each backend runs in its own interpreter because the backend is fixed at
import time. Usage:
    python benchmarks/bench_backends.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from claslab import kernels
from claslab.model import ModelConfig, forward, gen_toy_model
from claslab.tsne import tsne_2d

repeat = int(sys.argv[1])
model = gen_toy_model(7, ModelConfig(8, 32, 64, 4), proj_std=0.2)
tokens = np.random.default_rng(0).integers(0, 257, 64).tolist()
x = np.random.default_rng(1).normal(size=(200, 16))

def best(fn):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

print(json.dumps({
    "backend": kernels.BACKEND,
    "forward_64_tokens_s": best(lambda: forward(model, tokens)),
    "tsne_200_points_250_iter_s": best(lambda: tsne_2d(x, perplexity=20.0, n_iter=250)),
}))
"""


def run(backend: str, repeat: int) -> dict:
    env = {**os.environ, "CLASLAB_BACKEND": backend}
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rows = [run(b, args.repeat) for b in ("numba", "numpy")]
    keys = [k for k in rows[0] if k != "backend"]
    print(f"{'benchmark':30s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        print(f"{k:30s} {a:10.4f} {b:10.4f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
