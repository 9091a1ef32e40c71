from __future__ import annotations

import os
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from claslab.model import ModelConfig, gen_toy_model
from claslab.tokenizer import ByteTokenizer

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data" / "synthetic"
GOLDEN = ROOT / "tests" / "golden"

ACCEPTANCE: dict[str, str] = {}


def record_acceptance(key: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[key] = ("PASS" if ok else "FAIL") + (f"  {detail}" if detail else "")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    key = marker.args[0]
    if call.excinfo is not None:
        ACCEPTANCE[key] = f"FAIL  {call.excinfo.typename}: {str(call.excinfo.value).splitlines()[0][:120]}"
    else:
        ACCEPTANCE.setdefault(key, "PASS")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(key): acceptance criterion test")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        terminalreporter.write_line(f"{key}: {ACCEPTANCE[key]}")


@pytest.fixture(scope="session")
def tok() -> ByteTokenizer:
    return ByteTokenizer()


@pytest.fixture(scope="session")
def small_model():
    """8 layers, wide enough init that steering visibly moves logits."""
    return gen_toy_model(7, ModelConfig(8, 32, 64, 4), proj_std=0.2)


@pytest.fixture(scope="session")
def tiny_model():
    return gen_toy_model(3, ModelConfig(4, 16, 32, 2, max_seq_len=128), proj_std=0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def run_pipeline(workdir: Path, extra_env: dict | None = None) -> tuple[Path, float]:
    """Run the CLI pipeline inside ``workdir`` on a copy of the bundled corpus."""
    shutil.copytree(DATA, workdir / "data" / "synthetic")
    env = {**os.environ, **(extra_env or {})}
    env.pop("CLASLAB_OUT", None)
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "claslab", "pipeline", "--data-dir", "data/synthetic", "--out-dir", "run"],
        cwd=workdir, env=env, capture_output=True, text=True,
    )
    elapsed = time.perf_counter() - t0
    if proc.returncode != 0:
        raise RuntimeError(f"pipeline failed ({proc.returncode}):\n{proc.stderr}")
    return workdir / "run", elapsed


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("pipeline"))
