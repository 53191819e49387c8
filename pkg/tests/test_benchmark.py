"""
End-to-end benchmark on the full-size synthetic dataset. Takes tens of
minutes on a CPU, so it only runs with VQAD_RUN_BENCH=1:

    VQAD_RUN_BENCH=1 pytest -m slow tests/test_benchmark.py
"""

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(os.getenv("VQAD_RUN_BENCH") != "1", reason="set VQAD_RUN_BENCH=1 to run the benchmark"),
]


def test_benchmark_reaches_target_f1(tmp_path):
    subprocess.run([
        sys.executable, str(ROOT / "src" / "main.py"),
        "--log-file", str(tmp_path / "vqad.log"),
        "bench",
        "--params", str(ROOT / "configs" / "synth_params.json"),
        "--config", str(ROOT / "configs" / "train_config.json"),
        "--workdir", str(tmp_path / "bench"),
    ], check=True, cwd=ROOT, env={**os.environ, "VQAD_NO_PROGRESS": "1"})

    with open(tmp_path / "bench" / "report.json") as f:
        report = json.load(f)
    assert report["test"]["f1"] >= 0.70
    assert report["iou_threshold"] == 0.3
