import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qhom.correlations import Quad
from qhom.tensors import IndexSet

SRC = Path(__file__).resolve().parents[1] / "src"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def binary_quad():
    return Quad(IndexSet("X", 2), IndexSet("Y", 2), IndexSet("A", 2), IndexSet("B", 2))


@pytest.fixture
def chain_sets():
    """Index sets for two composable correlations ``(X2, Y1, X1, Y2)`` and ``(X3, Y2, X2, Y3)``."""

    return {name: IndexSet(name, 2) for name in ("X1", "Y1", "X2", "Y2", "X3", "Y3")}


def matrix_doc(mat):
    """JSON encoding of a complex matrix as nested ``[re, im]`` pairs."""

    mat = np.asarray(mat, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in mat]


def channel_doc(inputs, outputs, kraus):
    return {
        "in": [{"set": n, "size": s} for n, s in inputs],
        "out": [{"set": n, "size": s} for n, s in outputs],
        "kraus": [matrix_doc(k) for k in kraus],
    }


def classical_doc(nx, ny, edges, x_name=None, y_name=None):
    doc = {"X": nx, "Y": ny, "edges": [list(e) for e in edges]}
    if x_name:
        doc["x_name"] = x_name
    if y_name:
        doc["y_name"] = y_name
    return doc


def write_doc(path: Path, data) -> Path:
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def run_qhom(*args, cwd: Path, check: bool = False) -> subprocess.CompletedProcess:
    env = os.environ.copy()
    env["PYTHONPATH"] = str(SRC)
    return subprocess.run(
        [sys.executable, "-m", "qhom", *map(str, args)],
        capture_output=True,
        text=True,
        check=check,
        cwd=cwd,
        env=env,
    )
