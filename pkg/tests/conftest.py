"""Pytest configuration and fixtures."""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from learnkit.dataset import Dataset, from_arrays

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmp_dir:
        yield Path(tmp_dir)


@pytest.fixture
def data_dir():
    """Directory holding the fixture files."""
    return DATA_DIR


@pytest.fixture
def table_csv(temp_dir):
    """Three-row, two-attribute diagnosis file with three classes."""
    path = temp_dir / "table.csv"
    path.write_text(
        "Tenderness,Guarding,Diagnosis\n" "Y,N,App\n" "N,N,Dys\n" "Y,Y,Ppu\n"
    )
    return path


@pytest.fixture
def line_clusters():
    """Ten BLACK (+1) points at x <= -1 and ten WHITE (-1) points at x >= +1."""
    black = [[-float(i)] for i in range(1, 11)]
    white = [[float(i)] for i in range(1, 11)]
    return from_arrays(black + white, [1] * 10 + [-1] * 10)


def gaussian_clusters(seed: int, n: int, dim: int = 2, gap: float = 3.0) -> Dataset:
    """Two labelled Gaussian clouds centred at +gap/2 and -gap/2 on every axis.

    Labels alternate so both classes are present whenever n >= 2.
    """
    rng = np.random.default_rng(seed)
    labels = np.array([1 if i % 2 == 0 else -1 for i in range(n)])
    centres = labels[:, None] * (gap / 2.0) * np.ones((n, dim))
    points = centres + rng.normal(scale=0.4, size=(n, dim))
    return from_arrays(points, labels.tolist())


def separable_clusters(seed: int, n: int, dim: int = 2) -> Dataset:
    """Gaussian clouds whose points all lie strictly on their side of x1 + ... = 0."""
    rng = np.random.default_rng(seed)
    labels = np.array([1 if i % 2 == 0 else -1 for i in range(n)])
    points = labels[:, None] * 2.0 + rng.uniform(-0.9, 0.9, size=(n, dim))
    return from_arrays(points, labels.tolist())
