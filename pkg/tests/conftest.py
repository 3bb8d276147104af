import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from unary_hdc.data import Dataset  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def idx_dir() -> Path:
    return FIXTURES / "idx4"


@pytest.fixture
def toy_csv() -> Path:
    return FIXTURES / "toy.csv"


@pytest.fixture
def golden_model_path() -> Path:
    return FIXTURES / "golden_model.uhd"


def random_dataset(n: int, features: int, classes: int, seed: int = 0, name: str = "random") -> Dataset:
    """8-bit images with every class present."""
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(n, features), dtype=np.uint8)
    labels = np.arange(n, dtype=np.int64) % classes
    rng.shuffle(labels)
    return Dataset(images=images, labels=labels, name=name)


@pytest.fixture
def small_dataset() -> Dataset:
    return random_dataset(40, 6, 3, seed=1)


def dataset_dir(env: str) -> Path:
    raw = os.getenv(env, "").strip()
    if not raw or not Path(raw).is_dir():
        pytest.skip(f"{env} not set to a dataset directory")
    return Path(raw)
