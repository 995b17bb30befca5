"""Shared fixtures"""

import sys
from pathlib import Path

import numpy as np
import pytest
from loguru import logger
from typer.testing import CliRunner

from app.core.config import settings
from app.schemas.config import DataConfig, TrainConfig
from app.services.datasets import generate_gaussian_mixture, make_ssl_split


CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(autouse=True)
def quiet_logging():
    """Warnings and above, written to whatever stderr is current"""
    logger.remove()
    logger.add(lambda message: sys.stderr.write(message), level="WARNING")
    yield
    logger.remove()


@pytest.fixture(autouse=True)
def runs_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "RUNS_DIR", str(tmp_path / "runs"))
    return tmp_path / "runs"


@pytest.fixture
def toy_config_path() -> Path:
    return CONFIGS_DIR / "toy.json"


@pytest.fixture
def tiny_config() -> TrainConfig:
    """Small enough for a few steps per test"""
    return TrainConfig(
        batch_size=4,
        mu=2,
        epochs=2,
        hidden_widths=[8],
        embed_dim=4,
        selection_temperature="pseudo",
        data=DataConfig(classes=2, per_class=10, separation=4.0, labels_per_class=2),
        seed=0,
    )


@pytest.fixture
def tiny_dataset():
    """20 rows, two well separated classes"""
    return generate_gaussian_mixture(seed=3, classes=2, per_class=10, dim=2, separation=4.0)


@pytest.fixture
def tiny_split(tiny_dataset):
    return make_ssl_split(tiny_dataset, labels_per_class=2, test_fraction=0.2, seed=0)


@pytest.fixture
def tiny_view(tiny_dataset, tiny_split):
    return tiny_split.training_view(tiny_dataset)


@pytest.fixture
def unit_rows():
    def _make(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        z = rng.normal(size=(n, d))
        return z / np.linalg.norm(z, axis=1, keepdims=True)

    return _make


@pytest.fixture
def cli_runner() -> CliRunner:
    return CliRunner()
