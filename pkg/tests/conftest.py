import json
from pathlib import Path

import numpy as np
import pytest

from vinnpruner.model import Dataset, LayerSpec, Model
from vinnpruner.persistence import load_dataset, load_model

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def golden() -> dict:
    return json.loads((FIXTURES / "golden" / "golden.json").read_text())


@pytest.fixture(scope="session")
def mlp() -> Model:
    return load_model(FIXTURES / "models" / "mlp")


@pytest.fixture(scope="session")
def cnn() -> Model:
    return load_model(FIXTURES / "models" / "cnn")


@pytest.fixture(scope="session")
def blobs_test() -> Dataset:
    return load_dataset(FIXTURES / "datasets" / "blobs-test")


@pytest.fixture(scope="session")
def shapes_test() -> Dataset:
    return load_dataset(FIXTURES / "datasets" / "shapes-test")


def dense(weight, bias=None) -> LayerSpec:
    weight = np.asarray(weight, dtype=np.float32)
    if bias is None:
        bias = np.zeros(weight.shape[0], dtype=np.float32)
    return LayerSpec("dense", weight=weight, bias=np.asarray(bias, dtype=np.float32))


def tiny_dataset(model: Model, rng: np.random.Generator, n: int = 8, n_classes: int = 2) -> Dataset:
    samples = rng.standard_normal((n, *model.input_shape)).astype(np.float32)
    labels = rng.integers(0, n_classes, size=n)
    return Dataset("tiny", samples, labels, [f"c{i}" for i in range(n_classes)])


def random_model(rng: np.random.Generator, sizes: list[int]) -> Model:
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(dense(rng.standard_normal((fan_out, fan_in)), rng.standard_normal(fan_out)))
        if i < len(sizes) - 2:
            layers.append(LayerSpec("relu"))
    return Model("rand", (sizes[0],), layers)
