import numpy as np
import pytest

from modules.cumi_model import ViewSpec, init_model
from modules.data_io import MultiViewBatch, MultiViewDataset, make_miniature_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_dataset():
    """2 views (d=5 each), 8 samples, 2 balanced classes."""
    gen = np.random.default_rng(7)
    labels = np.array([0, 1] * 4)
    views = [gen.normal(size=(8, 5)) + labels[:, None], gen.normal(size=(8, 5)) - labels[:, None]]
    return MultiViewDataset(views=views, labels=labels, n_classes=2, name="toy")


@pytest.fixture
def toy_batch(toy_dataset):
    return MultiViewBatch(views=list(toy_dataset.views), labels=toy_dataset.labels)


@pytest.fixture
def toy_model():
    return init_model([ViewSpec(5), ViewSpec(5)], n_classes=2, seed=3)


@pytest.fixture
def mini_dataset():
    return make_miniature_dataset(seed=0)
