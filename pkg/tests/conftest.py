"""
测试公共夹具
"""
import math

import pytest

from src.core.models import Architecture, AttackOutcomeSet, DatasetKind, SyntheticSpec, TrainingHyper
from src.toy.datasets import generate_dataset
from src.toy.trainer import train
from tests.helpers import linear_model


@pytest.fixture
def flip_predictor():
    """一维模型 w=1, b=0：x > 0 判为类 1"""
    return linear_model([1.0])


@pytest.fixture
def micro_pool():
    """两个模型共享两个观测的手算实例"""
    return [
        AttackOutcomeSet.from_distances("M1", [0.1, 0.3]),
        AttackOutcomeSet.from_distances("M2", [0.2, math.inf]),
    ]


@pytest.fixture(scope="session")
def blob_dataset():
    return generate_dataset(SyntheticSpec(kind=DatasetKind.GAUSSIAN_BLOBS, n=200, noise=1.0, seed=3))


@pytest.fixture(scope="session")
def blob_model(blob_dataset):
    return train(blob_dataset, Architecture(kind="linear"), TrainingHyper(lr=0.1, epochs=50, seed=0), "blob-linear")
