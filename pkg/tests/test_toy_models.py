"""
合成数据、分类器与训练测试
"""
import numpy as np
import pytest

from src.core.errors import DimensionError
from src.core.models import Architecture, DatasetKind, SyntheticSpec, TrainingHyper
from src.toy.datasets import BLOB_RADIUS, generate_dataset
from src.toy.predictor import Predictor, parameter_count
from src.toy.trainer import evaluate_accuracy, init_weights, train, train_with_history
from tests.helpers import linear_model


def test_zero_noise_blobs_sit_on_centers():
    """测试零噪声高斯团落在中心点"""
    dataset = generate_dataset(SyntheticSpec(kind=DatasetKind.GAUSSIAN_BLOBS, n=4, num_classes=2, noise=0.0, seed=7))
    X = dataset.features_matrix()
    labels = dataset.labels()
    assert list(labels).count(0) == 2 and list(labels).count(1) == 2
    np.testing.assert_allclose(X[labels == 0], [[BLOB_RADIUS, 0.0]] * 2, atol=1e-12)
    np.testing.assert_allclose(X[labels == 1], [[-BLOB_RADIUS, 0.0]] * 2, atol=1e-12)


def test_generate_dataset_is_deterministic():
    """测试数据生成由种子决定"""
    spec = SyntheticSpec(kind=DatasetKind.XOR_GRID, n=50, seed=4)
    assert generate_dataset(spec) == generate_dataset(spec)


def test_two_moons_shape_and_labels():
    """测试双月数据的规模与标签"""
    dataset = generate_dataset(SyntheticSpec(kind=DatasetKind.TWO_MOONS, n=200, seed=1))
    assert len(dataset) == 200
    assert set(dataset.labels().tolist()) == {0, 1}


def test_two_moons_requires_two_classes():
    """测试双月数据只能有两类"""
    with pytest.raises(ValueError):
        SyntheticSpec(kind=DatasetKind.TWO_MOONS, n=10, num_classes=3)


def test_zero_weights_predict_class_zero():
    """测试零权重模型预测类 0 且梯度为零"""
    arch = Architecture(kind="linear")
    predictor = Predictor("zero", arch, np.zeros(parameter_count(arch, 3, 4)), num_classes=4, dim=3)
    x = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(predictor.logits(x), np.zeros(4))
    assert predictor.predict(x) == 0
    np.testing.assert_array_equal(predictor.input_gradient(x, 2), np.zeros(3))


def test_hand_set_linear_model():
    """测试手工设定的线性模型"""
    predictor = linear_model([1.0, 0.0])
    assert predictor.predict([2.0, 5.0]) == 1
    assert predictor.predict([-2.0, 5.0]) == 0
    assert len(predictor.logits([0.0, 0.0])) == 2


def test_predict_rejects_wrong_dimension():
    """测试维度不符时报错"""
    with pytest.raises(DimensionError):
        linear_model([1.0, 0.0]).predict([1.0])


@pytest.mark.parametrize("kind, hidden, activation", [
    ("linear", (), "relu"),
    ("mlp", (8, 6), "relu"),
    ("mlp", (8, 6), "tanh"),
])
def test_input_gradient_matches_finite_differences(kind, hidden, activation):
    """测试反向传播的输入梯度与中心差分一致"""
    rng = np.random.default_rng(11)
    arch = Architecture(kind=kind, hidden_sizes=hidden, activation=activation)
    checked = 0
    while checked < 100:
        weights = init_weights(arch, 4, 3, seed=int(rng.integers(1_000_000)))
        predictor = Predictor("fd", arch, weights, num_classes=3, dim=4)
        x = rng.normal(size=4)
        pre, _ = predictor.forward_trace(x[None, :])
        # 预激活过于接近 0 时 ReLU 不可导，换一个点
        if kind == "mlp" and activation == "relu" and any(np.min(np.abs(z)) < 1e-3 for z in pre[:-1]):
            continue
        label = int(rng.integers(3))
        grad = predictor.input_gradient(x, label)
        assert grad.shape == (4,)

        h = 1e-5
        fd = np.zeros(4)
        for k in range(4):
            step = np.zeros(4)
            step[k] = h
            fd[k] = (predictor.loss(x + step, label) - predictor.loss(x - step, label)) / (2 * h)
        scale = max(np.linalg.norm(grad), np.linalg.norm(fd), 1e-6)
        assert np.linalg.norm(grad - fd) / scale <= 1e-4
        checked += 1


@pytest.mark.parametrize("kind, hidden", [("linear", ()), ("mlp", (5,))])
def test_predict_ignores_shared_output_bias(kind, hidden):
    """测试所有输出偏置加同一常数后预测不变"""
    rng = np.random.default_rng(12)
    arch = Architecture(kind=kind, hidden_sizes=hidden)
    for seed in range(20):
        predictor = Predictor("base", arch, init_weights(arch, 3, 4, seed=seed), num_classes=4, dim=3)
        weights = predictor.weights.copy()
        _, b_start, _, fan_out = predictor.offsets[-1]
        weights[b_start:b_start + fan_out] += 2.0
        shifted = predictor.with_weights(weights)
        X = rng.normal(size=(25, 3))
        np.testing.assert_array_equal(shifted.predict_batch(X), predictor.predict_batch(X))
        assert shifted.loss(X[0], 1) == pytest.approx(predictor.loss(X[0], 1), abs=1e-12)


def test_linear_model_separates_blobs():
    """测试线性模型能分开高斯团"""
    dataset = generate_dataset(SyntheticSpec(kind=DatasetKind.GAUSSIAN_BLOBS, n=200, noise=0.5, seed=2))
    predictor = train(dataset, Architecture(kind="linear"), TrainingHyper(lr=0.1, epochs=200, seed=0))
    assert evaluate_accuracy(predictor, dataset) >= 0.95


def test_zero_epochs_returns_initial_model():
    """测试零轮训练返回初始模型"""
    dataset = generate_dataset(SyntheticSpec(kind=DatasetKind.GAUSSIAN_BLOBS, n=20, seed=2))
    arch = Architecture(kind="mlp", hidden_sizes=(5,))
    predictor, history = train_with_history(dataset, arch, TrainingHyper(epochs=0, seed=9))
    np.testing.assert_array_equal(predictor.weights, init_weights(arch, 2, 2, 9))
    assert len(history) == 1


def test_training_is_bitwise_deterministic():
    """测试训练逐位确定"""
    dataset = generate_dataset(SyntheticSpec(kind=DatasetKind.TWO_MOONS, n=60, seed=5))
    arch = Architecture(kind="mlp", hidden_sizes=(8,))
    hyper = TrainingHyper(lr=0.1, epochs=10, batch=16, seed=3)
    a = train(dataset, arch, hyper)
    b = train(dataset, arch, hyper)
    assert a.weights.tobytes() == b.weights.tobytes()


def test_training_loss_decreases():
    """测试训练损失下降"""
    dataset = generate_dataset(SyntheticSpec(kind=DatasetKind.GAUSSIAN_BLOBS, n=100, seed=8))
    _, history = train_with_history(dataset, Architecture(kind="linear"), TrainingHyper(epochs=20, seed=1))
    assert len(history) == 21
    assert history[-1] < history[0]
