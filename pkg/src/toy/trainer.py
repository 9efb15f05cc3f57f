"""
小批量 SGD 训练器
"""
import math
from typing import List, Tuple

import numpy as np
from loguru import logger

from src.core.errors import InsufficientDataError, TrainingError
from src.core.models import Architecture, Dataset, TrainingHyper
from src.toy.predictor import Predictor, layer_shapes, parameter_count
from src.utils.seeding import derive_rng


def init_weights(architecture: Architecture, dim: int, num_classes: int, seed: int) -> np.ndarray:
    """均匀初始化 U(-1/sqrt(fan_in), 1/sqrt(fan_in))，偏置同样处理"""
    rng = derive_rng(seed, "train", "init")
    chunks = []
    for fan_in, fan_out in layer_shapes(architecture, dim, num_classes):
        bound = 1.0 / math.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, fan_in * fan_out))
        chunks.append(rng.uniform(-bound, bound, fan_out))
    weights = np.concatenate(chunks)
    assert weights.size == parameter_count(architecture, dim, num_classes)
    return weights


def _objective(predictor: Predictor, X: np.ndarray, y: np.ndarray, weights: np.ndarray,
               l2: float) -> Tuple[float, np.ndarray]:
    loss, grad, _ = predictor.backward(X, y, weights=weights)
    if l2 > 0:
        loss += 0.5 * l2 * float(weights @ weights)
        grad = grad + l2 * weights
    return loss, grad


def train(dataset: Dataset, architecture: Architecture, hyper: TrainingHyper,
          model_id: str = "model") -> Predictor:
    """训练分类器，给定种子时权重逐位确定"""
    predictor, _ = train_with_history(dataset, architecture, hyper, model_id)
    return predictor


def train_with_history(dataset: Dataset, architecture: Architecture, hyper: TrainingHyper,
                       model_id: str = "model") -> Tuple[Predictor, List[float]]:
    """
    训练分类器并返回每轮结束时的训练交叉熵

    Args:
        dataset: 训练数据
        architecture: 模型结构
        hyper: 超参数
        model_id: 模型标识

    Returns:
        (分类器, 损失历史)，历史第一个元素为初始损失
    """
    if len(dataset) == 0:
        raise InsufficientDataError("训练数据为空")

    weights = init_weights(architecture, dataset.dim, dataset.num_classes, hyper.seed)
    predictor = Predictor(model_id, architecture, weights, dataset.num_classes, dataset.dim)
    X = dataset.features_matrix()
    y = dataset.labels()

    initial_loss, _ = _objective(predictor, X, y, weights, 0.0)
    history = [initial_loss]
    if hyper.epochs == 0:
        return predictor, history

    rng = derive_rng(hyper.seed, "train", "shuffle")
    weights = weights.copy()
    n = X.shape[0]
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch):
            batch = order[start:start + hyper.batch]
            loss, grad = _objective(predictor, X[batch], y[batch], weights, hyper.l2)
            if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
                logger.error(f"训练发散: model={model_id}, epoch={epoch}")
                raise TrainingError(f"训练在第 {epoch} 轮出现非有限损失，请降低学习率")
            weights -= hyper.lr * grad

        epoch_loss, _ = _objective(predictor, X, y, weights, 0.0)
        if not math.isfinite(epoch_loss):
            raise TrainingError(f"训练在第 {epoch} 轮出现非有限损失，请降低学习率")
        history.append(epoch_loss)

    trained = predictor.with_weights(weights)
    logger.info(f"模型 {model_id} 训练完成: loss {history[0]:.4f} -> {history[-1]:.4f}, "
                f"accuracy={evaluate_accuracy(trained, dataset):.3f}")
    return trained, history


def evaluate_accuracy(predictor: Predictor, dataset: Dataset) -> float:
    """训练/测试准确率"""
    if len(dataset) == 0:
        return 0.0
    predictions = predictor.predict_batch(dataset.features_matrix())
    return float(np.mean(predictions == dataset.labels()))
