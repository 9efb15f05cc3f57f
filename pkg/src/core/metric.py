"""
距离度量与成功判据
"""
import numpy as np

from src.core.errors import ConfigError, DimensionError
from src.core.models import DistanceMetric, SuccessCriterion


def distance(x, x_prime, metric: DistanceMetric = DistanceMetric.LINF) -> float:
    """
    计算 d(x', x)

    Args:
        x: 原始特征向量
        x_prime: 扰动后的特征向量
        metric: Linf 或 L2

    Returns:
        非负距离
    """
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(x_prime, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"向量长度不一致: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ConfigError("距离计算要求有限输入")
    if a.size == 0:
        return 0.0
    diff = b - a
    metric = DistanceMetric(metric)
    if metric == DistanceMetric.LINF:
        return float(np.max(np.abs(diff)))
    return float(np.linalg.norm(diff))


def evaluate_success(criterion: SuccessCriterion, original_prediction: int,
                     ground_truth: int, perturbed_prediction: int) -> bool:
    """按判据判断扰动后的预测是否构成成功攻击"""
    criterion = SuccessCriterion(criterion)
    if criterion == SuccessCriterion.PREDICTION_CHANGE:
        return perturbed_prediction != original_prediction
    return perturbed_prediction != ground_truth
