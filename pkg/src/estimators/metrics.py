"""
鲁棒性指标
ASR(τ) 经验分布函数、ASR 曲线、最小扰动 MPS、平均扰动 APS
"""
from bisect import bisect_right
from typing import List, Optional, Tuple

import numpy as np

from src.core.errors import ConfigError, InsufficientDataError
from src.core.models import AttackOutcomeSet


def _require_nonempty(o: AttackOutcomeSet):
    if len(o) == 0:
        raise InsufficientDataError(f"模型 {o.model_id} 的结果集为空")


def asr_count(o: AttackOutcomeSet, tau: float) -> int:
    """d_A(x) <= τ 的观测数"""
    if np.isnan(tau) or tau < 0:
        raise ConfigError(f"τ 必须为非负数，收到 {tau}")
    return bisect_right(o.sorted_finite_distances, tau)


def asr(o: AttackOutcomeSet, tau: float) -> float:
    """
    攻击成功率 ASR(τ) = |{x : d_A(x) <= τ}| / |X|

    Args:
        o: 结果集
        tau: 扰动阈值

    Returns:
        右连续、单调不减的比例
    """
    _require_nonempty(o)
    return asr_count(o, tau) / len(o)


def asr_curve(o: AttackOutcomeSet) -> List[Tuple[float, float]]:
    """ASR 阶梯函数的断点 (τ, ASR(τ))，每个不同的有限 d_A 一个"""
    _require_nonempty(o)
    finite = np.asarray(o.sorted_finite_distances, dtype=np.float64)
    if finite.size == 0:
        return []
    taus = np.unique(finite)
    counts = np.searchsorted(finite, taus, side="right")
    n = len(o)
    return [(float(t), int(c) / n) for t, c in zip(taus, counts)]


def asr_from_distances(distances: np.ndarray, tau: float) -> float:
    distances = np.asarray(distances, dtype=np.float64)
    return float(np.count_nonzero(distances <= tau)) / distances.size


def mps_from_distances(distances: np.ndarray) -> Optional[float]:
    distances = np.asarray(distances, dtype=np.float64)
    finite = distances[np.isfinite(distances)]
    return float(finite.min()) if finite.size else None


def aps_from_distances(distances: np.ndarray) -> Optional[float]:
    distances = np.asarray(distances, dtype=np.float64)
    finite = distances[np.isfinite(distances)]
    return float(finite.mean()) if finite.size else None


def mps(o: AttackOutcomeSet) -> Optional[float]:
    """最小扰动大小；无成功攻击时为 None"""
    finite = o.sorted_finite_distances
    return finite[0] if finite else None


def aps(o: AttackOutcomeSet) -> Optional[float]:
    """成功攻击的平均扰动大小（排除 inf）；无成功攻击时为 None"""
    value, _ = aps_summary(o)
    return value


def aps_summary(o: AttackOutcomeSet) -> Tuple[Optional[float], int]:
    """(APS, 被排除的未成功观测数)"""
    excluded = len(o) - o.finite_count
    if o.finite_count == 0:
        return None, excluded
    return float(np.mean(o.sorted_finite_distances)), excluded
