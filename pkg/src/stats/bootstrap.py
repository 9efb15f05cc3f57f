"""
自助法分位带
对样本量网格上的每个 n，有放回抽取 n 个观测重复 reps 次，记录指标的 5%/50%/95% 分位数
"""
import math
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from src.core.errors import ConfigError, InsufficientDataError
from src.core.models import AttackOutcomeSet, BandPoint, BootstrapBand
from src.detection.functions import DetectionFunction
from src.estimators.metrics import aps_from_distances, asr_from_distances, mps_from_distances
from src.estimators.risk import detector_free_from_matrix, distance_matrix, surrogate_from_distances
from src.utils.seeding import derive_rng


class BandMetric(str, Enum):
    """可做自助法的指标"""
    PDAM_DETECTOR_FREE = "pdam-detector-free"
    PDAM_SURROGATE = "pdam-surrogate"
    MPS = "mps"
    APS = "aps"
    ASR = "asr"


def percentile(values: Sequence[float], q: float) -> float:
    """
    最近秩分位数：第 ceil(q*n) 个顺序统计量（从 1 计），q=0 时取最小值

    Args:
        values: 非空数值序列
        q: [0, 1] 内的分位

    Returns:
        分位数
    """
    if len(values) == 0:
        raise InsufficientDataError("分位数的输入为空")
    if not 0.0 <= q <= 1.0:
        raise ConfigError(f"分位 q 必须在 [0, 1] 内，收到 {q}")
    ordered = sorted(values)
    # 容忍 q*n 的浮点误差，如 0.95*20
    rank = max(1, math.ceil(q * len(ordered) - 1e-9))
    return ordered[min(rank, len(ordered)) - 1]


def default_n_grid(n_min: int = 20, n_max: int = 200, step: int = 20) -> List[int]:
    if n_min <= 0 or step <= 0 or n_max < n_min:
        raise ConfigError(f"样本量网格无效: {n_min}..{n_max} step {step}")
    return list(range(n_min, n_max + 1, step))


def _column_metric(metric: BandMetric, detection: Optional[DetectionFunction],
                   tau: Optional[float]) -> Callable[[np.ndarray], Optional[float]]:
    if metric == BandMetric.PDAM_SURROGATE:
        return lambda column: surrogate_from_distances(column, detection)
    if metric == BandMetric.MPS:
        return mps_from_distances
    if metric == BandMetric.APS:
        return aps_from_distances
    if metric == BandMetric.ASR:
        return lambda column: asr_from_distances(column, tau)
    raise ConfigError(f"不支持的指标: {metric}")


def metric_label(metric: BandMetric, detection: Optional[DetectionFunction] = None,
                 tau: Optional[float] = None) -> str:
    """CSV metric 列使用的指标名，携带 τ 或检测函数描述"""
    if metric == BandMetric.ASR:
        return f"asr({tau:.6g})"
    if metric == BandMetric.PDAM_SURROGATE:
        return f"pdam-surrogate({detection.descriptor()})"
    return metric.value


def _prepare(outcomes: Union[AttackOutcomeSet, Sequence[AttackOutcomeSet]], metric: Union[BandMetric, str],
             n_grid: Sequence[int], reps: int, detection: Optional[DetectionFunction],
             tau: Optional[float]) -> Tuple[List[AttackOutcomeSet], BandMetric, List[int], np.ndarray]:
    if isinstance(outcomes, AttackOutcomeSet):
        outcomes = [outcomes]
    outcomes = list(outcomes)
    metric = BandMetric(metric)
    if reps < 2:
        raise ConfigError(f"reps 至少为 2，收到 {reps}")
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(n <= 0 for n in n_grid) or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError(f"样本量网格必须为严格递增的正整数: {n_grid}")
    if metric == BandMetric.PDAM_SURROGATE and detection is None:
        raise ConfigError("pdam-surrogate 需要检测函数")
    if metric == BandMetric.ASR and tau is None:
        raise ConfigError("asr 需要阈值 τ")
    matrix = distance_matrix(outcomes)
    if matrix.shape[0] == 0:
        raise InsufficientDataError("样本为空")
    return outcomes, metric, n_grid, matrix


def _resample(matrix: np.ndarray, metric: BandMetric, n: int, reps: int, seed: int,
              detection: Optional[DetectionFunction],
              tau: Optional[float]) -> Tuple[List[List[float]], List[int]]:
    """
    样本量 n 下的 reps 次成对重采样

    同一次重采样对所有模型使用相同的观测索引，第 (n, rep) 次的索引只由 (seed, n, rep) 决定

    Returns:
        (每个模型的有定义取值, 每个模型被排除的次数)
    """
    n_observations, n_models = matrix.shape
    column_metric = None if metric == BandMetric.PDAM_DETECTOR_FREE else _column_metric(metric, detection, tau)
    values: List[List[float]] = [[] for _ in range(n_models)]
    excluded = [0] * n_models
    for rep in range(reps):
        rng = derive_rng(seed, "bootstrap", n, rep)
        sample = matrix[rng.integers(0, n_observations, size=n)]
        if column_metric is None:
            results = detector_free_from_matrix(sample).tolist()
        else:
            results = [column_metric(sample[:, j]) for j in range(n_models)]
        for j, value in enumerate(results):
            if value is None:
                excluded[j] += 1
            else:
                values[j].append(float(value))
    return values, excluded


def bootstrap_band(outcomes: Union[AttackOutcomeSet, Sequence[AttackOutcomeSet]],
                   metric: Union[BandMetric, str], n_grid: Sequence[int], reps: int, seed: int,
                   detection: Optional[DetectionFunction] = None,
                   tau: Optional[float] = None) -> List[BootstrapBand]:
    """
    计算每个模型的自助法分位带

    Args:
        outcomes: 一个或多个共享样本的结果集
        metric: 指标
        n_grid: 升序样本量网格（可超过样本大小，有放回抽样）
        reps: 每个 n 的重复次数，至少 2
        seed: 种子；第 (n, rep) 次抽样的索引只由 (seed, n, rep) 决定
        detection: pdam-surrogate 所需的检测函数
        tau: asr 所需的阈值

    Returns:
        每个模型一条分位带
    """
    outcomes, metric, n_grid, matrix = _prepare(outcomes, metric, n_grid, reps, detection, tau)
    n_models = matrix.shape[1]

    points: List[List[BandPoint]] = [[] for _ in range(n_models)]
    for n in n_grid:
        values, excluded = _resample(matrix, metric, n, reps, seed, detection, tau)
        for j in range(n_models):
            if excluded[j]:
                logger.warning(f"{outcomes[j].model_id} n={n}: {excluded[j]} 次重采样上指标无定义，已排除")
            if values[j]:
                points[j].append(BandPoint(
                    n=n,
                    p05=percentile(values[j], 0.05),
                    p50=percentile(values[j], 0.50),
                    p95=percentile(values[j], 0.95),
                    excluded=excluded[j],
                ))
            else:
                points[j].append(BandPoint(n=n, excluded=excluded[j]))

    label = metric_label(metric, detection, tau)
    bands = [
        BootstrapBand(
            metric_name=label,
            model_id=o.model_id,
            n_grid=tuple(n_grid),
            points=tuple(points[j]),
            reps=reps,
            seed=seed,
        )
        for j, o in enumerate(outcomes)
    ]
    logger.info(f"自助法完成: metric={label}, 模型数={n_models}, n={n_grid[0]}..{n_grid[-1]}, reps={reps}")
    return bands


def resample_means(outcomes: Union[AttackOutcomeSet, Sequence[AttackOutcomeSet]],
                   metric: Union[BandMetric, str], n_grid: Sequence[int], reps: int, seed: int,
                   detection: Optional[DetectionFunction] = None,
                   tau: Optional[float] = None) -> Dict[str, List[Optional[float]]]:
    """
    与 bootstrap_band 相同的重采样下，每个 n 的指标均值

    用于观察 MPS 随样本量增大而下降的偏差；全部重采样无定义时该点为 None

    Returns:
        模型ID -> 按 n_grid 排列的均值
    """
    outcomes, metric, n_grid, matrix = _prepare(outcomes, metric, n_grid, reps, detection, tau)
    means: Dict[str, List[Optional[float]]] = {o.model_id: [] for o in outcomes}
    for n in n_grid:
        values, _ = _resample(matrix, metric, n, reps, seed, detection, tau)
        for o, column in zip(outcomes, values):
            means[o.model_id].append(math.fsum(column) / len(column) if column else None)
    return means
