"""
损害概率估计
替代估计（检测函数对 ASR 积分）、蒙特卡洛估计、以及无检测器的相对估计
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.core.errors import ConfigError, EstimationError, InsufficientDataError, SampleMismatchError
from src.core.models import (
    AttackOutcomeSet, AttackSpec, Dataset, DistanceMetric, EstimationMethod,
    OperationalRisk, RiskEstimate, SuccessCriterion
)
from src.detection.functions import DetectionFunction, EmpiricalAverageDetection
from src.detection.simulator import SimulatedDetector
from src.estimators.metrics import asr_count
from src.managers.attack_manager import AttackManager
from src.toy.predictor import Predictor

EQUIVALENCE_TOLERANCE = 1e-12


def check_shared_sample(outcomes: Sequence[AttackOutcomeSet]) -> List[str]:
    """校验所有结果集共享同一观测样本与度量，返回参考观测顺序"""
    if not outcomes:
        raise InsufficientDataError("至少需要一个模型的结果")
    reference = outcomes[0]
    reference_ids = reference.observation_ids()
    reference_set = set(reference_ids)
    for other in outcomes[1:]:
        if other.metric != reference.metric:
            raise ConfigError(f"模型 {other.model_id} 的度量 {other.metric.value} 与 "
                              f"{reference.model_id} 的 {reference.metric.value} 不一致")
        if len(other) != len(reference) or set(other.observation_ids()) != reference_set:
            raise SampleMismatchError(f"模型 {other.model_id} 与 {reference.model_id} 的观测样本不一致")
    model_ids = [o.model_id for o in outcomes]
    if len(set(model_ids)) != len(model_ids):
        raise ConfigError(f"模型ID重复: {model_ids}")
    return reference_ids


def distance_matrix(outcomes: Sequence[AttackOutcomeSet]) -> np.ndarray:
    """按共享观测顺序排列的 (I, J) 距离矩阵"""
    ids = check_shared_sample(outcomes)
    columns = []
    for o in outcomes:
        lookup = {r.observation_id: r.d_a for r in o.records}
        columns.append([lookup[i] for i in ids])
    return np.asarray(columns, dtype=np.float64).T


# ---------------------------------------------------------------------------
# 替代估计
# ---------------------------------------------------------------------------

def surrogate_from_distances(distances: np.ndarray, f: DetectionFunction) -> float:
    """(1/|X|) * sum_{d 有限} Ψ(d)"""
    distances = np.asarray(distances, dtype=np.float64)
    if distances.size == 0:
        raise InsufficientDataError("样本为空")
    finite = distances[np.isfinite(distances)]
    if finite.size == 0:
        return 0.0
    return math.fsum(f.evaluate_many(finite)) / distances.size


def stieltjes_integral(o: AttackOutcomeSet, f: DetectionFunction) -> float:
    """Ψ 对 ASR 阶梯函数的 Stieltjes 积分：每个跳跃点贡献 Ψ(τ_k) * ΔASR(τ_k)"""
    finite = np.asarray(o.sorted_finite_distances, dtype=np.float64)
    if finite.size == 0:
        return 0.0
    taus, jumps = np.unique(finite, return_counts=True)
    return math.fsum(f.evaluate_many(taus) * jumps) / len(o)


def pdam_surrogate(o: AttackOutcomeSet, f: DetectionFunction) -> RiskEstimate:
    """
    P^dam 的无偏一致估计：(1/|X|) * sum_{d_A(x) != inf} Ψ(d_A(x))

    Args:
        o: 结果集
        f: 检测概率函数

    Returns:
        估计结果
    """
    if len(o) == 0:
        raise InsufficientDataError(f"模型 {o.model_id} 的结果集为空")
    total = surrogate_from_distances(o.distances(), f)
    integral = stieltjes_integral(o, f)
    if abs(total - integral) > EQUIVALENCE_TOLERANCE:
        logger.error(f"替代估计两种算法不一致: sum={total!r}, integral={integral!r}")
        raise EstimationError(f"模型 {o.model_id}: 求和形式与积分形式不一致")
    return RiskEstimate(
        model_id=o.model_id,
        pdam_hat=min(max(total, 0.0), 1.0),
        n=len(o),
        method=EstimationMethod.SURROGATE,
        detection_descriptor=f.descriptor(),
    )


# ---------------------------------------------------------------------------
# 蒙特卡洛估计
# ---------------------------------------------------------------------------

def pdam_monte_carlo_from_outcomes(o: AttackOutcomeSet, detector: SimulatedDetector) -> RiskEstimate:
    """对每个成功观测抽一次检测器判定，统计成功且未被发现的比例"""
    if len(o) == 0:
        raise InsufficientDataError(f"模型 {o.model_id} 的结果集为空")
    undetected = 0
    for record in o.records:
        if record.is_success and not detector.detect(record.d_a):
            undetected += 1
    return RiskEstimate(
        model_id=o.model_id,
        pdam_hat=undetected / len(o),
        n=len(o),
        method=EstimationMethod.MONTE_CARLO,
        detection_descriptor=detector.detection.descriptor(),
    )


def pdam_monte_carlo(dataset: Dataset, predictor: Predictor, specs: Sequence[AttackSpec],
                     criterion: SuccessCriterion, detection: DetectionFunction, seed: int,
                     metric: DistanceMetric = DistanceMetric.LINF,
                     clip: Optional[Tuple[float, float]] = None) -> RiskEstimate:
    """逐观测执行攻击策略，再用模拟检测器判定最小扰动样本是否被发现"""
    if len(dataset) == 0:
        raise InsufficientDataError("数据集为空")
    manager = AttackManager(specs, criterion, metric, clip)
    _, outcome = manager.evaluate(predictor, dataset)
    detector = SimulatedDetector.from_seed(detection, seed)
    estimate = pdam_monte_carlo_from_outcomes(outcome, detector)
    logger.info(f"模型 {predictor.model_id}: 蒙特卡洛 P^dam = {estimate.pdam_hat:.4f}")
    return estimate


# ---------------------------------------------------------------------------
# 无检测器的相对估计
# ---------------------------------------------------------------------------

def w_count(outcomes: Sequence[AttackOutcomeSet], tau: float) -> int:
    """W(τ) = |{(i, j) : d_A(x_i, M_j) > τ}|，inf 大于任何有限 τ"""
    matrix = distance_matrix(outcomes)
    if math.isnan(tau) or math.isinf(tau):
        raise ConfigError(f"τ 必须为有限值，收到 {tau}")
    return int(np.count_nonzero(matrix > tau))


def average_detection_fn(outcomes: Sequence[AttackOutcomeSet]) -> EmpiricalAverageDetection:
    """
    Ψ^avg(τ) = 1 - (1/J) * sum_j ASR_j(τ) = W(τ) / (|X| * J)，包含被评估模型自身

    两种形式在每个跳跃点及 0 处都计算一遍，必须逐位相等
    """
    matrix = distance_matrix(outcomes)
    n_observations, n_models = matrix.shape
    if n_observations == 0:
        raise InsufficientDataError("汇总样本为空")
    if n_models == 1:
        logger.warning("只有一个模型：Ψ^avg 退化为模型对自身的比较")
    f = EmpiricalAverageDetection(
        pooled=tuple(np.sort(matrix.ravel()).tolist()),
        n_observations=n_observations,
        n_models=n_models,
        model_ids=tuple(o.model_id for o in outcomes),
    )
    finite = matrix[np.isfinite(matrix)]
    taus = np.unique(np.concatenate([[0.0], finite]))
    w_form = f.evaluate_many(taus)
    asr_form = average_detection_by_asr_many(outcomes, taus)
    mismatch = np.flatnonzero(w_form != asr_form)
    if mismatch.size:
        k = int(mismatch[0])
        logger.error(f"Ψ^avg 两种形式不一致: τ={taus[k]!r}, W={w_form[k]!r}, ASR={asr_form[k]!r}")
        raise EstimationError(f"Ψ^avg 的 W 形式与 ASR 形式在 τ={taus[k]!r} 处不一致")
    return f


def average_detection_by_asr_many(outcomes: Sequence[AttackOutcomeSet], taus: np.ndarray) -> np.ndarray:
    """按整数计数计算 (I*J - sum_j |{x : d_A(x, M_j) <= τ}|) / (I*J)"""
    check_shared_sample(outcomes)
    taus = np.asarray(taus, dtype=np.float64)
    if np.any(np.isnan(taus)) or np.any(taus < 0):
        raise ConfigError("τ 必须为非负数")
    total = len(outcomes[0]) * len(outcomes)
    successes = np.zeros(taus.shape, dtype=np.int64)
    for o in outcomes:
        finite = np.asarray(o.sorted_finite_distances, dtype=np.float64)
        successes += np.searchsorted(finite, taus, side="right")
    return (total - successes) / total


def average_detection_by_asr(outcomes: Sequence[AttackOutcomeSet], tau: float) -> float:
    """Ψ^avg 的 ASR 形式 1 - (1/J) * sum_j ASR_j(τ)，按整数计数计算"""
    check_shared_sample(outcomes)
    total = len(outcomes[0]) * len(outcomes)
    successes = sum(asr_count(o, tau) for o in outcomes)
    return (total - successes) / total


def detector_free_from_matrix(matrix: np.ndarray) -> np.ndarray:
    """
    排序计数实现：汇总 I*J 个 d_A（含 inf）降序排列，
    每个有限值首次出现的位置即严格大于它的个数 W(d)

    Args:
        matrix: (I, J) 距离矩阵

    Returns:
        每个模型的 P^dam，长度 J
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    n_observations, n_models = matrix.shape
    if matrix.size == 0:
        raise InsufficientDataError("汇总样本为空")

    descending = np.sort(matrix.ravel())[::-1]
    # 取负后升序，二分查找首次出现位置
    keys = -descending
    result = np.zeros(n_models)
    for j in range(n_models):
        column = matrix[:, j]
        finite = column[np.isfinite(column)]
        if finite.size == 0:
            continue
        indices = np.searchsorted(keys, -finite, side="left")
        result[j] = int(indices.sum()) / (n_observations * n_observations * n_models)
    return result


def pdam_detector_free(outcomes: Sequence[AttackOutcomeSet]) -> List[RiskEstimate]:
    """以集成平均检测函数为 Ψ 的相对 P^dam，每个模型一个"""
    matrix = distance_matrix(outcomes)
    n_observations, n_models = matrix.shape
    if n_observations == 0:
        raise InsufficientDataError("汇总样本为空")
    if n_models == 1:
        logger.warning("只有一个模型：无检测器估计退化为模型对自身的比较")

    values = detector_free_from_matrix(matrix)
    descriptor = f"average:J={n_models}"
    estimates = [
        RiskEstimate(
            model_id=o.model_id,
            pdam_hat=min(max(float(value), 0.0), 1.0),
            n=n_observations,
            method=EstimationMethod.DETECTOR_FREE,
            detection_descriptor=descriptor,
        )
        for o, value in zip(outcomes, values)
    ]
    logger.info("无检测器估计完成: " + ", ".join(f"{e.model_id}={e.pdam_hat:.4f}" for e in estimates))
    return estimates


def operational_risk(estimate: RiskEstimate, c_dam: float) -> OperationalRisk:
    """风险 = P^dam × C^dam"""
    if math.isnan(c_dam) or c_dam < 0:
        raise ConfigError(f"C^dam 不能为负，收到 {c_dam}")
    return OperationalRisk(
        model_id=estimate.model_id,
        pdam_hat=estimate.pdam_hat,
        c_dam=c_dam,
        risk=estimate.pdam_hat * c_dam,
    )
