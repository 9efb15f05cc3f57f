"""
检测概率函数拟合
带 L2 正则的逻辑回归，IRLS（牛顿法）求解
"""
from typing import Sequence

import numpy as np
from loguru import logger
from scipy.special import expit

from src.core.errors import ConfigError, DetectionFitError, InsufficientDataError
from src.core.models import DetectionSample
from src.detection.functions import FitDiagnostics, LogisticDetection

MAX_ITERATIONS = 100
TOLERANCE = 1e-10


def _penalized_log_likelihood(X: np.ndarray, y: np.ndarray, w: np.ndarray, l2: float) -> float:
    z = X @ w
    # 按样本平均，复制全部样本不改变最优解
    return float(np.mean(y * z - np.logaddexp(0.0, z)) - 0.5 * l2 * (w @ w))


def fit_logistic(samples: Sequence[DetectionSample], l2: float = 1e-6,
                 max_iterations: int = MAX_ITERATIONS, tolerance: float = TOLERANCE) -> LogisticDetection:
    """
    以 (1, τ) 为特征拟合 P(未被发现 | τ)

    Args:
        samples: 检测样本
        l2: 岭惩罚系数（作用于两个参数）
        max_iterations: 最大迭代次数
        tolerance: 参数步长收敛阈值

    Returns:
        Ψ(τ) = σ(beta0 - beta1 τ)，附带拟合诊断
    """
    if len(samples) < 2:
        raise InsufficientDataError(f"拟合至少需要 2 个样本，收到 {len(samples)}")
    if l2 < 0:
        raise ConfigError(f"l2 不能为负，收到 {l2}")

    tau = np.asarray([s.tau for s in samples], dtype=np.float64)
    y = np.asarray([s.undetected for s in samples], dtype=np.float64)
    if l2 == 0 and (np.all(y == 1) or np.all(y == 0)):
        raise DetectionFitError("所有样本标签相同，无正则时最大似然不存在，请设置 l2 > 0")

    X = np.column_stack([np.ones_like(tau), tau])
    n = X.shape[0]
    w = np.zeros(2)
    objective = _penalized_log_likelihood(X, y, w, l2)
    converged = False
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        p = expit(X @ w)
        gradient = X.T @ (y - p) / n - l2 * w
        hessian = X.T @ (X * (p * (1.0 - p))[:, None]) / n + l2 * np.eye(2)
        try:
            step = np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError as e:
            raise DetectionFitError(f"Hessian 奇异，无法继续迭代，请设置 l2 > 0: {str(e)}") from e

        # 步长减半保证目标函数不下降
        scale = 1.0
        candidate = w + step
        candidate_objective = _penalized_log_likelihood(X, y, candidate, l2)
        while candidate_objective < objective - 1e-12 * (1.0 + abs(objective)) and scale > 1e-10:
            scale *= 0.5
            candidate = w + scale * step
            candidate_objective = _penalized_log_likelihood(X, y, candidate, l2)

        change = float(np.max(np.abs(candidate - w)))
        w, objective = candidate, candidate_objective
        if not np.all(np.isfinite(w)):
            raise DetectionFitError("拟合参数出现非有限值")
        if change < tolerance:
            converged = True
            break

    if not converged:
        if l2 == 0:
            raise DetectionFitError(f"{max_iterations} 次迭代内未收敛（数据可能完全可分），请设置 l2 > 0")
        logger.warning(f"逻辑回归在 {max_iterations} 次迭代内未收敛，返回当前参数")

    log_likelihood = float(np.sum(y * (X @ w) - np.logaddexp(0.0, X @ w)))
    detection = LogisticDetection(
        beta0=float(w[0]),
        beta1=float(-w[1]),
        diagnostics=FitDiagnostics(
            log_likelihood=log_likelihood,
            iterations=iterations,
            converged=converged,
            n_samples=n,
            l2=l2,
        ),
    )
    if not detection.monotone:
        logger.warning(f"拟合得到的 Ψ 随 τ 递增 (beta1={detection.beta1:.4g})，与小扰动更难被发现的假设不符")
    logger.info(f"检测函数拟合完成: {detection.descriptor()}, 迭代 {iterations} 次, loglik={log_likelihood:.4f}")
    return detection
