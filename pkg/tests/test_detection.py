"""
检测概率函数、拟合与模拟检测器测试
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.special import expit

from src.core.errors import ConfigError, DetectionFitError, InsufficientDataError
from src.core.models import DetectionSample
from src.detection.fitting import fit_logistic
from src.detection.functions import (
    EmpiricalAverageDetection, LogisticDetection, StepDetection, TableDetection, eval_detection
)
from src.detection.simulator import SimulatedDetector, simulate_detector


def _draw_samples(beta0, beta1, n, seed):
    rng = np.random.default_rng(seed)
    taus = rng.uniform(0.0, 0.3, n)
    undetected = rng.random(n) < expit(beta0 - beta1 * taus)
    return [DetectionSample(tau=max(float(t), 1e-9), undetected=int(u)) for t, u in zip(taus, undetected)]


def test_step_detection():
    """测试阶跃检测函数"""
    f = StepDetection(theta=0.5)
    assert eval_detection(f, 0.2) == 1.0
    assert eval_detection(f, 0.5) == 1.0
    assert eval_detection(f, 0.7) == 0.0


def test_logistic_detection_values():
    """测试逻辑检测函数取值"""
    assert eval_detection(LogisticDetection(beta0=0.0, beta1=0.0), 0.37) == 0.5
    assert eval_detection(LogisticDetection(beta0=5.0, beta1=40.0), 0.125) == pytest.approx(0.5)


def test_detection_rejects_infinite_and_negative_tau():
    """测试检测函数拒绝 inf、nan 与负 τ"""
    f = StepDetection(theta=0.5)
    for bad in (math.inf, math.nan, -0.1):
        with pytest.raises(ConfigError):
            f.evaluate(bad)


def test_table_detection_is_piecewise_constant():
    """测试检测表分段常数且必须单调"""
    f = TableDetection(breakpoints=(0.1, 0.2), values=(0.8, 0.3))
    assert f(0.05) == 1.0
    assert f(0.1) == 0.8
    assert f(0.25) == 0.3
    with pytest.raises(ValidationError):
        TableDetection(breakpoints=(0.1, 0.2), values=(0.3, 0.8))


def _random_table(rng):
    k = int(rng.integers(1, 8))
    breakpoints = np.cumsum(rng.uniform(0.01, 0.1, k))
    values = np.sort(rng.uniform(0.0, 1.0, k))[::-1]
    return TableDetection(breakpoints=tuple(breakpoints.tolist()), values=tuple(values.tolist()))


def test_detection_functions_are_non_increasing():
    """测试阶跃、逻辑与检测表在随机 τ 网格上单调不增"""
    rng = np.random.default_rng(18)
    for _ in range(200):
        functions = [
            StepDetection(theta=float(rng.uniform(0.0, 0.5))),
            LogisticDetection(beta0=float(rng.normal(0.0, 5.0)), beta1=float(rng.uniform(0.0, 100.0))),
            _random_table(rng),
        ]
        taus = np.sort(rng.uniform(0.0, 0.6, 50))
        for f in functions:
            values = f.evaluate_many(taus)
            assert np.all((values >= 0.0) & (values <= 1.0))
            assert np.all(np.diff(values) <= 0.0)
            np.testing.assert_allclose([f(float(t)) for t in taus], values, rtol=0, atol=1e-15)


def test_empirical_average_detection():
    """测试经验平均检测函数"""
    f = EmpiricalAverageDetection(pooled=(0.1, 0.2, 0.3, math.inf), n_observations=2, n_models=2)
    assert f(0.1) == 0.75
    assert f(0.3) == 0.25
    assert f.w_count(0.05) == 4
    np.testing.assert_allclose(f.evaluate_many([0.05, 0.1, 0.3]), [1.0, 0.75, 0.25])


def test_fit_recovers_logistic_curve():
    """测试拟合能恢复真实逻辑曲线"""
    f = fit_logistic(_draw_samples(5.0, 40.0, 500, seed=12))
    grid = np.linspace(0.0, 0.3, 61)
    error = np.mean(np.abs(f.evaluate_many(grid) - expit(5.0 - 40.0 * grid)))
    assert error <= 0.05
    assert f.diagnostics.converged
    assert f.diagnostics.iterations <= 100
    assert f.monotone


def test_fit_saturates_on_all_undetected():
    """测试全部未被发现时拟合曲线趋于 1"""
    samples = [DetectionSample(tau=t, undetected=1) for t in np.linspace(0.01, 0.3, 20)]
    f = fit_logistic(samples, l2=1e-6)
    assert np.all(f.evaluate_many(np.linspace(0.01, 0.3, 20)) >= 0.99)


def test_fit_is_invariant_to_duplication():
    """测试样本整体复制不改变拟合结果"""
    samples = _draw_samples(5.0, 40.0, 60, seed=3)
    once = fit_logistic(samples)
    twice = fit_logistic(samples + samples)
    assert once.beta0 == pytest.approx(twice.beta0, abs=1e-9)
    assert once.beta1 == pytest.approx(twice.beta1, abs=1e-9)


def test_fit_with_separated_samples_stays_finite():
    """测试完全可分样本在岭惩罚下参数有限"""
    samples = [DetectionSample(tau=t, undetected=int(t < 0.15)) for t in np.linspace(0.01, 0.3, 30)]
    f = fit_logistic(samples, l2=1e-6)
    assert math.isfinite(f.beta0) and math.isfinite(f.beta1)
    assert f(0.02) > 0.5 > f(0.29)


def test_fit_without_ridge_rejects_degenerate_labels():
    """测试无岭惩罚时单一标签拟合报错"""
    samples = [DetectionSample(tau=t, undetected=0) for t in (0.1, 0.2, 0.3)]
    with pytest.raises(DetectionFitError):
        fit_logistic(samples, l2=0.0)


def test_fit_needs_two_samples():
    """测试拟合至少需要两个样本"""
    with pytest.raises(InsufficientDataError):
        fit_logistic([DetectionSample(tau=0.1, undetected=1)])


def test_simulated_step_detector_is_deterministic_in_outcome():
    """测试阶跃模拟检测器的判定是确定的"""
    rng = np.random.default_rng(0)
    f = StepDetection(theta=0.2)
    assert not any(simulate_detector(f, 0.1, rng) for _ in range(100))
    assert all(simulate_detector(f, 0.3, rng) for _ in range(100))


def test_simulated_detector_detection_rate():
    """测试模拟检测器的检测频率接近 1 - Ψ"""
    detector = SimulatedDetector.from_seed(LogisticDetection(beta0=0.0, beta1=0.0), seed=21)
    detected = sum(detector.detect(0.1) for _ in range(10000))
    assert 0.48 <= detected / 10000 <= 0.52
    assert detector.calls == 10000


def test_simulated_detector_seed_reproducible():
    """测试模拟检测器由种子决定"""
    f = LogisticDetection(beta0=5.0, beta1=40.0)
    a = SimulatedDetector.from_seed(f, 4)
    b = SimulatedDetector.from_seed(f, 4)
    taus = np.linspace(0.01, 0.3, 50)
    assert [a.detect(t) for t in taus] == [b.detect(t) for t in taus]
