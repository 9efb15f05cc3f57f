"""
自助法分位带测试
"""
import math

import numpy as np
import pytest

from src.core.errors import ConfigError, InsufficientDataError
from src.core.models import AttackOutcomeSet
from src.detection.functions import LogisticDetection, StepDetection
from src.stats.bootstrap import BandMetric, bootstrap_band, default_n_grid, percentile, resample_means


def _uniform_outcome(model_id="m", n=100, seed=0):
    rng = np.random.default_rng(seed)
    return AttackOutcomeSet.from_distances(model_id, rng.uniform(0.01, 1.0, n))


@pytest.fixture(scope="module")
def paired_pool():
    """两个模型在同一批 2000 个观测上的结果，约一成攻击失败"""
    rng = np.random.default_rng(21)
    outcomes = []
    for model_id, scale in (("A", 0.2), ("B", 0.3)):
        d = rng.uniform(0.001, scale, 2000)
        d[rng.random(2000) < 0.1] = math.inf
        outcomes.append(AttackOutcomeSet.from_distances(model_id, d.tolist()))
    return outcomes


def test_percentile_nearest_rank():
    """测试最近秩分位数"""
    assert percentile([1, 2, 3, 4], 0.5) == 2
    assert percentile([7], 0.05) == 7
    assert percentile([7], 0.95) == 7
    assert percentile([3, 1, 2], 1.0) == 3
    assert percentile([3, 1, 2], 0.0) == 1
    # 0.95 * 20 = 19，浮点误差不能把秩推到 20
    assert percentile(list(range(1, 21)), 0.95) == 19


def test_percentile_rejects_bad_input():
    """测试分位数拒绝空输入和越界分位"""
    with pytest.raises(InsufficientDataError):
        percentile([], 0.5)
    with pytest.raises(ConfigError):
        percentile([1.0], 1.5)


def test_default_grid_has_ten_points():
    """测试默认样本量网格"""
    assert default_n_grid() == [20, 40, 60, 80, 100, 120, 140, 160, 180, 200]


def test_constant_metric_gives_degenerate_band():
    """测试常数指标的分位带退化为一点"""
    o = AttackOutcomeSet.from_distances("flat", [0.2] * 30)
    (band,) = bootstrap_band(o, BandMetric.MPS, [5, 10], reps=20, seed=1)
    for point in band.points:
        assert point.p05 == point.p50 == point.p95 == 0.2
        assert point.excluded == 0
        assert band.width_at(point.n) == 0.0


def test_band_narrows_with_sample_size():
    """测试 APS 分位带随样本量增大而变窄"""
    (band,) = bootstrap_band(_uniform_outcome(), BandMetric.APS, default_n_grid(), reps=200, seed=5)
    assert band.width_at(200) <= band.width_at(20)
    assert band.n_grid == tuple(default_n_grid())
    assert len(band.points) == 10


def test_detector_free_band_narrows_strictly(paired_pool):
    """测试 reps=50 时无检测器 P^dam 分位带在 n=200 严格窄于 n=20，且同种子可复现"""
    bands = bootstrap_band(paired_pool, BandMetric.PDAM_DETECTOR_FREE, default_n_grid(), reps=50, seed=7)
    again = bootstrap_band(paired_pool, BandMetric.PDAM_DETECTOR_FREE, default_n_grid(), reps=50, seed=7)
    assert bands == again
    for band in bands:
        assert band.width_at(200) < band.width_at(20)


def test_mean_mps_shrinks_while_pdam_band_narrows(paired_pool):
    """测试 MPS 均值随样本量增大而下降，同时无检测器 P^dam 分位带变窄"""
    grid = [20, 50, 100, 200]
    means = resample_means(paired_pool, BandMetric.MPS, grid, reps=200, seed=8)
    assert list(means) == ["A", "B"]
    for values in means.values():
        assert all(b <= a for a, b in zip(values, values[1:]))
        assert values[-1] < values[0]

    bands = bootstrap_band(paired_pool, BandMetric.PDAM_DETECTOR_FREE, grid, reps=200, seed=8)
    for band in bands:
        assert band.width_at(200) < band.width_at(20)


def test_resample_means_uses_band_resamples():
    """测试均值与分位带来自同一组重采样"""
    o = AttackOutcomeSet.from_distances("flat", [0.2] * 30)
    assert resample_means(o, BandMetric.MPS, [5, 10], reps=10, seed=1) == {"flat": [0.2, 0.2]}
    robust = AttackOutcomeSet.from_distances("robust", [math.inf] * 5)
    assert resample_means(robust, BandMetric.MPS, [3], reps=4, seed=0) == {"robust": [None]}


def test_same_seed_is_reproducible():
    """测试相同种子得到相同分位带"""
    o = _uniform_outcome()
    a = bootstrap_band(o, "asr", [10, 20], reps=30, seed=9, tau=0.5)
    b = bootstrap_band(o, "asr", [10, 20], reps=30, seed=9, tau=0.5)
    assert a == b
    assert a[0].metric_name == "asr(0.5)"


def test_surrogate_label_names_detection():
    """测试不同检测函数的替代估计分位带带有不同的指标名"""
    o = _uniform_outcome(n=30)
    (step,) = bootstrap_band(o, BandMetric.PDAM_SURROGATE, [10], reps=5, seed=0,
                             detection=StepDetection(theta=0.5))
    (logistic,) = bootstrap_band(o, BandMetric.PDAM_SURROGATE, [10], reps=5, seed=0,
                                 detection=LogisticDetection(beta0=5.0, beta1=40.0))
    assert step.metric_name == "pdam-surrogate(step:0.5)"
    assert logistic.metric_name == "pdam-surrogate(logistic:5,40)"


def test_reps_must_be_at_least_two():
    """测试 reps 小于 2 时报配置错误"""
    with pytest.raises(ConfigError):
        bootstrap_band(_uniform_outcome(), BandMetric.MPS, [10], reps=1, seed=0)


def test_grid_must_be_strictly_increasing():
    """测试样本量网格必须严格递增且为正"""
    with pytest.raises(ConfigError):
        bootstrap_band(_uniform_outcome(), BandMetric.MPS, [20, 20], reps=5, seed=0)
    with pytest.raises(ConfigError):
        bootstrap_band(_uniform_outcome(), BandMetric.MPS, [0, 10], reps=5, seed=0)


def test_metric_arguments_are_required():
    """测试替代估计需要检测函数、ASR 需要阈值"""
    with pytest.raises(ConfigError):
        bootstrap_band(_uniform_outcome(), BandMetric.PDAM_SURROGATE, [10], reps=5, seed=0)
    with pytest.raises(ConfigError):
        bootstrap_band(_uniform_outcome(), BandMetric.ASR, [10], reps=5, seed=0)


def test_undefined_resamples_are_excluded():
    """测试指标无定义的重采样被排除并计数"""
    o = AttackOutcomeSet.from_distances("sparse", [0.1] + [math.inf] * 19)
    (band,) = bootstrap_band(o, BandMetric.APS, [1, 2], reps=50, seed=2)
    first = band.points[0]
    assert first.excluded > 0
    assert first.p50 is None or first.p50 == pytest.approx(0.1)


def test_all_infinite_sample_has_empty_points():
    """测试全部攻击失败时分位数为空"""
    o = AttackOutcomeSet.from_distances("robust", [math.inf] * 5)
    (band,) = bootstrap_band(o, BandMetric.MPS, [3], reps=4, seed=0)
    assert band.points[0].p05 is None
    assert band.points[0].excluded == 4
    assert band.width_at(3) is None
    with pytest.raises(KeyError):
        band.width_at(4)


def test_detector_free_band_covers_every_model(micro_pool):
    """测试无检测器分位带为每个模型各给一条"""
    bands = bootstrap_band(micro_pool, BandMetric.PDAM_DETECTOR_FREE, [2, 4], reps=25, seed=3)
    assert [b.model_id for b in bands] == ["M1", "M2"]
    for band in bands:
        for point in band.points:
            assert 0.0 <= point.p05 <= point.p95 <= 1.0


def test_surrogate_band_with_step_detection():
    """测试阶跃检测函数下替代估计分位带与 ASR 分位带一致"""
    o = _uniform_outcome(n=50)
    (band,) = bootstrap_band(o, BandMetric.PDAM_SURROGATE, [25, 50], reps=20, seed=1,
                             detection=StepDetection(theta=0.5))
    (asr_band,) = bootstrap_band(o, BandMetric.ASR, [25, 50], reps=20, seed=1, tau=0.5)
    assert [p.p50 for p in band.points] == [p.p50 for p in asr_band.points]
