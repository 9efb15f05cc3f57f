#!/usr/bin/env python3
"""
pdam 演示脚本
在玩具规模上走完整条流水线：三个鲁棒性不同的模型 → 攻击 → 无检测器排名 → 自助法
"""
import sys
import tempfile
from pathlib import Path

# 添加项目根目录到Python路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from loguru import logger

from config.settings import settings
from src.core.models import (
    Architecture, AttackName, AttackSpec, DatasetKind, SuccessCriterion, SyntheticSpec, TrainingHyper
)
from src.detection.functions import StepDetection
from src.estimators.metrics import aps_summary
from src.estimators.risk import operational_risk, pdam_detector_free, pdam_surrogate
from src.estimators.summary import summary_table
from src.main import setup_logging
from src.managers.attack_manager import AttackManager, filter_initially_correct
from src.stats.bootstrap import BandMetric, bootstrap_band, default_n_grid
from src.storage.records import read_pooled, write_records
from src.storage.reports import ReportFormat, emit_report
from src.toy.datasets import generate_dataset
from src.toy.trainer import evaluate_accuracy, train_with_history

MODELS = [
    ("baseline", Architecture(kind="linear"), TrainingHyper(lr=0.05, epochs=3, seed=1)),
    ("mlp-small", Architecture(kind="mlp", hidden_sizes=(16,)), TrainingHyper(lr=0.1, epochs=60, seed=2)),
    ("mlp-wide", Architecture(kind="mlp", hidden_sizes=(32, 32), activation="tanh"),
     TrainingHyper(lr=0.1, epochs=120, l2=1e-3, seed=3)),
]


def demo_train(dataset):
    """训练三个模型"""
    print("=" * 60)
    print("1. 训练模型")
    print("=" * 60)
    predictors = []
    for model_id, architecture, hyper in MODELS:
        predictor, history = train_with_history(dataset, architecture, hyper, model_id)
        print(f"✓ {model_id:<10} {architecture.describe():<18} "
              f"loss {history[0]:.3f} -> {history[-1]:.3f}, accuracy {evaluate_accuracy(predictor, dataset):.3f}")
        predictors.append(predictor)
    return predictors


def demo_attack(dataset, predictors, workdir: Path):
    """攻击每个模型并写出记录文件"""
    print("\n" + "=" * 60)
    print("2. 攻击")
    print("=" * 60)
    specs = [
        AttackSpec(name=AttackName.FGSM, epsilon_grid=tuple(settings.EPSILON_GRID)),
        AttackSpec(name=AttackName.PGD, epsilon_grid=tuple(settings.EPSILON_GRID), steps=settings.PGD_STEPS),
        AttackSpec(name=AttackName.RANDOM, epsilon_grid=tuple(settings.EPSILON_GRID), steps=50, seed=7),
    ]
    manager = AttackManager(specs, SuccessCriterion.GROUND_TRUTH)
    print(f"攻击集合大小 |A| = {manager.attack_count}")

    # 所有模型共享同一样本
    sample = filter_initially_correct(dataset, predictors)
    print(f"初始分类正确的共享样本: {len(sample)}/{len(dataset)}")

    paths = []
    for predictor in predictors:
        _, outcome = manager.evaluate(predictor, sample)
        aps, excluded = aps_summary(outcome)
        path = workdir / f"{predictor.model_id}.records"
        write_records(outcome, path)
        paths.append(path)
        aps_text = "n/a" if aps is None else f"{aps:.4f}"
        print(f"✓ {predictor.model_id:<10} 成功 {outcome.finite_count}/{len(outcome)}, "
              f"APS {aps_text} (排除 {excluded})")
    return paths


def demo_estimate(paths):
    """从记录文件估计 P^dam"""
    print("\n" + "=" * 60)
    print("3. 估计")
    print("=" * 60)
    outcomes = read_pooled(paths)

    print("无检测器排名（P^dam 越小越好）：")
    for estimate in sorted(pdam_detector_free(outcomes), key=lambda e: e.pdam_hat):
        risk = operational_risk(estimate, c_dam=1000.0)
        print(f"  {estimate.model_id:<10} P^dam={estimate.pdam_hat:.4f}  风险(C=1000)={risk.risk:.1f}")

    step = StepDetection(theta=8 / 255)
    print(f"\n硬阈值检测 {step.descriptor()} 下的替代估计：")
    for o in outcomes:
        print(f"  {o.model_id:<10} P^dam={pdam_surrogate(o, step).pdam_hat:.4f}")

    print("\n汇总表：")
    rows = summary_table(outcomes, settings.TAUS)
    print(emit_report(rows, ReportFormat.TABLE))
    return outcomes


def demo_bootstrap(outcomes):
    """自助法看估计量随样本量的稳定性"""
    print("=" * 60)
    print("4. 自助法")
    print("=" * 60)
    n_grid = default_n_grid(20, 100, 40)
    for band in bootstrap_band(outcomes, BandMetric.PDAM_DETECTOR_FREE, n_grid, reps=30, seed=0):
        widths = ", ".join(f"n={p.n}: {p.p95 - p.p05:.3f}" for p in band.points)
        print(f"  {band.model_id:<10} 90% 区间宽度 {widths}")


def main():
    """主函数"""
    setup_logging("WARNING")
    try:
        dataset = generate_dataset(SyntheticSpec(kind=DatasetKind.TWO_MOONS, n=120, noise=0.15, seed=0))
        predictors = demo_train(dataset)
        with tempfile.TemporaryDirectory() as tmp:
            paths = demo_attack(dataset, predictors, Path(tmp))
            outcomes = demo_estimate(paths)
        demo_bootstrap(outcomes)
        print("\n演示完成")
    except Exception as e:
        logger.error(f"演示失败: {str(e)}")
        raise


if __name__ == "__main__":
    main()
