"""
攻击引擎测试
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.attacks.base import AttackContext
from src.attacks.fgsm import FGSMAttack, fgsm
from src.attacks.pgd import PGDAttack, pgd
from src.attacks.random_search import random_attack
from src.core.errors import ConfigError
from src.core.models import (
    Architecture, AttackCandidate, AttackName, AttackSpec, Dataset, SuccessCriterion
)
from src.managers.attack_manager import (
    AttackManager, attack_strategy_reduce, best_candidates, filter_initially_correct, run_attack_set
)
from src.toy.predictor import Predictor, parameter_count
from tests.helpers import linear_model, single_observation

EIGHT_EPS = tuple(k / 255 for k in (1, 2, 4, 8, 16, 32, 64, 128))


def _candidate(observation_id, distance, success=True, name="fgsm", eps=0.1):
    return AttackCandidate(observation_id=observation_id, attack_name=name, attack_params={"epsilon": eps},
                           perturbed_features=(0.0,), distance=distance, success=success)


def test_fgsm_flips_one_dimensional_model(flip_predictor):
    """测试 FGSM 翻转一维模型的预测"""
    observation = single_observation([-0.1], 0).observations[0]
    candidate = fgsm(flip_predictor, observation, 0.2)
    assert candidate.perturbed_features[0] == pytest.approx(0.1)
    assert candidate.success is True
    assert candidate.distance == pytest.approx(0.2)


def test_fgsm_zero_gradient_is_no_op():
    """测试梯度为零时 FGSM 不改变输入"""
    arch = Architecture(kind="linear")
    zero = Predictor("zero", arch, np.zeros(parameter_count(arch, 2, 2)), num_classes=2, dim=2)
    observation = single_observation([0.3, -0.4], 0).observations[0]
    candidate = fgsm(zero, observation, 0.5, criterion=SuccessCriterion.PREDICTION_CHANGE)
    assert candidate.perturbed_features == (0.3, -0.4)
    assert candidate.success is False
    assert candidate.distance == 0.0


def test_fgsm_stays_within_budget(blob_dataset, blob_model):
    """测试 FGSM 扰动不超出预算"""
    for observation in blob_dataset.observations[:50]:
        candidate = fgsm(blob_model, observation, 0.3)
        assert candidate.distance <= 0.3 + 1e-12


def test_clip_bounds_perturbed_features(flip_predictor):
    """测试扰动后的特征被截断到取值范围内"""
    observation = single_observation([-0.1], 0).observations[0]
    candidate = fgsm(flip_predictor, observation, 0.5, clip=(-1.0, 0.2))
    assert candidate.perturbed_features[0] == pytest.approx(0.2)


def test_attack_context_is_frozen(flip_predictor):
    """测试攻击上下文不可修改，并拒绝非有限特征"""
    observation = single_observation([-0.1], 0).observations[0]
    ctx = AttackContext.for_observation(flip_predictor, observation, clip=(-1.0, 1.0))
    assert ctx.original_prediction == 0
    assert ctx.loss_label == 0
    with pytest.raises(ValidationError):
        ctx.observation_id = "other"
    with pytest.raises(ValidationError):
        AttackContext(predictor=flip_predictor, observation_id="bad", x=np.array([math.nan]),
                      ground_truth=0, original_prediction=0)


def test_pgd_single_step_equals_fgsm(blob_dataset, blob_model):
    """测试单步且步长为 ε 的 PGD 与 FGSM 相同"""
    for observation in blob_dataset.observations[:30]:
        ctx = AttackContext.for_observation(blob_model, observation)
        eps = 0.5
        np.testing.assert_allclose(PGDAttack(steps=1, step_size=eps).perturb(ctx, eps),
                                   FGSMAttack().perturb(ctx, eps))


def test_pgd_never_leaves_the_ball(blob_dataset):
    """测试 PGD 的迭代始终在 ε 球内"""
    rng = np.random.default_rng(0)
    arch = Architecture(kind="mlp", hidden_sizes=(8,))
    predictor = Predictor("mlp", arch, rng.normal(size=parameter_count(arch, 2, 2)), num_classes=2, dim=2)
    for observation in blob_dataset.observations[:20]:
        candidate = pgd(predictor, observation, 0.25, steps=20, step_size=0.1)
        assert candidate.distance <= 0.25 + 1e-12


def test_pgd_success_rate_dominates_fgsm(blob_dataset, blob_model):
    """测试同一 ε 下 PGD 的成功数不少于 FGSM"""
    for eps in (0.5, 1.0, 2.0):
        fgsm_hits = sum(fgsm(blob_model, o, eps).success for o in blob_dataset.observations)
        pgd_hits = sum(pgd(blob_model, o, eps, steps=20).success for o in blob_dataset.observations)
        assert pgd_hits >= fgsm_hits


def test_random_attack_zero_steps(flip_predictor):
    """测试零步随机攻击不产生成功候选"""
    observation = single_observation([-0.1], 0).observations[0]
    candidate = random_attack(flip_predictor, observation, 0.2, steps=0)
    assert candidate.success is False
    assert candidate.perturbed_features == (-0.1,)


def test_random_attack_is_deterministic(flip_predictor):
    """测试随机攻击由种子决定"""
    observation = single_observation([-0.1], 0).observations[0]
    assert random_attack(flip_predictor, observation, 0.2, seed=4) == random_attack(flip_predictor, observation, 0.2, seed=4)


def test_random_attack_must_cross_boundary(flip_predictor):
    """测试随机攻击只有越过决策边界才算成功"""
    observation = single_observation([-0.1], 0).observations[0]
    candidate = random_attack(flip_predictor, observation, 0.2, steps=1000, seed=1)
    assert candidate.success is True
    assert candidate.distance >= 0.1


def test_default_grid_candidate_count(blob_dataset, blob_model):
    """测试默认攻击集合的候选数量"""
    specs = [AttackSpec(name=name, epsilon_grid=EIGHT_EPS, steps=5) for name in AttackName]
    manager = AttackManager(specs)
    assert manager.attack_count == 24
    assert len(manager.run(blob_model, blob_dataset)) == 24 * 200


def test_empty_attack_set_is_rejected():
    """测试空攻击集合报配置错误"""
    with pytest.raises(ConfigError):
        AttackManager([])


def test_empty_dataset_gives_no_candidates(blob_model):
    """测试空数据集不产生候选"""
    empty = Dataset(observations=(), num_classes=2, dim=2)
    specs = [AttackSpec(name=AttackName.FGSM, epsilon_grid=(0.1,))]
    assert run_attack_set(blob_model, empty, specs) == []


def test_constant_classifier_never_succeeds_under_prediction_change(blob_dataset):
    """测试常数分类器在预测改变判据下永不被攻破"""
    arch = Architecture(kind="linear")
    zero = Predictor("zero", arch, np.zeros(parameter_count(arch, 2, 2)), num_classes=2, dim=2)
    specs = [AttackSpec(name=name, epsilon_grid=(0.5, 1.0), steps=10) for name in AttackName]
    candidates = run_attack_set(zero, blob_dataset, specs, SuccessCriterion.PREDICTION_CHANGE)
    assert not any(c.success for c in candidates)


def test_reduce_takes_smallest_success():
    """测试归约取成功候选中的最小距离"""
    dataset = single_observation([0.0], 0)
    candidates = [_candidate("x0", 0.3), _candidate("x0", 0.1, name="pgd"), _candidate("x0", 0.2),
                  _candidate("x0", 0.05, success=False)]
    outcome = attack_strategy_reduce(candidates, dataset, "m")
    assert outcome.distance_of("x0") == 0.1


def test_reduce_without_success_is_infinite():
    """测试没有成功候选时距离为 inf"""
    dataset = single_observation([0.0], 0)
    outcome = attack_strategy_reduce([_candidate("x0", 0.1, success=False)], dataset, "m")
    assert outcome.distance_of("x0") == math.inf
    assert len(outcome) == 1


def test_reduce_rejects_unknown_observation():
    """测试归约拒绝数据集之外的观测"""
    with pytest.raises(ConfigError):
        attack_strategy_reduce([_candidate("nope", 0.1)], single_observation([0.0], 0), "m")


def test_best_candidate_ties_break_by_name():
    """测试距离并列时按攻击名决胜"""
    best = best_candidates([_candidate("x0", 0.1, name="pgd"), _candidate("x0", 0.1, name="fgsm")])
    assert best["x0"].attack_name == "fgsm"


def test_enlarging_attack_set_never_increases_distance(blob_dataset, blob_model):
    """测试扩大攻击集合不会增大任何 d_A"""
    small = AttackManager([AttackSpec(name=AttackName.FGSM, epsilon_grid=EIGHT_EPS)])
    large = AttackManager([AttackSpec(name=AttackName.FGSM, epsilon_grid=EIGHT_EPS),
                           AttackSpec(name=AttackName.PGD, epsilon_grid=EIGHT_EPS, steps=10)])
    _, few = small.evaluate(blob_model, blob_dataset)
    _, many = large.evaluate(blob_model, blob_dataset)
    for observation_id in blob_dataset.ids():
        assert many.distance_of(observation_id) <= few.distance_of(observation_id)


def test_filter_initially_correct_drops_misclassified():
    """测试过滤掉初始分类错误的观测"""
    predictor = linear_model([1.0])
    dataset = Dataset(observations=single_observation([0.5], 1, "a").observations
                      + single_observation([0.5], 0, "b").observations, num_classes=2, dim=1)
    kept = filter_initially_correct(dataset, predictor)
    assert kept.ids() == ["a"]
    assert filter_initially_correct(dataset, [predictor, linear_model([-1.0])]).ids() == []


@pytest.mark.asyncio
async def test_async_run_matches_sequential(blob_dataset, blob_model):
    """测试并发执行与顺序执行结果一致"""
    specs = [AttackSpec(name=name, epsilon_grid=(0.5, 1.0), steps=5, seed=2) for name in AttackName]
    manager = AttackManager(specs, max_workers=4)
    sequential = manager.run(blob_model, blob_dataset)
    concurrent = await manager.run_async(blob_model, blob_dataset, chunk_size=17)
    assert concurrent == sequential
