"""
攻击管理器
负责实例化攻击集合 A、生成候选、并按攻击策略归约为最小成功扰动
"""
import asyncio
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from src.attacks.base import AttackContext, BaseAttack
from src.attacks.fgsm import FGSMAttack
from src.attacks.pgd import PGDAttack
from src.attacks.random_search import RandomAttack
from src.core.errors import AttackError, ConfigError, PdamError
from src.core.models import (
    AttackCandidate, AttackName, AttackOutcomeSet, AttackSpec, Dataset,
    DistanceMetric, PerturbationRecord, SuccessCriterion
)
from src.toy.predictor import Predictor


def build_attack(spec: AttackSpec) -> BaseAttack:
    """由配置构造攻击实现"""
    if spec.name == AttackName.FGSM:
        return FGSMAttack()
    if spec.name == AttackName.PGD:
        return PGDAttack(spec.steps, spec.step_size)
    if spec.name == AttackName.RANDOM:
        return RandomAttack(spec.steps, spec.seed)
    raise ConfigError(f"不支持的攻击类型: {spec.name}")


def instantiate_attacks(specs: Sequence[AttackSpec]) -> List[Tuple[BaseAttack, float]]:
    """展开为 |A| = sum(len(epsilon_grid)) 个 (攻击, epsilon) 实例"""
    instances = []
    for spec in specs:
        attack = build_attack(spec)
        instances.extend((attack, eps) for eps in spec.epsilon_grid)
    return instances


def filter_initially_correct(dataset: Dataset, predictor: Union[Predictor, Sequence[Predictor]]) -> Dataset:
    """只保留模型在未扰动时预测正确的观测；给出多个模型时要求全部正确，便于汇总时共享样本"""
    predictors = [predictor] if isinstance(predictor, Predictor) else list(predictor)
    if len(dataset) == 0 or not predictors:
        return dataset
    X = dataset.features_matrix()
    labels = dataset.labels()
    correct = np.ones(len(dataset), dtype=bool)
    for p in predictors:
        correct &= p.predict_batch(X) == labels
    keep = [obs.id for obs, ok in zip(dataset.observations, correct) if ok]
    dropped = len(dataset) - len(keep)
    if dropped:
        names = ",".join(p.model_id for p in predictors)
        logger.info(f"模型 {names}: 过滤掉 {dropped} 个初始即分类错误的观测")
    return dataset.subset(keep)


def best_candidates(candidates: Iterable[AttackCandidate]) -> Dict[str, AttackCandidate]:
    """每个观测的最小成功候选，并列按 (距离, 攻击名, epsilon) 决定"""
    best: Dict[str, AttackCandidate] = {}
    for candidate in candidates:
        if not candidate.success:
            continue
        current = best.get(candidate.observation_id)
        if current is None or candidate.tie_key() < current.tie_key():
            best[candidate.observation_id] = candidate
    return best


class AttackManager:
    """攻击管理器"""

    def __init__(self, specs: Sequence[AttackSpec],
                 criterion: SuccessCriterion = SuccessCriterion.GROUND_TRUTH,
                 metric: DistanceMetric = DistanceMetric.LINF,
                 clip: Optional[Tuple[float, float]] = None,
                 max_workers: int = 4):
        if not specs:
            raise ConfigError("攻击集合为空，至少需要一个攻击")
        self.specs = list(specs)
        self.criterion = SuccessCriterion(criterion)
        self.metric = DistanceMetric(metric)
        self.clip = clip
        self.max_workers = max(1, max_workers)
        self.attacks = instantiate_attacks(self.specs)

        logger.debug(f"攻击集合实例化完成: |A|={len(self.attacks)}")

    @property
    def attack_count(self) -> int:
        return len(self.attacks)

    def _attack_observations(self, predictor: Predictor, observations) -> List[AttackCandidate]:
        candidates = []
        for observation in observations:
            ctx = AttackContext.for_observation(predictor, observation, self.criterion, self.metric, self.clip)
            for attack, eps in self.attacks:
                try:
                    candidates.append(attack.generate(ctx, eps))
                except AttackError:
                    raise
                except (PdamError, ArithmeticError, ValueError) as e:
                    logger.error(f"攻击失败: observation={observation.id}, attack={attack.name}, eps={eps}: {str(e)}")
                    raise AttackError(str(e), observation.id, attack.name) from e
        return candidates

    def run(self, predictor: Predictor, dataset: Dataset) -> List[AttackCandidate]:
        """
        生成候选：每个 (观测, 攻击实例) 一个

        Args:
            predictor: 被攻击的模型
            dataset: 观测样本

        Returns:
            候选列表，按观测顺序、再按攻击实例顺序排列
        """
        candidates = self._attack_observations(predictor, dataset.observations)
        logger.info(f"模型 {predictor.model_id}: 生成 {len(candidates)} 个候选 "
                    f"({len(dataset)} 个观测 x {self.attack_count} 个攻击)")
        return candidates

    async def run_async(self, predictor: Predictor, dataset: Dataset,
                        chunk_size: Optional[int] = None) -> List[AttackCandidate]:
        """并发版本：按观测分块放入工作线程，结果按提交顺序拼接，与 run 完全一致"""
        observations = list(dataset.observations)
        if not observations:
            return []
        if chunk_size is None:
            chunk_size = max(1, math.ceil(len(observations) / self.max_workers))
        chunks = [observations[i:i + chunk_size] for i in range(0, len(observations), chunk_size)]

        results = await asyncio.gather(
            *(asyncio.to_thread(self._attack_observations, predictor, chunk) for chunk in chunks)
        )
        candidates = [candidate for chunk_result in results for candidate in chunk_result]
        logger.info(f"模型 {predictor.model_id}: 并发生成 {len(candidates)} 个候选 ({len(chunks)} 个分块)")
        return candidates

    def reduce(self, candidates: Iterable[AttackCandidate], dataset: Dataset,
               model_id: str) -> AttackOutcomeSet:
        return attack_strategy_reduce(candidates, dataset, model_id, self.metric)

    def evaluate(self, predictor: Predictor, dataset: Dataset) -> Tuple[List[AttackCandidate], AttackOutcomeSet]:
        """生成候选并归约"""
        candidates = self.run(predictor, dataset)
        return candidates, self.reduce(candidates, dataset, predictor.model_id)


def run_attack_set(predictor: Predictor, dataset: Dataset, specs: Sequence[AttackSpec],
                   criterion: SuccessCriterion = SuccessCriterion.GROUND_TRUTH,
                   metric: DistanceMetric = DistanceMetric.LINF,
                   clip: Optional[Tuple[float, float]] = None) -> List[AttackCandidate]:
    return AttackManager(specs, criterion, metric, clip).run(predictor, dataset)


def attack_strategy_reduce(candidates: Iterable[AttackCandidate], dataset: Dataset, model_id: str,
                           metric: DistanceMetric = DistanceMetric.LINF) -> AttackOutcomeSet:
    """
    攻击策略：每个观测取成功候选中的最小距离，否则为 inf

    Args:
        candidates: 候选列表
        dataset: 观测样本
        model_id: 模型标识
        metric: 候选距离所用的度量

    Returns:
        每个观测恰有一条记录的结果集
    """
    candidates = list(candidates)
    known = set(dataset.ids())
    for candidate in candidates:
        if candidate.observation_id not in known:
            raise ConfigError(f"候选引用了未知观测: {candidate.observation_id}")

    best = best_candidates(candidates)
    records = []
    for observation in dataset.observations:
        witness = best.get(observation.id)
        d_a = witness.distance if witness is not None else math.inf
        records.append(PerturbationRecord(observation_id=observation.id, model_id=model_id, d_a=d_a))

    outcome = AttackOutcomeSet(model_id=model_id, metric=metric, records=tuple(records))
    logger.debug(f"模型 {model_id}: 攻击成功 {outcome.finite_count}/{len(outcome)}")
    return outcome
