"""
随机扰动基线：在 eps 球内均匀采样，取距离最小的成功样本
"""
from typing import Optional, Tuple

import numpy as np

from src.attacks.base import AttackContext, BaseAttack
from src.core.errors import ConfigError
from src.core.models import AttackCandidate, AttackName, DistanceMetric, Observation, SuccessCriterion
from src.toy.predictor import Predictor
from src.utils.seeding import derive_rng


class RandomAttack(BaseAttack):
    """低效对手基线"""

    def __init__(self, steps: int = 100, seed: int = 0):
        super().__init__(AttackName.RANDOM.value)
        if steps < 0:
            raise ConfigError(f"random: steps 不能为负，收到 {steps}")
        self.steps = steps
        self.seed = seed

    def params(self, eps: float):
        return {"epsilon": float(eps), "steps": self.steps, "seed": self.seed}

    def perturb(self, ctx: AttackContext, eps: float) -> np.ndarray:
        if self.steps == 0:
            return ctx.x.copy()

        # 每个 (观测, epsilon) 使用独立子流，结果与执行顺序无关
        rng = derive_rng(self.seed, "attack", self.name, ctx.observation_id, float(eps))
        samples = ctx.x + rng.uniform(-eps, eps, (self.steps, ctx.x.shape[0]))
        samples = ctx.project_box(samples)

        predictions = ctx.predictor.predict_batch(samples)
        diffs = samples - ctx.x
        if ctx.metric == DistanceMetric.LINF:
            dists = np.max(np.abs(diffs), axis=1)
        else:
            dists = np.linalg.norm(diffs, axis=1)

        best_index = None
        for index in np.argsort(dists, kind="stable"):
            if ctx.is_success(int(predictions[index]), float(dists[index])):
                best_index = index
                break
        if best_index is None:
            return ctx.x.copy()
        return samples[best_index]


def random_attack(predictor: Predictor, observation: Observation, eps: float, steps: int = 100,
                  seed: int = 0, criterion: SuccessCriterion = SuccessCriterion.GROUND_TRUTH,
                  metric: DistanceMetric = DistanceMetric.LINF,
                  clip: Optional[Tuple[float, float]] = None) -> AttackCandidate:
    ctx = AttackContext.for_observation(predictor, observation, criterion, metric, clip)
    return RandomAttack(steps, seed).generate(ctx, eps)
