"""
PGD：迭代符号梯度上升，每步投影回 Linf 球
"""
from typing import Optional, Tuple, Union

import numpy as np

from src.attacks.base import AttackContext, BaseAttack
from src.core.errors import ConfigError
from src.core.models import AttackCandidate, AttackName, DistanceMetric, Observation, SuccessCriterion
from src.toy.predictor import Predictor


def resolve_step_size(step_size: Union[float, str], eps: float, steps: int) -> float:
    """'auto' 步长取 2.5 * eps / steps"""
    if step_size == "auto":
        return 2.5 * eps / steps
    return float(step_size)


class PGDAttack(BaseAttack):
    """从 x 出发（不随机重启）的 Linf PGD，返回最后一次迭代"""

    def __init__(self, steps: int = 20, step_size: Union[float, str] = "auto"):
        super().__init__(AttackName.PGD.value)
        if steps < 1:
            raise ConfigError(f"pgd: steps 必须 >= 1，收到 {steps}")
        self.steps = steps
        self.step_size = step_size

    def params(self, eps: float):
        return {
            "epsilon": float(eps),
            "steps": self.steps,
            "step_size": resolve_step_size(self.step_size, eps, self.steps),
        }

    def perturb(self, ctx: AttackContext, eps: float) -> np.ndarray:
        alpha = resolve_step_size(self.step_size, eps, self.steps)
        lower, upper = ctx.x - eps, ctx.x + eps
        x_adv = ctx.x.copy()
        for _ in range(self.steps):
            grad = ctx.predictor.input_gradient(x_adv, ctx.loss_label)
            x_adv = x_adv + alpha * np.sign(grad)
            x_adv = np.minimum(np.maximum(x_adv, lower), upper)
            x_adv = ctx.project_box(x_adv)
        return x_adv


def pgd(predictor: Predictor, observation: Observation, eps: float, steps: int = 20,
        step_size: Union[float, str] = "auto",
        criterion: SuccessCriterion = SuccessCriterion.GROUND_TRUTH,
        metric: DistanceMetric = DistanceMetric.LINF,
        clip: Optional[Tuple[float, float]] = None) -> AttackCandidate:
    ctx = AttackContext.for_observation(predictor, observation, criterion, metric, clip)
    return PGDAttack(steps, step_size).generate(ctx, eps)
