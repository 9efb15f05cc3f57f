"""
FGSM：单步符号梯度攻击
"""
from typing import Optional, Tuple

import numpy as np

from src.attacks.base import AttackContext, BaseAttack
from src.core.models import AttackCandidate, AttackName, DistanceMetric, Observation, SuccessCriterion
from src.toy.predictor import Predictor


class FGSMAttack(BaseAttack):
    """x' = x + eps * sign(grad_x loss)"""

    def __init__(self):
        super().__init__(AttackName.FGSM.value)

    def perturb(self, ctx: AttackContext, eps: float) -> np.ndarray:
        grad = ctx.predictor.input_gradient(ctx.x, ctx.loss_label)
        return ctx.project_box(ctx.x + eps * np.sign(grad))


def fgsm(predictor: Predictor, observation: Observation, eps: float,
         criterion: SuccessCriterion = SuccessCriterion.GROUND_TRUTH,
         metric: DistanceMetric = DistanceMetric.LINF,
         clip: Optional[Tuple[float, float]] = None) -> AttackCandidate:
    ctx = AttackContext.for_observation(predictor, observation, criterion, metric, clip)
    return FGSMAttack().generate(ctx, eps)
