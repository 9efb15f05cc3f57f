"""
攻击基础接口
"""
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from src.core.errors import ConfigError
from src.core.metric import distance, evaluate_success
from src.core.models import AttackCandidate, DistanceMetric, Observation, SuccessCriterion
from src.toy.predictor import Predictor


class AttackContext(BaseModel):
    """单个观测上的攻击上下文"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    predictor: Predictor
    observation_id: str
    x: np.ndarray
    ground_truth: int
    original_prediction: int
    criterion: SuccessCriterion = SuccessCriterion.GROUND_TRUTH
    metric: DistanceMetric = DistanceMetric.LINF
    clip: Optional[Tuple[float, float]] = None

    @field_validator("x")
    @classmethod
    def _finite_features(cls, value: np.ndarray) -> np.ndarray:
        if value.ndim != 1 or not np.all(np.isfinite(value)):
            raise ValueError("x 必须为有限的一维特征向量")
        return value

    @classmethod
    def for_observation(cls, predictor: Predictor, observation: Observation,
                        criterion: SuccessCriterion = SuccessCriterion.GROUND_TRUTH,
                        metric: DistanceMetric = DistanceMetric.LINF,
                        clip: Optional[Tuple[float, float]] = None) -> "AttackContext":
        x = observation.as_array()
        return cls(
            predictor=predictor,
            observation_id=observation.id,
            x=x,
            ground_truth=observation.label,
            original_prediction=predictor.predict(x),
            criterion=SuccessCriterion(criterion),
            metric=DistanceMetric(metric),
            clip=clip,
        )

    @property
    def loss_label(self) -> int:
        """攻击要抬高损失的标签：真实标签或原始预测"""
        if self.criterion == SuccessCriterion.PREDICTION_CHANGE:
            return self.original_prediction
        return self.ground_truth

    def project_box(self, x_prime: np.ndarray) -> np.ndarray:
        if self.clip is None:
            return x_prime
        return np.clip(x_prime, self.clip[0], self.clip[1])

    def is_success(self, prediction: int, dist: float) -> bool:
        # 未改变输入的候选不算成功
        if dist <= 0.0:
            return False
        return evaluate_success(self.criterion, self.original_prediction, self.ground_truth, prediction)


class BaseAttack(ABC):
    """攻击基础类"""

    def __init__(self, name: str):
        self.name = name

    @abstractmethod
    def perturb(self, ctx: AttackContext, eps: float) -> np.ndarray:
        """
        生成扰动后的输入

        Args:
            ctx: 攻击上下文
            eps: 扰动预算

        Returns:
            x'
        """
        pass

    def params(self, eps: float) -> Dict[str, Any]:
        """候选中记录的攻击参数"""
        return {"epsilon": float(eps)}

    def validate(self, eps: float):
        if not eps > 0 or not np.isfinite(eps):
            raise ConfigError(f"{self.name}: epsilon 必须为正的有限值，收到 {eps}")

    def generate(self, ctx: AttackContext, eps: float) -> AttackCandidate:
        """执行攻击并按判据评估，得到候选"""
        self.validate(eps)
        x_prime = self.perturb(ctx, eps)
        dist = distance(ctx.x, x_prime, ctx.metric)
        prediction = ctx.predictor.predict(x_prime)
        return AttackCandidate(
            observation_id=ctx.observation_id,
            attack_name=self.name,
            attack_params=self.params(eps),
            perturbed_features=tuple(x_prime.tolist()),
            distance=dist,
            success=ctx.is_success(prediction, dist),
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name})"
