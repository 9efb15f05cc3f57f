"""
检测概率函数 Ψ
Ψ(τ) 是扰动大小为 τ 的对抗样本【未被】发现的概率，只依赖 τ，与模型无关
"""
import math
from abc import ABC, abstractmethod
from bisect import bisect_right
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import expit

from src.core.errors import ConfigError


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if math.isnan(tau) or math.isinf(tau):
        raise ConfigError(f"τ 必须为有限值（未成功的记录应在求和前排除），收到 {tau}")
    if tau < 0:
        raise ConfigError(f"τ 不能为负，收到 {tau}")
    return tau


def _check_taus(taus) -> np.ndarray:
    taus = np.asarray(taus, dtype=np.float64)
    if not np.all(np.isfinite(taus)):
        raise ConfigError("τ 必须为有限值（未成功的记录应在求和前排除）")
    if np.any(taus < 0):
        raise ConfigError("τ 不能为负")
    return taus


class DetectionFunction(BaseModel, ABC):
    """检测概率函数基类"""

    model_config = ConfigDict(frozen=True)

    kind: str

    @abstractmethod
    def _value(self, tau: float) -> float:
        pass

    def _values(self, taus: np.ndarray) -> np.ndarray:
        return np.asarray([self._value(float(t)) for t in taus], dtype=np.float64)

    @abstractmethod
    def descriptor(self) -> str:
        """用于报告的简短描述"""
        pass

    @property
    def monotone(self) -> bool:
        """是否在 τ 上单调不增"""
        return True

    def evaluate(self, tau: float) -> float:
        """Ψ(τ)，取值于 [0, 1]"""
        return self._value(_check_tau(tau))

    def evaluate_many(self, taus) -> np.ndarray:
        return self._values(_check_taus(taus))

    def __call__(self, tau: float) -> float:
        return self.evaluate(tau)


class StepDetection(DetectionFunction):
    """硬阈值：τ <= θ 时必定不被发现，否则必定被发现"""

    kind: Literal["step"] = "step"
    theta: float = Field(ge=0.0)

    def _value(self, tau: float) -> float:
        return 1.0 if tau <= self.theta else 0.0

    def _values(self, taus: np.ndarray) -> np.ndarray:
        return (taus <= self.theta).astype(np.float64)

    def descriptor(self) -> str:
        return f"step:{self.theta:.6g}"


class FitDiagnostics(BaseModel):
    """逻辑回归拟合诊断信息"""

    model_config = ConfigDict(frozen=True)

    log_likelihood: float
    iterations: int
    converged: bool
    n_samples: int
    l2: float


class LogisticDetection(DetectionFunction):
    """Ψ(τ) = σ(beta0 - beta1 * τ)"""

    kind: Literal["logistic"] = "logistic"
    beta0: float
    beta1: float
    diagnostics: Optional[FitDiagnostics] = None

    @field_validator("beta0", "beta1")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("逻辑回归参数必须为有限值")
        return value

    def _value(self, tau: float) -> float:
        return float(expit(self.beta0 - self.beta1 * tau))

    def _values(self, taus: np.ndarray) -> np.ndarray:
        return expit(self.beta0 - self.beta1 * taus)

    @property
    def monotone(self) -> bool:
        return self.beta1 >= 0

    def descriptor(self) -> str:
        return f"logistic:{self.beta0:.6g},{self.beta1:.6g}"


class TableDetection(DetectionFunction):
    """分段常数表：取不超过 τ 的最大断点对应的值；首个断点之前为 1"""

    kind: Literal["table"] = "table"
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_table(self) -> "TableDetection":
        if not self.breakpoints or len(self.breakpoints) != len(self.values):
            raise ValueError("断点与取值必须非空且长度一致")
        if any(not math.isfinite(b) or b < 0 for b in self.breakpoints):
            raise ValueError("断点必须为非负有限值")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("断点必须严格递增")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ValueError("取值必须在 [0, 1] 内")
        if any(v2 > v1 for v1, v2 in zip(self.values, self.values[1:])):
            raise ValueError("检测表必须单调不增")
        return self

    def _value(self, tau: float) -> float:
        index = bisect_right(self.breakpoints, tau) - 1
        return 1.0 if index < 0 else self.values[index]

    def descriptor(self) -> str:
        return f"table:{len(self.breakpoints)}"


class EmpiricalAverageDetection(DetectionFunction):
    """
    集成平均检测函数 Ψ^avg(τ) = W(τ) / (I * J)

    pooled 为所有 (观测, 模型) 的 d_A 升序排列（含 inf）
    """

    kind: Literal["empirical-average"] = "empirical-average"
    pooled: Tuple[float, ...]
    n_observations: int = Field(gt=0)
    n_models: int = Field(gt=0)
    model_ids: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_pool(self) -> "EmpiricalAverageDetection":
        if len(self.pooled) != self.n_observations * self.n_models:
            raise ValueError("汇总距离数量必须等于 I * J")
        if any(b < a for a, b in zip(self.pooled, self.pooled[1:])):
            raise ValueError("汇总距离必须升序")
        return self

    def w_count(self, tau: float) -> int:
        """W(τ)：d_A > τ 的 (观测, 模型) 对数，inf 总是计入"""
        return len(self.pooled) - bisect_right(self.pooled, tau)

    def _value(self, tau: float) -> float:
        return self.w_count(tau) / (self.n_observations * self.n_models)

    def _values(self, taus: np.ndarray) -> np.ndarray:
        pooled = np.asarray(self.pooled, dtype=np.float64)
        counts = pooled.size - np.searchsorted(pooled, taus, side="right")
        return counts / (self.n_observations * self.n_models)

    def descriptor(self) -> str:
        return f"average:J={self.n_models}"


def eval_detection(f: DetectionFunction, tau: float) -> float:
    """Ψ(τ)"""
    return f.evaluate(tau)
