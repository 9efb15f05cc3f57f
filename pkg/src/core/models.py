"""
核心数据模型
观测、攻击候选、扰动记录以及估计结果
"""
import math
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator


class DistanceMetric(str, Enum):
    """距离度量枚举"""
    LINF = "Linf"
    L2 = "L2"


class SuccessCriterion(str, Enum):
    """攻击成功判据"""
    GROUND_TRUTH = "ground-truth-disagreement"  # 预测与真实标签不一致
    PREDICTION_CHANGE = "prediction-change"      # 预测相对原始预测发生变化


class AttackName(str, Enum):
    """攻击类型枚举"""
    FGSM = "fgsm"
    PGD = "pgd"
    RANDOM = "random"


class EstimationMethod(str, Enum):
    """P^dam 估计方法"""
    SURROGATE = "surrogate"
    MONTE_CARLO = "monte-carlo"
    DETECTOR_FREE = "detector-free"


class DatasetKind(str, Enum):
    """合成数据类型"""
    GAUSSIAN_BLOBS = "gaussian-blobs"
    TWO_MOONS = "two-moons"
    XOR_GRID = "xor-grid"


class Activation(str, Enum):
    """激活函数"""
    RELU = "relu"
    TANH = "tanh"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


class Observation(_Frozen):
    """观测：特征向量与真实标签"""
    id: str
    features: Tuple[float, ...]
    label: int = Field(ge=0)

    @field_validator("features")
    @classmethod
    def _finite(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not all(math.isfinite(v) for v in value):
            raise ValueError("特征必须是有限值")
        return value

    def as_array(self) -> np.ndarray:
        return np.asarray(self.features, dtype=np.float64)


class Dataset(_Frozen):
    """有序观测样本"""
    observations: Tuple[Observation, ...]
    num_classes: int = Field(gt=0)
    dim: int = Field(gt=0)

    @model_validator(mode="after")
    def _check_consistency(self) -> "Dataset":
        seen = set()
        for obs in self.observations:
            if obs.id in seen:
                raise ValueError(f"观测ID重复: {obs.id}")
            seen.add(obs.id)
            if len(obs.features) != self.dim:
                raise ValueError(f"观测 {obs.id} 维度为 {len(obs.features)}，期望 {self.dim}")
            if obs.label >= self.num_classes:
                raise ValueError(f"观测 {obs.id} 标签 {obs.label} 超出类别数 {self.num_classes}")
        return self

    def __len__(self) -> int:
        return len(self.observations)

    def ids(self) -> List[str]:
        return [obs.id for obs in self.observations]

    def features_matrix(self) -> np.ndarray:
        if not self.observations:
            return np.zeros((0, self.dim))
        return np.asarray([obs.features for obs in self.observations], dtype=np.float64)

    def labels(self) -> np.ndarray:
        return np.asarray([obs.label for obs in self.observations], dtype=np.int64)

    def subset(self, keep_ids) -> "Dataset":
        """按ID子集保留观测（保持原有顺序）"""
        keep = set(keep_ids)
        return Dataset(
            observations=tuple(o for o in self.observations if o.id in keep),
            num_classes=self.num_classes,
            dim=self.dim,
        )


class AttackCandidate(_Frozen):
    """一次攻击生成的候选扰动"""
    observation_id: str
    attack_name: str
    attack_params: Dict[str, Union[int, float, str]] = {}
    perturbed_features: Tuple[float, ...]
    distance: float = Field(ge=0.0)
    success: bool

    @property
    def epsilon(self) -> float:
        return float(self.attack_params.get("epsilon", math.inf))

    def tie_key(self) -> Tuple[float, str, float]:
        """最小扰动的稳定排序键：(距离, 攻击名, epsilon)"""
        return (self.distance, self.attack_name, self.epsilon)


class PerturbationRecord(_Frozen):
    """单个观测在某模型上的最小成功扰动 d_A(x, M)，无成功攻击时为 inf"""
    observation_id: str
    model_id: str
    d_a: float

    @field_validator("d_a")
    @classmethod
    def _positive_or_inf(cls, value: float) -> float:
        if math.isnan(value) or value <= 0.0:
            raise ValueError(f"d_a 必须为正数或 inf，收到 {value}")
        return value

    @property
    def is_success(self) -> bool:
        return math.isfinite(self.d_a)


class AttackOutcomeSet(_Frozen):
    """一个模型在整个样本上的扰动记录"""
    model_id: str
    metric: DistanceMetric = DistanceMetric.LINF
    records: Tuple[PerturbationRecord, ...]

    _sorted_finite: Tuple[float, ...] = PrivateAttr(default=())

    @model_validator(mode="after")
    def _check_records(self) -> "AttackOutcomeSet":
        seen = set()
        for record in self.records:
            if record.observation_id in seen:
                raise ValueError(f"观测ID重复: {record.observation_id}")
            seen.add(record.observation_id)
            if record.model_id != self.model_id:
                raise ValueError(f"记录所属模型 {record.model_id} 与 {self.model_id} 不一致")
        return self

    def model_post_init(self, __context) -> None:
        self._sorted_finite = tuple(sorted(r.d_a for r in self.records if r.is_success))

    @classmethod
    def from_distances(cls, model_id: str, distances, observation_ids=None,
                       metric: DistanceMetric = DistanceMetric.LINF) -> "AttackOutcomeSet":
        """由距离序列构造（测试与重采样常用）"""
        distances = [float(d) for d in distances]
        if observation_ids is None:
            observation_ids = [f"x{i}" for i in range(len(distances))]
        records = tuple(
            PerturbationRecord(observation_id=oid, model_id=model_id, d_a=d)
            for oid, d in zip(observation_ids, distances)
        )
        return cls(model_id=model_id, metric=metric, records=records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def sorted_finite_distances(self) -> Tuple[float, ...]:
        return self._sorted_finite

    @property
    def finite_count(self) -> int:
        return len(self._sorted_finite)

    def observation_ids(self) -> List[str]:
        return [r.observation_id for r in self.records]

    def distances(self) -> np.ndarray:
        """记录顺序下的 d_a 数组（含 inf）"""
        return np.asarray([r.d_a for r in self.records], dtype=np.float64)

    def distance_of(self, observation_id: str) -> float:
        for record in self.records:
            if record.observation_id == observation_id:
                return record.d_a
        raise KeyError(observation_id)


class AttackSpec(_Frozen):
    """攻击族配置：一个攻击名配一组 epsilon"""
    name: AttackName
    epsilon_grid: Tuple[float, ...]
    steps: int = Field(default=20, ge=1)
    step_size: Union[float, Literal["auto"]] = "auto"
    seed: int = 0

    @field_validator("epsilon_grid")
    @classmethod
    def _ascending(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not value:
            raise ValueError("epsilon_grid 不能为空")
        if any(not math.isfinite(e) or e <= 0 for e in value):
            raise ValueError("epsilon 必须为正的有限值")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("epsilon_grid 必须严格递增")
        return value

    @field_validator("step_size")
    @classmethod
    def _positive_step(cls, value):
        if value != "auto" and not value > 0:
            raise ValueError("step_size 必须为正数或 'auto'")
        return value


class SyntheticSpec(_Frozen):
    """合成数据配置"""
    kind: DatasetKind
    n: int = Field(gt=0)
    dim: int = Field(default=2, gt=0)
    num_classes: int = Field(default=2, gt=0)
    noise: float = Field(default=0.5, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_kind(self) -> "SyntheticSpec":
        if self.kind in (DatasetKind.TWO_MOONS, DatasetKind.XOR_GRID):
            if self.num_classes != 2:
                raise ValueError(f"{self.kind.value} 只支持两类")
            if self.dim < 2:
                raise ValueError(f"{self.kind.value} 需要 dim >= 2")
        return self


class Architecture(_Frozen):
    """模型结构描述"""
    kind: Literal["linear", "mlp"] = "linear"
    hidden_sizes: Tuple[int, ...] = ()
    activation: Activation = Activation.RELU

    @model_validator(mode="after")
    def _check_hidden(self) -> "Architecture":
        if self.kind == "linear" and self.hidden_sizes:
            raise ValueError("线性模型不能有隐藏层")
        if self.kind == "mlp" and (not self.hidden_sizes or min(self.hidden_sizes) <= 0):
            raise ValueError("MLP 需要至少一个正宽度的隐藏层")
        return self

    def describe(self) -> str:
        if self.kind == "linear":
            return "linear"
        hidden = "x".join(str(h) for h in self.hidden_sizes)
        return f"mlp({hidden},{self.activation.value})"


class TrainingHyper(_Frozen):
    """训练超参数"""
    lr: float = Field(default=0.1, gt=0.0)
    epochs: int = Field(default=100, ge=0)
    batch: int = Field(default=32, gt=0)
    l2: float = Field(default=0.0, ge=0.0)
    seed: int = 0


class DetectionSample(_Frozen):
    """一条人工检测样本：扰动大小与是否未被发现"""
    tau: float = Field(gt=0.0)
    undetected: Literal[0, 1]

    @field_validator("tau")
    @classmethod
    def _finite_tau(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("tau 必须为有限值")
        return value


class RiskEstimate(_Frozen):
    """P^dam 估计结果"""
    model_id: str
    pdam_hat: float = Field(ge=0.0, le=1.0)
    n: int = Field(ge=1)
    method: EstimationMethod
    detection_descriptor: str


class OperationalRisk(_Frozen):
    """运营风险：P^dam × C^dam"""
    model_id: str
    pdam_hat: float
    c_dam: float = Field(ge=0.0)
    risk: float

    @model_validator(mode="after")
    def _product(self) -> "OperationalRisk":
        if self.risk != self.pdam_hat * self.c_dam:
            raise ValueError("risk 必须等于 pdam_hat * c_dam")
        return self


class BandPoint(_Frozen):
    """某一样本量下的分位数"""
    n: int = Field(gt=0)
    p05: Optional[float] = None
    p50: Optional[float] = None
    p95: Optional[float] = None
    excluded: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "BandPoint":
        if self.p05 is not None and not (self.p05 <= self.p50 <= self.p95):
            raise ValueError("分位数必须满足 p05 <= p50 <= p95")
        return self


class BootstrapBand(_Frozen):
    """自助法分位带"""
    metric_name: str
    model_id: str
    n_grid: Tuple[int, ...]
    points: Tuple[BandPoint, ...]
    reps: int = Field(ge=2)
    seed: int

    def width_at(self, n: int) -> Optional[float]:
        """p95 - p05；该样本量下所有重采样都无定义时为 None"""
        for point in self.points:
            if point.n == n:
                if point.p05 is None:
                    return None
                return point.p95 - point.p05
        raise KeyError(n)


class SummaryRow(_Frozen):
    """汇总表的一行"""
    model_id: str
    pdam: float
    asr: Tuple[Tuple[float, float], ...] = ()
    mps: Optional[float] = None
    risk: Optional[float] = None
    best: Tuple[str, ...] = ()
