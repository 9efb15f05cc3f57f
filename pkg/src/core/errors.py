"""
异常定义
每类异常携带命令行退出码：2 配置错误，3 IO错误，4 数值错误
"""
from typing import Optional


class PdamError(Exception):
    """系统异常基类"""

    exit_code = 1


class ConfigError(PdamError, ValueError):
    """配置或输入参数错误"""

    exit_code = 2


class DimensionError(ConfigError):
    """向量维度不匹配"""


class InsufficientDataError(ConfigError):
    """数据量不足以完成操作"""


class SampleMismatchError(ConfigError):
    """汇总的结果不共享同一观测样本"""


class StorageError(PdamError):
    """文件读写错误"""

    exit_code = 3


class FormatError(StorageError):
    """文件格式错误，带文件路径与行号"""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class VersionMismatchError(FormatError):
    """文件版本无法识别"""


class DuplicateRecordError(FormatError):
    """观测ID重复"""


class MalformedValueError(FormatError):
    """数值无法解析"""


class MetricMismatchError(FormatError):
    """距离度量不一致"""


class NumericError(PdamError):
    """数值计算失败"""

    exit_code = 4


class TrainingError(NumericError):
    """训练发散"""


class DetectionFitError(NumericError):
    """检测概率函数拟合失败"""


class EstimationError(NumericError):
    """估计量内部一致性校验失败"""


class AttackError(NumericError):
    """攻击执行失败，带观测与攻击上下文"""

    def __init__(self, message: str, observation_id: Optional[str] = None,
                 attack_name: Optional[str] = None):
        self.observation_id = observation_id
        self.attack_name = attack_name
        context = []
        if observation_id is not None:
            context.append(f"observation={observation_id}")
        if attack_name is not None:
            context.append(f"attack={attack_name}")
        prefix = f"[{', '.join(context)}] " if context else ""
        super().__init__(f"{prefix}{message}")
