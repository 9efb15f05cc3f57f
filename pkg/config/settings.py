"""
系统配置文件
"""
from typing import List, Optional
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """系统配置类"""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # 基础配置
    PROJECT_NAME: str = "pdam-risk"
    VERSION: str = "1.0.0"
    DEBUG: bool = False

    # 日志配置
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    # 随机种子（所有子流由此派生）
    DEFAULT_SEED: int = 0

    # 攻击配置
    DISTANCE_METRIC: str = "Linf"
    SUCCESS_CRITERION: str = "ground-truth-disagreement"
    ATTACK_NAMES: List[str] = ["fgsm", "pgd", "random"]
    EPSILON_GRID: List[float] = [k / 255 for k in (1, 2, 4, 8, 16, 32, 64, 128)]
    PGD_STEPS: int = 20
    RANDOM_STEPS: int = 100
    FILTER_INITIALLY_CORRECT: bool = True
    MAX_WORKERS: int = 4

    # 评估配置
    TAUS: List[float] = [2 / 255, 8 / 255]
    N_OBSERVATIONS: int = 200
    DETECTION_L2: float = 1e-6
    REPORT_FORMAT: str = "tsv"

    # 重采样配置
    BOOTSTRAP_REPS: int = 50
    BOOTSTRAP_N_MIN: int = 20
    BOOTSTRAP_N_MAX: int = 200
    BOOTSTRAP_N_STEP: int = 20


def load_settings(config_file: Optional[str] = None) -> Settings:
    """加载配置，可选地叠加 key=value 配置文件"""
    if config_file:
        return Settings(_env_file=config_file)
    return Settings()


# 全局配置实例
settings = Settings()
