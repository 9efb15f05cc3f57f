"""
模拟检测器
以概率 1 - Ψ(τ) 判定对抗样本被发现，用于验证蒙特卡洛估计
"""
import numpy as np

from src.detection.functions import DetectionFunction
from src.utils.seeding import derive_rng


def simulate_detector(f: DetectionFunction, tau: float, rng: np.random.Generator) -> bool:
    """返回 True 表示被发现"""
    return bool(rng.random() >= f.evaluate(tau))


class SimulatedDetector:
    """由 Ψ 驱动的检测器，随机性来自调用方提供的种子流"""

    def __init__(self, detection: DetectionFunction, rng: np.random.Generator):
        self.detection = detection
        self.rng = rng
        self.calls = 0

    @classmethod
    def from_seed(cls, detection: DetectionFunction, seed: int) -> "SimulatedDetector":
        return cls(detection, derive_rng(seed, "detector"))

    def detect(self, tau: float) -> bool:
        self.calls += 1
        return simulate_detector(self.detection, tau, self.rng)

    def __repr__(self) -> str:
        return f"SimulatedDetector({self.detection.descriptor()}, calls={self.calls})"
