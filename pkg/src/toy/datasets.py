"""
合成数据生成
高斯团、双月牙、XOR 网格，替代真实图像数据集
"""
import math

import numpy as np
from loguru import logger

from src.core.errors import ConfigError
from src.core.models import Dataset, DatasetKind, Observation, SyntheticSpec
from src.utils.seeding import derive_rng

BLOB_RADIUS = 4.0


def blob_centers(num_classes: int, dim: int) -> np.ndarray:
    """类中心：前两维均匀分布在半径为 BLOB_RADIUS 的圆上；一维时等距排开"""
    centers = np.zeros((num_classes, dim))
    if dim == 1:
        centers[:, 0] = np.linspace(-BLOB_RADIUS, BLOB_RADIUS, num_classes) if num_classes > 1 else 0.0
        return centers
    for c in range(num_classes):
        angle = 2.0 * math.pi * c / num_classes
        centers[c, 0] = BLOB_RADIUS * math.cos(angle)
        centers[c, 1] = BLOB_RADIUS * math.sin(angle)
    return centers


def _gaussian_blobs(spec: SyntheticSpec, rng: np.random.Generator):
    labels = np.arange(spec.n) % spec.num_classes
    centers = blob_centers(spec.num_classes, spec.dim)
    features = centers[labels] + spec.noise * rng.standard_normal((spec.n, spec.dim))
    return features, labels


def _two_moons(spec: SyntheticSpec, rng: np.random.Generator):
    n_outer = spec.n - spec.n // 2
    n_inner = spec.n // 2
    t_outer = rng.uniform(0.0, math.pi, n_outer)
    t_inner = rng.uniform(0.0, math.pi, n_inner)
    outer = np.column_stack([np.cos(t_outer), np.sin(t_outer)])
    inner = np.column_stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)])
    plane = np.vstack([outer, inner])
    labels = np.concatenate([np.zeros(n_outer, dtype=np.int64), np.ones(n_inner, dtype=np.int64)])
    features = np.zeros((spec.n, spec.dim))
    features[:, :2] = plane
    features += spec.noise * rng.standard_normal((spec.n, spec.dim))
    return features, labels


def _xor_grid(spec: SyntheticSpec, rng: np.random.Generator):
    features = rng.uniform(-1.0, 1.0, (spec.n, spec.dim))
    labels = ((features[:, 0] > 0) ^ (features[:, 1] > 0)).astype(np.int64)
    features = features + spec.noise * rng.standard_normal((spec.n, spec.dim))
    return features, labels


_GENERATORS = {
    DatasetKind.GAUSSIAN_BLOBS: _gaussian_blobs,
    DatasetKind.TWO_MOONS: _two_moons,
    DatasetKind.XOR_GRID: _xor_grid,
}


def generate_dataset(spec: SyntheticSpec) -> Dataset:
    """
    按配置生成合成数据集，给定种子时结果确定

    Args:
        spec: 合成数据配置

    Returns:
        数据集
    """
    generator = _GENERATORS.get(spec.kind)
    if generator is None:
        raise ConfigError(f"不支持的数据类型: {spec.kind}")

    rng = derive_rng(spec.seed, "data", spec.kind.value)
    features, labels = generator(spec, rng)
    observations = tuple(
        Observation(id=f"x{i}", features=tuple(features[i].tolist()), label=int(labels[i]))
        for i in range(spec.n)
    )
    logger.debug(f"生成数据集 {spec.kind.value}: n={spec.n}, dim={spec.dim}, classes={spec.num_classes}")
    return Dataset(observations=observations, num_classes=spec.num_classes, dim=spec.dim)
