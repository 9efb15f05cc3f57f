"""
随机数子流
所有随机性都由一个种子通过命名子流派生，与执行顺序无关
"""
from typing import Union

import numpy as np

from src.utils.hashing import fnv1a_64

Key = Union[int, float, str]


def _key_to_int(key: Key) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)) and key >= 0:
        return int(key)
    # 字符串、负数与浮点数统一按其文本表示哈希
    return fnv1a_64(repr(key).encode("utf-8"))


def derive_rng(seed: int, stream: str, *keys: Key) -> np.random.Generator:
    """
    派生一个独立的随机数生成器

    Args:
        seed: 全局种子
        stream: 子流名称（train/attack/bootstrap/detector 等）
        keys: 进一步区分的键，如观测ID、epsilon、重复编号

    Returns:
        numpy 随机数生成器
    """
    entropy = [_key_to_int(seed), fnv1a_64(stream.encode("utf-8"))]
    entropy.extend(_key_to_int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy))
