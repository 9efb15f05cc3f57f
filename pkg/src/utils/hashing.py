"""
样本哈希
64位 FNV-1a，用于校验汇总的记录文件是否共享同一观测样本
"""
from typing import Iterable

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """计算 64 位 FNV-1a 哈希"""
    value = FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * FNV_PRIME) & _MASK
    return value


def sample_hash(observation_ids: Iterable[str]) -> str:
    """对排序后的观测ID（换行拼接）求哈希，返回16位十六进制"""
    joined = "\n".join(sorted(observation_ids))
    return f"{fnv1a_64(joined.encode('utf-8')):016x}"
