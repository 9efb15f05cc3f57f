"""
攻击候选文件
首行：#pdam-candidates<TAB>v1<TAB>metric=..
每个候选一行：observation_id, attack_name, 参数JSON, distance, success(0/1), 扰动后特征（逗号分隔）
"""
import json
from typing import List, Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from src.core.errors import FormatError, MalformedValueError, MetricMismatchError
from src.core.models import AttackCandidate, DistanceMetric
from src.storage.records import (
    FORMAT_VERSION, PathLike, check_token, format_float, parse_float, parse_header,
    parse_metric, read_lines, write_text
)

CANDIDATES_MAGIC = "#pdam-candidates"
_COLUMNS = 6


def _encode(candidate: AttackCandidate) -> str:
    params = json.dumps(candidate.attack_params, sort_keys=True, separators=(",", ":"), allow_nan=False)
    features = ",".join(format_float(v) for v in candidate.perturbed_features)
    return "\t".join([
        check_token(candidate.observation_id, "观测ID"),
        check_token(candidate.attack_name, "攻击名"),
        params,
        format_float(candidate.distance),
        "1" if candidate.success else "0",
        features,
    ])


def write_candidates(candidates: Sequence[AttackCandidate], path: PathLike,
                     metric: DistanceMetric = DistanceMetric.LINF) -> None:
    """按给定顺序写出候选"""
    lines = ["\t".join([CANDIDATES_MAGIC, FORMAT_VERSION, f"metric={metric.value}"])]
    lines.extend(_encode(c) for c in candidates)
    write_text(path, lines)
    logger.debug(f"已写出 {len(candidates)} 个候选: {path}")


def read_candidates(path: PathLike, expected_metric: Optional[DistanceMetric] = None) -> List[AttackCandidate]:
    """
    读取候选文件

    Args:
        path: 文件路径
        expected_metric: 若给出，度量不一致时报错

    Returns:
        候选列表，顺序与文件一致；只有文件头时为空列表
    """
    lines = read_lines(path)
    first = next(lines, None)
    if first is None:
        raise FormatError("文件为空，缺少文件头", str(path), 1)
    header = parse_header(first[1], CANDIDATES_MAGIC, path)
    metric = parse_metric(header.get("metric"), path)
    if expected_metric is not None and metric != expected_metric:
        raise MetricMismatchError(f"度量 {metric.value} 与期望的 {expected_metric.value} 不一致", str(path), 1)

    candidates: List[AttackCandidate] = []
    for number, line in lines:
        fields = line.split("\t")
        if len(fields) != _COLUMNS:
            raise FormatError(f"期望 {_COLUMNS} 列，读到 {len(fields)} 列", str(path), number)
        observation_id, attack_name, raw_params, raw_distance, raw_success, raw_features = fields
        try:
            params = json.loads(raw_params)
        except json.JSONDecodeError as e:
            raise MalformedValueError(f"攻击参数不是合法 JSON: {str(e)}", str(path), number)
        if not isinstance(params, dict):
            raise MalformedValueError("攻击参数必须是 JSON 对象", str(path), number)
        if raw_success not in ("0", "1"):
            raise MalformedValueError(f"success 必须为 0 或 1，读到 {raw_success!r}", str(path), number)
        features = tuple(parse_float(v, path, number) for v in raw_features.split(",")) if raw_features else ()
        try:
            candidates.append(AttackCandidate(
                observation_id=observation_id,
                attack_name=attack_name,
                attack_params=params,
                perturbed_features=features,
                distance=parse_float(raw_distance, path, number),
                success=raw_success == "1",
            ))
        except ValidationError as e:
            raise MalformedValueError(f"候选字段非法: {e.errors()[0]['msg']}", str(path), number)
    return candidates
