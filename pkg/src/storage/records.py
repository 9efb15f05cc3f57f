"""
扰动记录文件
首行为版本头：#pdam-records<TAB>v1<TAB>metric=..<TAB>model_id=..<TAB>sample_hash=..
之后每个观测一行：observation_id<TAB>d_a，d_a 为 17 位有效数字的十进制数或字面量 inf
"""
import math
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from loguru import logger
from pydantic import ValidationError

from src.core.errors import (
    ConfigError, DuplicateRecordError, FormatError, MalformedValueError,
    MetricMismatchError, SampleMismatchError, VersionMismatchError
)
from src.core.models import AttackOutcomeSet, DistanceMetric, PerturbationRecord
from src.utils.hashing import sample_hash

RECORDS_MAGIC = "#pdam-records"
FORMAT_VERSION = "v1"
INF_LITERAL = "inf"

PathLike = Union[str, Path]


def format_float(value: float) -> str:
    """17 位有效数字，保证读回后逐位相等；正无穷写为 inf"""
    if math.isinf(value) and value > 0:
        return INF_LITERAL
    if not math.isfinite(value):
        raise ConfigError(f"无法序列化数值 {value}")
    return format(value, ".17g")


def parse_float(text: str, path: PathLike, line: int, allow_inf: bool = False) -> float:
    """解析十进制数；只接受字面量 inf 作为无穷"""
    text = text.strip()
    if allow_inf and text == INF_LITERAL:
        return math.inf
    try:
        value = float(text)
    except ValueError:
        raise MalformedValueError(f"无法解析的数值: {text!r}", str(path), line)
    if not math.isfinite(value):
        raise MalformedValueError(f"非法数值: {text!r}", str(path), line)
    return value


def check_token(value: str, what: str) -> str:
    """ID 等字段不能包含分隔符"""
    if not value or any(c in value for c in "\t\r\n"):
        raise ConfigError(f"{what} 不能为空，也不能包含制表符或换行: {value!r}")
    return value


def read_lines(path: PathLike) -> Iterator[Tuple[int, str]]:
    """逐行读取 (行号, 内容)，去掉行尾换行，跳过空行"""
    with open(path, "r", encoding="utf-8", newline="") as f:
        for number, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if line.strip():
                yield number, line


def write_text(path: PathLike, lines: Sequence[str]) -> None:
    """UTF-8、LF 换行写出"""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")


def parse_header(line: str, magic: str, path: PathLike) -> Dict[str, str]:
    """解析 magic<TAB>version<TAB>key=value... 形式的头"""
    fields = line.split("\t")
    if fields[0] != magic:
        raise FormatError(f"缺少文件头 {magic}，读到 {fields[0]!r}", str(path), 1)
    if len(fields) < 2 or fields[1] != FORMAT_VERSION:
        version = fields[1] if len(fields) > 1 else ""
        raise VersionMismatchError(f"不支持的版本 {version!r}，期望 {FORMAT_VERSION}", str(path), 1)
    header = {}
    for field in fields[2:]:
        key, sep, value = field.partition("=")
        if not sep:
            raise FormatError(f"文件头字段格式错误: {field!r}", str(path), 1)
        header[key] = value
    return header


def parse_metric(value: Optional[str], path: PathLike) -> DistanceMetric:
    try:
        return DistanceMetric(value)
    except ValueError:
        raise FormatError(f"未知的距离度量: {value!r}", str(path), 1)


def write_records(o: AttackOutcomeSet, path: PathLike) -> None:
    """
    写出扰动记录文件

    Args:
        o: 结果集
        path: 输出路径
    """
    check_token(o.model_id, "模型ID")
    ids = o.observation_ids()
    lines = [
        "\t".join([RECORDS_MAGIC, FORMAT_VERSION, f"metric={o.metric.value}",
                   f"model_id={o.model_id}", f"sample_hash={sample_hash(ids)}"])
    ]
    for record in o.records:
        lines.append(f"{check_token(record.observation_id, '观测ID')}\t{format_float(record.d_a)}")
    write_text(path, lines)
    logger.debug(f"已写出 {len(o)} 条记录: {path}")


def read_header(path: PathLike) -> Dict[str, str]:
    """只读取记录文件头"""
    for _, line in read_lines(path):
        return parse_header(line, RECORDS_MAGIC, path)
    raise FormatError("文件为空，缺少文件头", str(path), 1)


def read_records(path: PathLike, expected_metric: Optional[DistanceMetric] = None) -> AttackOutcomeSet:
    """
    读取扰动记录文件

    Args:
        path: 文件路径
        expected_metric: 若给出，度量不一致时报错

    Returns:
        结果集，记录顺序与文件一致
    """
    lines = read_lines(path)
    first = next(lines, None)
    if first is None:
        raise FormatError("文件为空，缺少文件头", str(path), 1)
    header = parse_header(first[1], RECORDS_MAGIC, path)
    metric = parse_metric(header.get("metric"), path)
    if expected_metric is not None and metric != expected_metric:
        raise MetricMismatchError(f"度量 {metric.value} 与期望的 {expected_metric.value} 不一致", str(path), 1)
    model_id = header.get("model_id", "")
    if not model_id:
        raise FormatError("文件头缺少 model_id", str(path), 1)

    records: List[PerturbationRecord] = []
    seen = set()
    for number, line in lines:
        fields = line.split("\t")
        if len(fields) != 2:
            raise FormatError(f"期望 2 列，读到 {len(fields)} 列", str(path), number)
        observation_id, raw = fields
        if observation_id in seen:
            raise DuplicateRecordError(f"观测ID重复: {observation_id}", str(path), number)
        seen.add(observation_id)
        d_a = parse_float(raw, path, number, allow_inf=True)
        try:
            records.append(PerturbationRecord(observation_id=observation_id, model_id=model_id, d_a=d_a))
        except ValidationError as e:
            raise MalformedValueError(f"非法的 d_a {raw!r}: {e.errors()[0]['msg']}", str(path), number)

    declared = header.get("sample_hash")
    actual = sample_hash(seen)
    if declared is not None and declared != actual:
        raise FormatError(f"样本哈希 {declared} 与记录内容的哈希 {actual} 不一致", str(path), 1)
    return AttackOutcomeSet(model_id=model_id, metric=metric, records=tuple(records))


def read_pooled(paths: Sequence[PathLike]) -> List[AttackOutcomeSet]:
    """
    读取多份待汇总的记录文件，要求度量与样本哈希一致

    Args:
        paths: 文件路径

    Returns:
        每个文件一个结果集
    """
    if not paths:
        raise ConfigError("至少需要一个记录文件")
    outcomes: List[AttackOutcomeSet] = []
    reference_hash = None
    for path in paths:
        header = read_header(path)
        expected = outcomes[0].metric if outcomes else None
        o = read_records(path, expected_metric=expected)
        current = header.get("sample_hash") or sample_hash(o.observation_ids())
        if reference_hash is None:
            reference_hash = current
        elif current != reference_hash:
            raise SampleMismatchError(f"{path}: 样本哈希 {current} 与 {paths[0]} 的 {reference_hash} 不一致")
        outcomes.append(o)
    model_ids = [o.model_id for o in outcomes]
    if len(set(model_ids)) != len(model_ids):
        raise ConfigError(f"模型ID重复: {model_ids}")
    logger.info(f"已读取 {len(outcomes)} 个记录文件，样本哈希 {reference_hash}")
    return outcomes
