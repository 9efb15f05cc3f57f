"""
流水线中间产物的文件格式
数据集、模型、检测样本、检测函数参数、自助法分位带、曲线
"""
import csv
import io
import json
import math
import struct
from pathlib import Path
from typing import Annotated, Dict, List, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import Field, TypeAdapter, ValidationError

from src.core.errors import (
    ConfigError, DuplicateRecordError, FormatError, MalformedValueError, VersionMismatchError
)
from src.core.models import (
    Architecture, BandPoint, BootstrapBand, Dataset, DetectionSample, Observation
)
from src.detection.functions import DetectionFunction, LogisticDetection, StepDetection, TableDetection
from src.storage.records import (
    FORMAT_VERSION, PathLike, check_token, format_float, parse_float, parse_header,
    read_lines, write_text
)
from src.toy.predictor import Predictor

DATASET_MAGIC = "#pdam-dataset"
MODEL_MAGIC = b"PDAMMODL"
MODEL_VERSION = 1
DETECTION_FORMAT = "pdam-detection"
DETECTION_VERSION = 1
SAMPLES_HEADER = ["tau", "undetected"]
BAND_HEADER = ["metric", "n", "p05", "p50", "p95", "excluded"]
CURVE_HEADER = ["tau", "value"]

_detection_adapter = TypeAdapter(
    Annotated[Union[StepDetection, LogisticDetection, TableDetection], Field(discriminator="kind")]
)


def _optional_float(value) -> str:
    return "" if value is None else format_float(value)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _write_csv(path: PathLike, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(_csv_text(header, rows))


def _read_csv(path: PathLike, header: Sequence[str]) -> List[Tuple[int, List[str]]]:
    """返回 (行号, 字段) 列表；完全空的文件视为没有数据行"""
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = [(number, row) for number, row in enumerate(csv.reader(f), start=1) if row]
    if not rows:
        return []
    number, first = rows[0]
    if [c.strip() for c in first] != list(header):
        raise FormatError(f"表头应为 {','.join(header)}，读到 {','.join(first)}", str(path), number)
    for number, row in rows[1:]:
        if len(row) != len(header):
            raise FormatError(f"期望 {len(header)} 列，读到 {len(row)} 列", str(path), number)
    return rows[1:]


# ---------------------------------------------------------------------------
# 数据集
# ---------------------------------------------------------------------------

def write_dataset(dataset: Dataset, path: PathLike) -> None:
    """每行：id<TAB>label<TAB>逗号分隔的特征"""
    lines = ["\t".join([DATASET_MAGIC, FORMAT_VERSION,
                        f"num_classes={dataset.num_classes}", f"dim={dataset.dim}"])]
    for obs in dataset.observations:
        features = ",".join(format_float(v) for v in obs.features)
        lines.append(f"{check_token(obs.id, '观测ID')}\t{obs.label}\t{features}")
    write_text(path, lines)
    logger.debug(f"已写出数据集 ({len(dataset)} 个观测): {path}")


def read_dataset(path: PathLike) -> Dataset:
    lines = read_lines(path)
    first = next(lines, None)
    if first is None:
        raise FormatError("文件为空，缺少文件头", str(path), 1)
    header = parse_header(first[1], DATASET_MAGIC, path)
    try:
        num_classes = int(header["num_classes"])
        dim = int(header["dim"])
    except (KeyError, ValueError):
        raise FormatError("文件头缺少合法的 num_classes/dim", str(path), 1)

    observations = []
    seen = set()
    for number, line in lines:
        fields = line.split("\t")
        if len(fields) != 3:
            raise FormatError(f"期望 3 列，读到 {len(fields)} 列", str(path), number)
        observation_id, raw_label, raw_features = fields
        if observation_id in seen:
            raise DuplicateRecordError(f"观测ID重复: {observation_id}", str(path), number)
        seen.add(observation_id)
        try:
            label = int(raw_label)
        except ValueError:
            raise MalformedValueError(f"标签不是整数: {raw_label!r}", str(path), number)
        features = tuple(parse_float(v, path, number) for v in raw_features.split(","))
        if len(features) != dim:
            raise FormatError(f"特征维度 {len(features)} 与文件头 dim={dim} 不符", str(path), number)
        if not 0 <= label < num_classes:
            raise MalformedValueError(f"标签 {label} 超出类别数 {num_classes}", str(path), number)
        observations.append(Observation(id=observation_id, features=features, label=label))
    return Dataset(observations=tuple(observations), num_classes=num_classes, dim=dim)


# ---------------------------------------------------------------------------
# 模型
# ---------------------------------------------------------------------------

def write_model(predictor: Predictor, path: PathLike) -> None:
    """
    二进制模型文件：8 字节 magic、uint32 版本、uint32 头长度、JSON 头、小端 float64 权重
    """
    header = json.dumps({
        "model_id": predictor.model_id,
        "architecture": predictor.architecture.model_dump(mode="json"),
        "num_classes": predictor.num_classes,
        "dim": predictor.dim,
        "n_weights": int(predictor.weights.size),
    }, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<II", MODEL_VERSION, len(header)))
        f.write(header)
        f.write(predictor.weights.astype("<f8").tobytes())
    logger.debug(f"已写出模型 {predictor.model_id} ({predictor.weights.size} 个参数): {path}")


def read_model(path: PathLike) -> Predictor:
    data = Path(path).read_bytes()
    prefix = len(MODEL_MAGIC) + 8
    if len(data) < prefix or data[:len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise FormatError("不是模型文件（magic 不匹配）", str(path))
    version, header_length = struct.unpack("<II", data[len(MODEL_MAGIC):prefix])
    if version != MODEL_VERSION:
        raise VersionMismatchError(f"不支持的模型版本 {version}，期望 {MODEL_VERSION}", str(path))
    try:
        header = json.loads(data[prefix:prefix + header_length].decode("utf-8"))
        architecture = Architecture.model_validate(header["architecture"])
        n_weights = int(header["n_weights"])
    except (ValueError, KeyError, ValidationError) as e:
        raise FormatError(f"模型文件头无法解析: {str(e)}", str(path))
    payload = data[prefix + header_length:]
    if len(payload) != 8 * n_weights:
        raise FormatError(f"权重字节数 {len(payload)} 与声明的 {n_weights} 个参数不符", str(path))
    weights = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(weights)):
        raise MalformedValueError("权重包含非有限值", str(path))
    return Predictor(header["model_id"], architecture, weights, int(header["num_classes"]), int(header["dim"]))


# ---------------------------------------------------------------------------
# 检测样本与检测函数
# ---------------------------------------------------------------------------

def write_detection_samples(samples: Sequence[DetectionSample], path: PathLike) -> None:
    _write_csv(path, SAMPLES_HEADER, [[format_float(s.tau), str(s.undetected)] for s in samples])


def read_detection_samples(path: PathLike) -> List[DetectionSample]:
    """CSV 表头 tau,undetected；空文件返回空列表"""
    samples = []
    for number, (raw_tau, raw_label) in _read_csv(path, SAMPLES_HEADER):
        tau = parse_float(raw_tau, path, number)
        if raw_label.strip() not in ("0", "1"):
            raise MalformedValueError(f"undetected 必须为 0 或 1，读到 {raw_label!r}", str(path), number)
        try:
            samples.append(DetectionSample(tau=tau, undetected=int(raw_label)))
        except ValidationError as e:
            raise MalformedValueError(f"非法样本: {e.errors()[0]['msg']}", str(path), number)
    return samples


def write_detection(detection: DetectionFunction, path: PathLike) -> None:
    """JSON：逻辑回归参数附带拟合诊断"""
    if detection.kind not in ("step", "logistic", "table"):
        raise ConfigError(f"检测函数 {detection.descriptor()} 由记录文件推导，不单独保存")
    document = {
        "format": DETECTION_FORMAT,
        "version": DETECTION_VERSION,
        "detection": detection.model_dump(mode="json"),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(document, indent=2, ensure_ascii=False) + "\n")


def read_detection(path: PathLike) -> DetectionFunction:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"不是合法 JSON: {str(e)}", str(path), e.lineno)
    if not isinstance(document, dict) or document.get("format") != DETECTION_FORMAT:
        raise FormatError(f"缺少 format={DETECTION_FORMAT}", str(path))
    if document.get("version") != DETECTION_VERSION:
        raise VersionMismatchError(f"不支持的版本 {document.get('version')!r}", str(path))
    try:
        return _detection_adapter.validate_python(document.get("detection"))
    except ValidationError as e:
        raise MalformedValueError(f"检测函数参数非法: {e.errors()[0]['msg']}", str(path))


# ---------------------------------------------------------------------------
# 自助法分位带
# ---------------------------------------------------------------------------

def write_bands(bands: Sequence[BootstrapBand], path: PathLike) -> None:
    """CSV metric,n,p05,p50,p95,excluded；metric 列为 指标@模型ID"""
    rows = []
    for band in bands:
        for point in band.points:
            rows.append([f"{band.metric_name}@{band.model_id}", str(point.n), _optional_float(point.p05),
                         _optional_float(point.p50), _optional_float(point.p95), str(point.excluded)])
    _write_csv(path, BAND_HEADER, rows)
    logger.debug(f"已写出 {len(bands)} 条分位带: {path}")


def read_bands(path: PathLike) -> Dict[Tuple[str, str], Tuple[BandPoint, ...]]:
    """按 (指标, 模型ID) 分组读取各样本量的分位数"""
    grouped: Dict[Tuple[str, str], List[BandPoint]] = {}
    for number, (label, raw_n, raw_p05, raw_p50, raw_p95, raw_excluded) in _read_csv(path, BAND_HEADER):
        metric_name, sep, model_id = label.rpartition("@")
        if not sep:
            raise MalformedValueError(f"metric 列应为 指标@模型ID，读到 {label!r}", str(path), number)
        quantiles = [None if not raw.strip() else parse_float(raw, path, number)
                     for raw in (raw_p05, raw_p50, raw_p95)]
        try:
            point = BandPoint(n=int(raw_n), p05=quantiles[0], p50=quantiles[1], p95=quantiles[2],
                              excluded=int(raw_excluded))
        except (ValueError, ValidationError) as e:
            raise MalformedValueError(f"分位带行非法: {str(e)}", str(path), number)
        grouped.setdefault((metric_name, model_id), []).append(point)
    return {key: tuple(points) for key, points in grouped.items()}


# ---------------------------------------------------------------------------
# 曲线
# ---------------------------------------------------------------------------

def curve_rows(points: Sequence[Tuple[float, float]]) -> List[List[str]]:
    """校验断点并追加重复的收尾点"""
    for i, (tau, value) in enumerate(points):
        if not math.isfinite(tau):
            raise ConfigError(f"曲线断点必须为有限值，收到 {tau}")
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"曲线取值必须在 [0, 1] 内，收到 {value}")
        if i and tau <= points[i - 1][0]:
            raise ConfigError(f"曲线断点必须严格升序: {points[i - 1][0]} 之后是 {tau}")
    rows = [[format_float(tau), format_float(value)] for tau, value in points]
    if rows:
        rows.append(list(rows[-1]))
    return rows


def emit_curve(points: Sequence[Tuple[float, float]], path: PathLike) -> None:
    """
    写出阶梯曲线 CSV tau,value，末尾在最大 τ 处重复一次最终点

    Args:
        points: 升序断点 (τ, 取值)
        path: 输出路径
    """
    _write_csv(path, CURVE_HEADER, curve_rows(points))
    logger.debug(f"已写出曲线 ({len(points)} 个断点): {path}")


def read_curve(path: PathLike) -> List[Tuple[float, float]]:
    """读回断点，去掉收尾点"""
    rows = [(parse_float(t, path, n), parse_float(v, path, n)) for n, (t, v) in _read_csv(path, CURVE_HEADER)]
    return rows[:-1]
