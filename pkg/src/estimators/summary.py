"""
汇总表
每个模型一行：P^dam、各阈值下的 ASR(τ)、MPS，以及可选的运营风险
"""
from typing import Dict, List, Optional, Sequence

from loguru import logger

from src.core.errors import InsufficientDataError
from src.core.models import AttackOutcomeSet, SummaryRow
from src.detection.functions import DetectionFunction
from src.estimators.metrics import asr, mps
from src.estimators.risk import operational_risk, pdam_detector_free, pdam_surrogate


def column_keys(taus: Sequence[float], with_risk: bool = False) -> List[str]:
    """列顺序：pdam, asr:0..k, mps[, risk]"""
    keys = ["pdam"] + [f"asr:{i}" for i in range(len(taus))] + ["mps"]
    if with_risk:
        keys.append("risk")
    return keys


def _cell(row: SummaryRow, key: str) -> Optional[float]:
    if key == "pdam":
        return row.pdam
    if key == "mps":
        return row.mps
    if key == "risk":
        return row.risk
    return row.asr[int(key.split(":")[1])][1]


def mark_best(rows: Sequence[SummaryRow]) -> List[SummaryRow]:
    """标记每列最优值：MPS 取最大，其余取最小；并列全部标记"""
    if not rows:
        return []
    taus = [tau for tau, _ in rows[0].asr]
    keys = column_keys(taus, with_risk=rows[0].risk is not None)
    best: Dict[str, float] = {}
    for key in keys:
        values = [v for v in (_cell(r, key) for r in rows) if v is not None]
        if values:
            best[key] = max(values) if key == "mps" else min(values)
    marked = []
    for row in rows:
        flags = tuple(k for k in keys if k in best and _cell(row, k) == best[k])
        marked.append(row.model_copy(update={"best": flags}))
    return marked


def summary_table(outcomes: Sequence[AttackOutcomeSet], taus: Sequence[float],
                  detection: Optional[DetectionFunction] = None,
                  c_dam: Optional[float] = None) -> List[SummaryRow]:
    """
    构建汇总表

    Args:
        outcomes: 各模型结果集
        taus: ASR 阈值（按升序输出）
        detection: 检测函数；为 None 时使用无检测器估计
        c_dam: 可选的损害成本，给出时追加风险列

    Returns:
        已标记最优值的行
    """
    if not outcomes:
        raise InsufficientDataError("汇总表至少需要一个模型")
    taus = sorted(taus)

    if detection is None:
        estimates = pdam_detector_free(outcomes)
    else:
        estimates = [pdam_surrogate(o, detection) for o in outcomes]

    rows = []
    for o, estimate in zip(outcomes, estimates):
        risk = operational_risk(estimate, c_dam).risk if c_dam is not None else None
        rows.append(SummaryRow(
            model_id=o.model_id,
            pdam=estimate.pdam_hat,
            asr=tuple((tau, asr(o, tau)) for tau in taus),
            mps=mps(o),
            risk=risk,
        ))
    logger.debug(f"汇总表构建完成: {len(rows)} 行, {len(taus)} 个阈值")
    return mark_best(rows)
