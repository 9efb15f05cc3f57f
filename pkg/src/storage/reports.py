"""
汇总表输出
tsv 与 markdown 为确定性文本；table 用 rich 渲染给终端
"""
import io
from enum import Enum
from typing import List, Optional, Sequence

from rich.console import Console
from rich.table import Table

from src.core.errors import InsufficientDataError
from src.core.models import SummaryRow
from src.estimators.summary import column_keys


class ReportFormat(str, Enum):
    """报告格式"""
    TSV = "tsv"
    MARKDOWN = "markdown"
    TABLE = "table"


MISSING = "n/a"


def format_number(value: Optional[float]) -> str:
    return MISSING if value is None else f"{value:.4g}"


def column_labels(row: SummaryRow) -> List[str]:
    labels = ["Model", "Pdam"] + [f"ASR({tau:.4g})" for tau, _ in row.asr] + ["MPS"]
    if row.risk is not None:
        labels.append("Risk")
    return labels


def _cells(row: SummaryRow) -> List[Optional[float]]:
    cells = [row.pdam] + [value for _, value in row.asr] + [row.mps]
    if row.risk is not None:
        cells.append(row.risk)
    return cells


def _marked_rows(rows: Sequence[SummaryRow], fmt: ReportFormat) -> List[List[str]]:
    keys = column_keys([tau for tau, _ in rows[0].asr], with_risk=rows[0].risk is not None)
    result = []
    for row in rows:
        line = [row.model_id]
        for key, value in zip(keys, _cells(row)):
            text = format_number(value)
            if key in row.best:
                if fmt == ReportFormat.MARKDOWN:
                    text = f"**{text}**"
                elif fmt == ReportFormat.TSV:
                    text = f"{text}*"
                else:
                    text = f"[bold green]{text}[/bold green]"
            line.append(text)
        result.append(line)
    return result


def emit_report(rows: Sequence[SummaryRow], fmt: ReportFormat = ReportFormat.TSV) -> str:
    """
    渲染汇总表

    Args:
        rows: 已标记最优值的行
        fmt: tsv（最优值后缀 *）、markdown（最优值加粗）或 table

    Returns:
        以换行结尾的文本
    """
    if not rows:
        raise InsufficientDataError("报告至少需要一行")
    fmt = ReportFormat(fmt)
    labels = column_labels(rows[0])
    body = _marked_rows(rows, fmt)

    if fmt == ReportFormat.TSV:
        return "\n".join("\t".join(line) for line in [labels] + body) + "\n"

    if fmt == ReportFormat.MARKDOWN:
        lines = ["| " + " | ".join(labels) + " |",
                 "|" + "|".join(["---"] + ["---:"] * (len(labels) - 1)) + "|"]
        lines.extend("| " + " | ".join(line) + " |" for line in body)
        return "\n".join(lines) + "\n"

    table = Table(title="模型鲁棒性汇总")
    table.add_column(labels[0], justify="left")
    for label in labels[1:]:
        table.add_column(label, justify="right")
    for line in body:
        table.add_row(*line)
    buffer = io.StringIO()
    Console(file=buffer, width=120, force_terminal=False, color_system=None).print(table)
    return buffer.getvalue()
