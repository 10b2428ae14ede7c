"""Отчёты проб по лестнице разрешений и их сериализация."""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.config import REPORT_SCHEMA, TABLE_DIGITS


def interior_norms(values: np.ndarray, mask: np.ndarray, cell: float = 1.0) -> Dict[str, float]:
    """Дискретная L2-норма с весом ячейки и максимум по маске."""
    selected = np.asarray(values, dtype=float)[mask]
    if selected.size == 0:
        return {"l2": 0.0, "max": 0.0}
    return {
        "l2": float(np.sqrt(cell * np.sum(selected ** 2))),
        "max": float(np.max(np.abs(selected))),
    }


def observed_orders(hs: Sequence[float], errors: Sequence[float]) -> List[Optional[float]]:
    """log(e_i/e_{i+1}) / log(h_i/h_{i+1}); None, если ошибка нулевая."""
    orders = []
    for (h0, e0), (h1, e1) in zip(zip(hs, errors), zip(hs[1:], errors[1:])):
        if e0 > 0 and e1 > 0 and h0 != h1:
            orders.append(math.log(e0 / e1) / math.log(h0 / h1))
        else:
            orders.append(None)
    return orders


@dataclass
class ProbeRow:
    n: int
    h: float
    metrics: Dict[str, float]

    def to_dict(self) -> dict:
        row = {"n": self.n, "h": self.h}
        row.update(self.metrics)
        return row


@dataclass
class ProbeReport:
    """Измерение пробы. Суждения «прошло/не прошло» в отчёте нет."""
    probe: str
    alpha: float
    beta: Optional[float]
    metric: str
    rows: List[ProbeRow] = field(default_factory=list)
    params: Dict[str, Union[str, float]] = field(default_factory=dict)

    def add(self, n: int, h: float, **metrics: float):
        self.rows.append(ProbeRow(n, h, {k: float(v) for k, v in metrics.items()}))

    def column(self, name: str) -> List[float]:
        return [row.metrics[name] for row in self.rows]

    @property
    def observed_orders(self) -> List[Optional[float]]:
        return observed_orders([row.h for row in self.rows], [abs(v) for v in self.column(self.metric)])

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "probe": self.probe,
            "alpha": self.alpha,
            "beta": self.beta,
            "metric": self.metric,
            "params": dict(self.params),
            "rows": [row.to_dict() for row in self.rows],
            "observed_orders": self.observed_orders,
        }


def dump_json(data: dict) -> str:
    """JSON с ключами по алфавиту. Числа в кратчайшей записи, которая читается обратно без потерь."""
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False) + "\n"


def format_number(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(value)
    return f"{float(value):.{TABLE_DIGITS}g}"


def format_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Таблица с выравниванием по столбцам."""
    cells = [list(headers)] + [[format_number(v) if not isinstance(v, str) else v for v in row]
                               for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def report_table(report: ProbeReport) -> str:
    names = list(report.rows[0].metrics) if report.rows else []
    orders = [None] + report.observed_orders
    rows = [[row.n, row.h] + [row.metrics[k] for k in names] + [order]
            for row, order in zip(report.rows, orders)]
    title = f"# {report.probe}: alpha={format_number(report.alpha)}"
    if report.beta is not None:
        title += f", beta={format_number(report.beta)}"
    return title + "\n" + format_table(["n", "h"] + names + ["order"], rows)


def write_output(text: str, out: Optional[Union[str, Path]] = None):
    """Пишет в файл или в stdout."""
    if out is None:
        print(text, end="")
        return
    with open(out, 'w', encoding='utf-8') as f:
        f.write(text)
