"""
Поля в CSV.

    # fravar-field v1, axes=2, a=0, b=1, n=32, c=0, d=1, m=32, alpha=0.5, beta=0.5
    t,x,value
    0,0,1.0
    ...

Строки идут по t, внутри по x. Числа пишутся с 17 значащими цифрами.
"""
import csv
import io
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.config import FIELD_FORMAT, JSON_DIGITS
from src.errors import FieldFormatError, FravarError
from src.fracgrid import Field, Grid, Grid2D, make_grid

logger = logging.getLogger(__name__)


def _number(value: float) -> str:
    return f"{float(value):.{JSON_DIGITS}g}"


def format_field(f: Field, alpha: Optional[float] = None, beta: Optional[float] = None) -> str:
    grid = f.grid
    if isinstance(grid, Grid2D):
        t, x = grid.t_grid, grid.x_grid
        meta = [("axes", "2"), ("a", _number(t.a)), ("b", _number(t.b)), ("n", str(t.n)),
                ("c", _number(x.a)), ("d", _number(x.b)), ("m", str(x.n))]
    else:
        meta = [("axes", "1"), ("a", _number(grid.a)), ("b", _number(grid.b)), ("n", str(grid.n))]
    if alpha is not None:
        meta.append(("alpha", _number(alpha)))
    if beta is not None:
        meta.append(("beta", _number(beta)))

    buffer = io.StringIO()
    buffer.write(f"# {FIELD_FORMAT}, " + ", ".join(f"{k}={v}" for k, v in meta) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    if isinstance(grid, Grid2D):
        writer.writerow(["t", "x", "value"])
        tt, xx = grid.mesh()
        for t_value, x_value, value in zip(tt.ravel(), xx.ravel(), f.values.ravel()):
            writer.writerow([_number(t_value), _number(x_value), _number(value)])
    else:
        writer.writerow(["x", "value"])
        for x_value, value in zip(grid.nodes, f.values):
            writer.writerow([_number(x_value), _number(value)])
    return buffer.getvalue()


def write_field(path: Union[str, Path], f: Field, alpha: Optional[float] = None,
                beta: Optional[float] = None):
    with open(path, 'w', encoding='utf-8', newline='') as out:
        out.write(format_field(f, alpha, beta))
    logger.info(f"Поле записано: {path}")


def _parse_header(line: str) -> Dict[str, str]:
    prefix = f"# {FIELD_FORMAT}"
    if not line.startswith(prefix):
        raise FieldFormatError(f"Ожидался заголовок '{prefix}', получено {line.strip()!r}")
    meta = {}
    for item in line[len(prefix):].split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise FieldFormatError(f"Неверный элемент заголовка: {item!r}")
        key, value = item.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def _grid_from_meta(meta: Dict[str, str]) -> Grid:
    try:
        axes = int(meta["axes"])
        line = make_grid(float(meta["a"]), float(meta["b"]), int(meta["n"]))
        if axes == 1:
            return line
        if axes == 2:
            return Grid2D(line, make_grid(float(meta["c"]), float(meta["d"]), int(meta["m"])))
    except KeyError as e:
        raise FieldFormatError(f"В заголовке нет ключа {e}")
    except FravarError as e:
        raise FieldFormatError(f"Неверная сетка в заголовке: {e}")
    except ValueError as e:
        raise FieldFormatError(f"Неверное число в заголовке: {e}")
    raise FieldFormatError(f"axes должно быть 1 или 2: {meta['axes']}")


def parse_field(text: str) -> Tuple[Field, Dict[str, float]]:
    """Поле и порядки из заголовка (если есть)."""
    lines = text.splitlines()
    if len(lines) < 2:
        raise FieldFormatError("Файл поля пуст")
    meta = _parse_header(lines[0])
    grid = _grid_from_meta(meta)
    columns = ["t", "x", "value"] if isinstance(grid, Grid2D) else ["x", "value"]

    reader = csv.reader(lines[1:])
    header = next(reader)
    if [h.strip() for h in header] != columns:
        raise FieldFormatError(f"Ожидались столбцы {','.join(columns)}, получено {','.join(header)}")
    try:
        rows = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    except ValueError as e:
        raise FieldFormatError(f"Нечисловое значение в строке данных: {e}")

    expected = int(np.prod(grid.shape))
    if rows.shape != (expected, len(columns)):
        raise FieldFormatError(f"Ожидалось {expected} строк по {len(columns)} значения")
    if isinstance(grid, Grid2D):
        tt, xx = grid.mesh()
        nodes = np.column_stack([tt.ravel(), xx.ravel()])
    else:
        nodes = grid.nodes[:, None]
    if not np.allclose(rows[:, :-1], nodes, rtol=1e-12, atol=1e-12):
        raise FieldFormatError("Координаты узлов не совпадают с сеткой из заголовка")

    try:
        field = Field(grid, rows[:, -1].reshape(grid.shape))
    except FravarError as e:
        raise FieldFormatError(str(e))
    orders = {k: float(meta[k]) for k in ("alpha", "beta") if k in meta}
    return field, orders


def read_field(path: Union[str, Path]) -> Tuple[Field, Dict[str, float]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FieldFormatError(f"Не удалось прочитать {path}: {e}")
    return parse_field(text)
