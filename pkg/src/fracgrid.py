"""
Равномерные сетки, поля и дискретные дробные операторы.

Оператор: сдвинутая схема Грюнвальда–Летникова: нижнетреугольная
тёплицева свёртка, которая для производной применяется к f - f(a).
Сдвиг делает производную константы точно нулевой. D^{kα} собирается
композицией k операторов порядка α, а не одним оператором порядка kα.

Поля на двумерной сетке хранятся построчно: values[i, j] = y(t_i, x_j).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Tuple, Union

import numpy as np
import scipy.linalg

from src.config import MAX_MULTIPLICITY, INTERIOR_MARGIN
from src.errors import DomainError, GridMismatchError, EvaluationError, UsageError
from src.fracops import Order, order_value

logger = logging.getLogger(__name__)

DERIVATIVE = "derivative"
INTEGRAL = "integral"
AXES = ("t", "x")


@dataclass(frozen=True)
class Grid1D:
    """Равномерная сетка a = x_0 < ... < x_n = b."""
    a: float
    b: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a >= self.b:
            raise DomainError(f"Неверный интервал [{self.a}, {self.b}]")
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"Нужно не меньше 2 интервалов, получено n={self.n}")
        object.__setattr__(self, 'n', int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return self.a + np.arange(self.n + 1) * self.h

    @property
    def shape(self) -> Tuple[int]:
        return (self.n + 1,)


@dataclass(frozen=True)
class Grid2D:
    """Прямоугольник a <= t <= b, c <= x <= d."""
    t_grid: Grid1D
    x_grid: Grid1D

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.t_grid.n + 1, self.x_grid.n + 1)

    def axis_grid(self, axis: str) -> Grid1D:
        if axis == "t":
            return self.t_grid
        if axis == "x":
            return self.x_grid
        raise UsageError(f"Неизвестная ось: {axis}")

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.t_grid.nodes, self.x_grid.nodes, indexing='ij')


Grid = Union[Grid1D, Grid2D]


def make_grid(a: float, b: float, n: int) -> Grid1D:
    return Grid1D(float(a), float(b), n)


def make_grid2d(a: float, b: float, n_t: int, c: float, d: float, n_x: int) -> Grid2D:
    return Grid2D(make_grid(a, b, n_t), make_grid(c, d, n_x))


@dataclass(frozen=True, eq=False)
class Field:
    """Значения в узлах сетки. Массив копируется и замораживается."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridMismatchError(
                f"Форма значений {values.shape} не совпадает с сеткой {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise EvaluationError("Поле содержит нечисловые значения")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def interior_values(self, margin: int = INTERIOR_MARGIN) -> np.ndarray:
        return self.values[interior_mask(self.grid, margin)]


def sample_field(f: Callable, grid: Grid) -> Field:
    """Значения f в узлах: f(x) для 1D, f(t, x) для 2D."""
    if isinstance(grid, Grid2D):
        t, x = grid.mesh()
        raw = f(t, x)
    else:
        raw = f(grid.nodes)
    values = np.asarray(raw, dtype=float)
    if values.shape != grid.shape:
        values = np.broadcast_to(values, grid.shape)
    if not np.all(np.isfinite(values)):
        raise EvaluationError("Нечисловое значение при выборке поля")
    return Field(grid, values)


def interior_mask(grid: Grid, margin: int = INTERIOR_MARGIN) -> np.ndarray:
    """True в узлах, отстоящих от каждой границы не меньше чем на margin ячеек."""
    grids = (grid.t_grid, grid.x_grid) if isinstance(grid, Grid2D) else (grid,)
    masks = []
    for g in grids:
        idx = np.arange(g.n + 1)
        masks.append((idx >= margin) & (idx <= g.n - margin))
    if len(masks) == 1:
        return masks[0]
    return masks[0][:, None] & masks[1][None, :]


def boundary_mask(grid: Grid) -> np.ndarray:
    """True в граничных узлах."""
    return ~interior_mask(grid, 1)


# {{{ операторы

def gl_coefficients(order: float, count: int) -> np.ndarray:
    """(-1)^k·binom(order, k) по рекуррентности w_k = w_{k-1}(k - 1 - order)/k."""
    w = np.empty(count)
    w[0] = 1.0
    for k in range(1, count):
        w[k] = w[k - 1] * (k - 1 - order) / k
    return w


def _causal(weights: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.convolve(weights, z)[:z.size]


def _anticausal(weights: np.ndarray, z: np.ndarray) -> np.ndarray:
    return _causal(weights, z[::-1])[::-1]


@dataclass(frozen=True, eq=False)
class FracOperator:
    """Левый дискретный дробный оператор на одномерной сетке."""
    order: float
    kind: str
    grid: Grid1D
    weights: np.ndarray = field(repr=False)
    shift_flag: bool

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        z = np.asarray(values, dtype=float)
        if self.shift_flag:
            z = z - z[0]
        return _causal(self.weights, z)

    def adjoint_values(self, values: np.ndarray) -> np.ndarray:
        v = _anticausal(self.weights, np.asarray(values, dtype=float))
        if self.shift_flag:
            # транспонирование поправки ранга один от вычитания f(a)
            v = v.copy()
            v[0] -= v.sum()
        return v

    def matrix(self) -> np.ndarray:
        """Плотная матрица оператора."""
        size = self.grid.n + 1
        dense = scipy.linalg.toeplitz(self.weights, np.zeros(size))
        if self.shift_flag:
            dense[:, 0] -= dense.sum(axis=1)
        return dense


def build_operator(order: Order, kind: str, grid: Grid1D) -> FracOperator:
    """
    Сдвинутый оператор Грюнвальда–Летникова.

    derivative: h^{-α} Σ_k (-1)^k binom(α, k) (f_{i-k} - f_0);
    integral:   h^{α}  Σ_k (-1)^k binom(-α, k) f_{i-k}.
    """
    alpha = order_value(order)
    if kind == DERIVATIVE:
        weights = gl_coefficients(alpha, grid.n + 1) * grid.h ** (-alpha)
        shift = True
    elif kind == INTEGRAL:
        weights = gl_coefficients(-alpha, grid.n + 1) * grid.h ** alpha
        shift = False
    else:
        raise UsageError(f"Неизвестный вид оператора: {kind}")
    weights.setflags(write=False)
    logger.debug(f"Оператор {kind}: порядок={alpha}, n={grid.n}")
    return FracOperator(alpha, kind, grid, weights, shift)


def _check_grid(op: FracOperator, f: Field):
    if not isinstance(f.grid, Grid1D) or f.grid != op.grid:
        raise GridMismatchError("Сетка поля не совпадает с сеткой оператора")


def apply_operator(op: FracOperator, f: Field) -> Field:
    """Причинная свёртка: выход в x_i зависит только от входов в x_j, j <= i."""
    _check_grid(op, f)
    return Field(f.grid, op.apply_values(f.values))


def apply_adjoint(op: FracOperator, f: Field) -> Field:
    """Точное транспонирование матрицы оператора."""
    _check_grid(op, f)
    return Field(f.grid, op.adjoint_values(f.values))


@dataclass(frozen=True)
class OperatorPipeline:
    """k-кратная композиция оператора: обозначение D^{kα} := D^α ... D^α."""
    op: FracOperator
    k: int

    @property
    def grid(self) -> Grid1D:
        return self.op.grid

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        out = np.asarray(values, dtype=float)
        for _ in range(self.k):
            out = self.op.apply_values(out)
        return out

    def adjoint_values(self, values: np.ndarray) -> np.ndarray:
        out = np.asarray(values, dtype=float)
        for _ in range(self.k):
            out = self.op.adjoint_values(out)
        return out

    def apply(self, f: Field) -> Field:
        _check_grid(self.op, f)
        return Field(f.grid, self.apply_values(f.values))

    def adjoint(self, f: Field) -> Field:
        _check_grid(self.op, f)
        return Field(f.grid, self.adjoint_values(f.values))

    def matrix(self) -> np.ndarray:
        return np.linalg.matrix_power(self.op.matrix(), self.k)


def compose_order(op: FracOperator, k: int) -> OperatorPipeline:
    if int(k) != k or not 1 <= k <= MAX_MULTIPLICITY:
        raise UsageError(f"Кратность композиции должна быть от 1 до {MAX_MULTIPLICITY}: {k}")
    return OperatorPipeline(op, int(k))


def _axis_index(grid: Grid2D, axis: str) -> int:
    if axis == "t":
        return 0
    if axis == "x":
        return 1
    raise UsageError(f"Неизвестная ось: {axis}")


def apply_values_along_axis(op: Union[FracOperator, OperatorPipeline], values: np.ndarray,
                            axis: int, adjoint: bool = False) -> np.ndarray:
    """Применяет одномерный оператор к каждой линии массива вдоль axis."""
    func = op.adjoint_values if adjoint else op.apply_values
    return np.apply_along_axis(func, axis, np.asarray(values, dtype=float))


def apply_along_axis(op: Union[FracOperator, OperatorPipeline], f: Field, axis: str) -> Field:
    """Оператор по t или по x независимо на каждой линии двумерного поля."""
    if not isinstance(f.grid, Grid2D):
        raise GridMismatchError("apply_along_axis ожидает двумерное поле")
    index = _axis_index(f.grid, axis)
    if op.grid != f.grid.axis_grid(axis):
        raise GridMismatchError(f"Сетка оператора не совпадает с осью {axis}")
    return Field(f.grid, apply_values_along_axis(op, f.values, index))

# }}}


def cell_size(grid: Grid) -> float:
    """Площадь ячейки (длина шага для 1D)."""
    if isinstance(grid, Grid2D):
        return grid.t_grid.h * grid.x_grid.h
    return grid.h
