"""
Значения струйных переменных на сетке.

D[y,t,m] считается композицией m дискретных операторов порядка α по оси t,
D[y,x,n] означает n операторов порядка β по оси x. На одномерной сетке обе оси
совпадают с единственной, различаются только порядки.
"""
import logging
from typing import Dict, Mapping, Optional, Union

import numpy as np

from src.errors import GridMismatchError, UnboundSymbolError, UsageError
from src.fracgrid import (
    DERIVATIVE, Field, FracOperator, Grid, Grid1D, Grid2D,
    apply_values_along_axis, build_operator, compose_order,
)
from src.fracops import Order, order_value
from src.lagexpr import COORDINATES, Expr, JetVar, evaluate, jet_vars, symbols, Exo, Param

logger = logging.getLogger(__name__)

FieldLike = Union[Field, np.ndarray]


def field_values(value: FieldLike, grid: Grid, name: str = "поле") -> np.ndarray:
    """Массив значений поля с проверкой сетки."""
    if isinstance(value, Field):
        if value.grid != grid:
            raise GridMismatchError(f"{name}: сетка поля не совпадает с сеткой задачи")
        return value.values
    values = np.asarray(value, dtype=float)
    if values.shape != grid.shape:
        raise GridMismatchError(f"{name}: форма {values.shape} вместо {grid.shape}")
    return values


class JetEvaluator:
    """Струйные переменные полей на одной сетке с кешем операторов."""

    def __init__(self, grid: Grid, alpha: Order, beta: Order,
                 fields: Mapping[str, FieldLike],
                 exogenous: Optional[Mapping[str, FieldLike]] = None,
                 params: Optional[Mapping[str, float]] = None):
        self.grid = grid
        self.alpha = order_value(alpha)
        self.beta = order_value(beta)
        self.fields = {name: field_values(v, grid, name) for name, v in fields.items()}
        self.exogenous = {name: field_values(v, grid, name) for name, v in (exogenous or {}).items()}
        self.params = dict(params or {})
        self._operators: Dict[str, FracOperator] = {}
        self._jets: Dict[JetVar, np.ndarray] = {}

    def operator(self, axis: str) -> FracOperator:
        if axis not in self._operators:
            if axis == "t":
                order = self.alpha
            elif axis == "x":
                order = self.beta
            else:
                raise UsageError(f"Неизвестная ось: {axis}")
            self._operators[axis] = build_operator(order, DERIVATIVE, self._axis_grid(axis))
            logger.debug(f"Оператор по оси {axis}: порядок {order}, {self._operators[axis].grid.n + 1} узлов")
        return self._operators[axis]

    def _axis_grid(self, axis: str) -> Grid1D:
        if isinstance(self.grid, Grid2D):
            return self.grid.axis_grid(axis)
        return self.grid

    def _axis_index(self, axis: str) -> int:
        if isinstance(self.grid, Grid2D):
            return COORDINATES.index(axis)
        return 0

    def derivative(self, values: np.ndarray, axis: str, m: int) -> np.ndarray:
        """D_axis^{m·порядок} массива значений."""
        pipeline = compose_order(self.operator(axis), m)
        return apply_values_along_axis(pipeline, values, self._axis_index(axis))

    def adjoint(self, values: np.ndarray, axis: str, m: int) -> np.ndarray:
        """Транспонированный D_axis^{m·порядок}."""
        pipeline = compose_order(self.operator(axis), m)
        return apply_values_along_axis(pipeline, values, self._axis_index(axis), adjoint=True)

    def jet_value(self, var: JetVar) -> np.ndarray:
        if var not in self._jets:
            if var.field_name not in self.fields:
                raise UnboundSymbolError(f"Поле {var.field_name!r} не задано")
            base = self.fields[var.field_name]
            if var.multiplicity == 0:
                self._jets[var] = base
            else:
                self._jets[var] = self.derivative(base, var.axis, var.multiplicity)
        return self._jets[var]

    def coordinates(self) -> Dict[str, np.ndarray]:
        if isinstance(self.grid, Grid2D):
            t, x = self.grid.mesh()
            return {"t": t, "x": x}
        nodes = self.grid.nodes
        return {"t": nodes, "x": nodes}

    def bindings(self, expr: Expr) -> Dict:
        bound: Dict = self.coordinates()
        for var in jet_vars(expr):
            bound[var] = self.jet_value(var)
        for name in symbols(expr, Exo):
            if name not in self.exogenous:
                raise UnboundSymbolError(f"Заданная функция {name!r} не задана")
            bound[name] = self.exogenous[name]
        for name in symbols(expr, Param):
            if name not in self.params:
                raise UnboundSymbolError(f"Параметр {name!r} не задан")
            bound[name] = self.params[name]
        return bound

    def evaluate(self, expr: Expr) -> np.ndarray:
        """Выражение во всех узлах сетки."""
        value = evaluate(expr, self.bindings(expr))
        return np.broadcast_to(np.asarray(value, dtype=float), self.grid.shape).copy()
