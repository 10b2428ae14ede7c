"""
Невязка Эйлера-Лагранжа на выборках полей и точный градиент дискретного действия.

Невязка: формула с левыми производными:

    ∂L/∂y + Σ_m (-1)^m D_t^{mα}(∂L/∂D_t^{mα}y) + Σ_n (-1)^n D_x^{nβ}(∂L/∂D_x^{nβ}y).

Градиент: производная квадратурного функционала по значениям поля в узлах,
операторы входят транспонированными. Вывод первой формулы из второй опирается
на дробное правило Лейбница, поэтому их расхождение измеряется, а не
предполагается нулевым.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Mapping, Optional, Sequence

import numpy as np

from src.config import DEFAULT_LADDER, INTERIOR_MARGIN
from src.errors import UsageError
from src.fracgrid import Field, Grid, Grid2D, boundary_mask, interior_mask, make_grid, sample_field
from src.fracops import order_value
from src.functional import FracMeasure
from src.jets import FieldLike, JetEvaluator
from src.lagexpr import Exo, Expr, JetVar, jet_vars, partial_jet, placeholders, symbols
from src.reports import ProbeReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ELProblem:
    """Лагранжиан, поля на общей сетке и порядки по t и x."""
    lagrangian: Expr
    fields: Mapping[str, FieldLike]
    alpha: float
    beta: float
    grid: Grid
    exogenous: Mapping[str, FieldLike] = field(default_factory=dict)
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'alpha', order_value(self.alpha))
        object.__setattr__(self, 'beta', order_value(self.beta))
        holes = placeholders(self.lagrangian)
        if holes:
            raise UsageError(f"В лагранжиане остались неизвестные члены: {', '.join(sorted(holes))}")
        missing = {v.field_name for v in jet_vars(self.lagrangian)} - set(self.fields)
        if missing:
            raise UsageError(f"Поля не заданы: {', '.join(sorted(missing))}")
        missing = symbols(self.lagrangian, Exo) - set(self.exogenous)
        if missing:
            raise UsageError(f"Заданные функции не заданы: {', '.join(sorted(missing))}")
        if not isinstance(self.grid, Grid2D):
            derived = [v for v in jet_vars(self.lagrangian) if v.axis == "x"]
            if derived:
                raise UsageError(f"На одномерной сетке производные по x недоступны: {derived[0]}")

    @cached_property
    def evaluator(self) -> JetEvaluator:
        return JetEvaluator(self.grid, self.alpha, self.beta, self.fields, self.exogenous, self.params)

    @cached_property
    def measure(self) -> FracMeasure:
        return FracMeasure(self.alpha, self.beta, self.grid)

    def derived_vars(self, wrt: str):
        """Струйные переменные поля wrt с операторами, по оси и кратности."""
        if wrt not in self.fields:
            raise UsageError(f"Поле {wrt!r} не объявлено")
        found = [v for v in jet_vars(self.lagrangian) if v.field_name == wrt and v.multiplicity]
        return sorted(found, key=lambda v: (v.axis, v.multiplicity))

    def resampled(self, n: int, sources: Mapping[str, Callable]) -> "ELProblem":
        """Та же задача на сетке с n интервалами по каждой оси."""
        if isinstance(self.grid, Grid2D):
            t, x = self.grid.t_grid, self.grid.x_grid
            grid = Grid2D(make_grid(t.a, t.b, n), make_grid(x.a, x.b, n))
        else:
            grid = make_grid(self.grid.a, self.grid.b, n)
        names = set(self.fields) | set(self.exogenous)
        missing = names - set(sources)
        if missing:
            raise UsageError(f"Нет источников для: {', '.join(sorted(missing))}")
        fields = {name: sample_field(sources[name], grid) for name in self.fields}
        exogenous = {name: sample_field(sources[name], grid) for name in self.exogenous}
        return ELProblem(self.lagrangian, fields, self.alpha, self.beta, grid, exogenous, self.params)


def el_residual(p: ELProblem, wrt: str) -> Field:
    """∂L/∂y + Σ (-1)^m D^m(∂L/∂D^m y) во всех узлах."""
    derived = p.derived_vars(wrt)
    evaluator = p.evaluator
    residual = evaluator.evaluate(partial_jet(p.lagrangian, JetVar(wrt)))
    for var in derived:
        inner = evaluator.evaluate(partial_jet(p.lagrangian, var))
        term = evaluator.derivative(inner, var.axis, var.multiplicity)
        if var.multiplicity % 2:
            residual = residual - term
        else:
            residual = residual + term
    return Field(p.grid, residual)


def discrete_gradient(p: ELProblem, wrt: str, mask: Optional[np.ndarray] = None) -> Field:
    """
    ∂J/∂y_k дискретного функционала. В узлах mask (по умолчанию граница)
    градиент равен нулю.
    """
    derived = p.derived_vars(wrt)
    evaluator = p.evaluator
    measure = p.measure
    gradient = measure.weighted(evaluator.evaluate(partial_jet(p.lagrangian, JetVar(wrt))))
    for var in derived:
        inner = measure.weighted(evaluator.evaluate(partial_jet(p.lagrangian, var)))
        gradient = gradient + evaluator.adjoint(inner, var.axis, var.multiplicity)
    mask = boundary_mask(p.grid) if mask is None else np.asarray(mask, dtype=bool)
    gradient = np.where(mask, 0.0, gradient)
    return Field(p.grid, gradient)


def _relative(difference: np.ndarray, reference: np.ndarray, ord) -> float:
    scale = np.linalg.norm(reference, ord)
    value = np.linalg.norm(difference, ord)
    if scale == 0.0:
        return float(value)
    return float(value / scale)


def discrepancy(p: ELProblem, wrt: str, margin: int = INTERIOR_MARGIN) -> Dict[str, float]:
    """Относительное расхождение prefactor·w⊙(невязка) и градиента во внутренних узлах."""
    inside = interior_mask(p.grid, margin)
    weighted = p.measure.weighted(el_residual(p, wrt).values)[inside]
    gradient = discrete_gradient(p, wrt).values[inside]
    diff = weighted - gradient
    return {
        "l2": _relative(diff, gradient, 2),
        "max": _relative(diff, gradient, np.inf),
    }


def el_discrepancy_probe(p: ELProblem, wrt: str,
                         sources: Optional[Mapping[str, Callable]] = None,
                         ladder: Sequence[int] = DEFAULT_LADDER) -> ProbeReport:
    """
    Расхождение двух форм уравнения Эйлера-Лагранжа по лестнице разрешений.

    Без sources задача меряется только на своей сетке.
    """
    report = ProbeReport("el-discrepancy", p.alpha, p.beta if isinstance(p.grid, Grid2D) else None,
                         metric="l2", params={"wrt": wrt})
    problems = [p] if sources is None else [p.resampled(n, sources) for n in ladder]
    for problem in problems:
        grid = problem.grid
        line = grid.t_grid if isinstance(grid, Grid2D) else grid
        metrics = discrepancy(problem, wrt)
        report.add(line.n, line.h, **metrics)
        logger.debug(f"EL-расхождение n={line.n}: l2={metrics['l2']:.3e}")
    logger.info(f"Проба EL-расхождения по {wrt!r}: {len(report.rows)} разрешений")
    return report
