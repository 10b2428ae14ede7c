"""
Функционалы с мерой (dt)^α (dx)^β и численные пробы тождеств.

Мера по каждой оси: α(end - ξ)^{α-1} dξ, привязанная к верхнему концу
отрезка, как у frac_integral_dxa. Веса узлов даёт трапеция-произведение:
f кусочно-линейна, ядро интегрируется точно. Двумерная мера есть тензорное
произведение. Поэтому аддитивность по подпрямоугольникам выполняется
только при α = β = 1.

Пробы (Грин, Лейбниц, цепное правило) ничего не утверждают: они
измеряют зазор и его поведение на лестнице разрешений.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import DEFAULT_LADDER, INTERIOR_MARGIN
from src.errors import GridMismatchError, UsageError
from src.fracgrid import (
    Field, FracOperator, Grid, Grid1D, Grid2D, DERIVATIVE,
    boundary_mask, build_operator, cell_size, interior_mask, make_grid, sample_field,
)
from src.fracops import Order, gamma, order_value
from src.jets import FieldLike, JetEvaluator, field_values
from src.lagexpr import Expr
from src.reports import ProbeReport, interior_norms

logger = logging.getLogger(__name__)


def axis_weights(grid: Grid1D, order: Order) -> np.ndarray:
    """
    Веса w_j: Σ w_j f(ξ_j) = ∫_a^b f(ξ) α(b - ξ)^{α-1} dξ для кусочно-линейной f.

    Σ w_j = (b - a)^α. При α = 1 это обычная трапеция.
    """
    alpha = order_value(order)
    s = grid.b - grid.nodes
    s[-1] = 0.0
    s_hi, s_lo = s[:-1], s[1:]
    a_k = s_hi ** alpha - s_lo ** alpha
    b_k = alpha / (alpha + 1.0) * (s_hi ** (alpha + 1.0) - s_lo ** (alpha + 1.0))
    weights = np.zeros(grid.n + 1)
    weights[:-1] += (b_k - s_lo * a_k) / grid.h
    weights[1:] += (s_hi * a_k - b_k) / grid.h
    return weights


@dataclass(frozen=True)
class FracMeasure:
    """(dt)^α(dx)^β на прямоугольнике или (dt)^α на отрезке с множителем 1/Γ."""
    alpha: float
    beta: float
    grid: Grid

    def __post_init__(self):
        object.__setattr__(self, 'alpha', order_value(self.alpha))
        object.__setattr__(self, 'beta', order_value(self.beta))

    @property
    def is_2d(self) -> bool:
        return isinstance(self.grid, Grid2D)

    @cached_property
    def prefactor(self) -> float:
        if self.is_2d:
            return 1.0 / (gamma(1.0 + self.alpha) * gamma(1.0 + self.beta))
        return 1.0 / gamma(1.0 + self.alpha)

    @cached_property
    def t_weights(self) -> np.ndarray:
        grid = self.grid.t_grid if self.is_2d else self.grid
        return axis_weights(grid, self.alpha)

    @cached_property
    def x_weights(self) -> np.ndarray:
        if not self.is_2d:
            raise UsageError("У одномерной меры нет оси x")
        return axis_weights(self.grid.x_grid, self.beta)

    @cached_property
    def node_weights(self) -> np.ndarray:
        if self.is_2d:
            weights = np.outer(self.t_weights, self.x_weights)
        else:
            weights = self.t_weights.copy()
        weights.setflags(write=False)
        return weights

    def weighted(self, values: np.ndarray) -> np.ndarray:
        """prefactor·w ⊙ values. Общая точка для функционала и градиента."""
        return self.prefactor * (self.node_weights * values)

    def integrate(self, values: Union[FieldLike, float]) -> float:
        if isinstance(values, (int, float)):
            values = np.full(self.grid.shape, float(values))
        values = field_values(values, self.grid)
        return float(np.sum(self.weighted(values)))


def eval_functional(lagrangian: Expr, fields: Mapping[str, FieldLike], measure: FracMeasure,
                    exogenous: Optional[Mapping[str, FieldLike]] = None,
                    params: Optional[Mapping[str, float]] = None) -> float:
    """J = prefactor ∬ L (dt)^α (dx)^β."""
    evaluator = JetEvaluator(measure.grid, measure.alpha, measure.beta, fields, exogenous, params)
    return measure.integrate(evaluator.evaluate(lagrangian))


@dataclass(frozen=True, eq=False)
class Perturbation:
    """δy = ε·η, η равна нулю на границе."""
    eta: Field
    epsilon: Optional[float] = None

    def __post_init__(self):
        if np.any(self.eta.values[boundary_mask(self.eta.grid)] != 0.0):
            raise UsageError("Возмущение η должно обращаться в ноль на границе")
        if self.epsilon is not None and not self.epsilon > 0:
            raise UsageError(f"ε должно быть положительным: {self.epsilon}")


def first_variation(lagrangian: Expr, fields: Mapping[str, FieldLike], measure: FracMeasure,
                    pert: Perturbation, wrt: str,
                    exogenous: Optional[Mapping[str, FieldLike]] = None,
                    params: Optional[Mapping[str, float]] = None) -> float:
    """(J[y + εη] - J[y - εη]) / 2ε."""
    if wrt not in fields:
        raise UsageError(f"Поле {wrt!r} не задано")
    base = field_values(fields[wrt], measure.grid, wrt)
    eta = field_values(pert.eta, measure.grid, "eta")
    epsilon = pert.epsilon
    if epsilon is None:
        epsilon = 1e-6 * max(1.0, float(np.max(np.abs(base))))

    def shifted(sign: float) -> float:
        moved = dict(fields)
        moved[wrt] = base + sign * epsilon * eta
        return eval_functional(lagrangian, moved, measure, exogenous, params)

    return (shifted(1.0) - shifted(-1.0)) / (2.0 * epsilon)


# {{{ пробы

@dataclass(frozen=True)
class GreenResult:
    lhs: float
    rhs: float

    @property
    def gap(self) -> float:
        return self.lhs - self.rhs


def green_probe(p: FieldLike, q: FieldLike, measure: FracMeasure) -> GreenResult:
    """
    Формула Грина на прямоугольнике.

    LHS = prefactor ∬ (D_t^α Q - D_x^β P) (dt)^α (dx)^β,
    RHS = 1/Γ(1+β) ∫ [Q(b,x) - Q(a,x)] (dx)^β - 1/Γ(1+α) ∫ [P(t,d) - P(t,c)] (dt)^α.
    """
    if not measure.is_2d:
        raise GridMismatchError("Проба Грина требует двумерной сетки")
    grid = measure.grid
    p_values = field_values(p, grid, "P")
    q_values = field_values(q, grid, "Q")
    evaluator = JetEvaluator(grid, measure.alpha, measure.beta, {})
    integrand = evaluator.derivative(q_values, "t", 1) - evaluator.derivative(p_values, "x", 1)
    lhs = measure.integrate(integrand)
    q_edges = np.dot(measure.x_weights, q_values[-1, :] - q_values[0, :]) / gamma(1.0 + measure.beta)
    p_edges = np.dot(measure.t_weights, p_values[:, -1] - p_values[:, 0]) / gamma(1.0 + measure.alpha)
    return GreenResult(lhs, float(q_edges - p_edges))


@dataclass(frozen=True, eq=False)
class ResidualResult:
    residual: Field
    l2: float
    max: float


def _residual_result(op: FracOperator, residual: np.ndarray,
                     margin: int = INTERIOR_MARGIN) -> ResidualResult:
    field = Field(op.grid, residual)
    norms = interior_norms(residual, interior_mask(op.grid, margin), cell_size(op.grid))
    return ResidualResult(field, norms["l2"], norms["max"])


def _check_line(op: FracOperator, *fields: FieldLike) -> Tuple[np.ndarray, ...]:
    return tuple(field_values(f, op.grid) for f in fields)


def leibniz_probe(f: FieldLike, g: FieldLike, op: FracOperator) -> ResidualResult:
    """r = D(fg) - f·Dg - g·Df."""
    f_values, g_values = _check_line(op, f, g)
    residual = (op.apply_values(f_values * g_values)
                - f_values * op.apply_values(g_values)
                - g_values * op.apply_values(f_values))
    return _residual_result(op, residual)


OUTER_FUNCTIONS = {
    "square_half": (lambda u: 0.5 * u ** 2, lambda u: u),
    "sin": (np.sin, np.cos),
    "cos": (np.cos, lambda u: -np.sin(u)),
    "exp": (np.exp, np.exp),
}


def chainrule_probe(u: FieldLike, op: FracOperator, outer: str = "square_half") -> ResidualResult:
    """r = D(h(u)) - h'(u)·Du."""
    if outer not in OUTER_FUNCTIONS:
        raise UsageError(f"Неизвестная внешняя функция {outer!r}. Доступны: {', '.join(OUTER_FUNCTIONS)}")
    h, dh = OUTER_FUNCTIONS[outer]
    (u_values,) = _check_line(op, u)
    residual = op.apply_values(h(u_values)) - dh(u_values) * op.apply_values(u_values)
    return _residual_result(op, residual)


def green_ladder(p: Callable, q: Callable, alpha: Order, beta: Order,
                 bounds: Tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0),
                 ladder: Sequence[int] = DEFAULT_LADDER) -> ProbeReport:
    """Проба Грина на сетках n×n. p, q: функции (t, x)."""
    a, b, c, d = bounds
    report = ProbeReport("green", order_value(alpha), order_value(beta), metric="gap")
    for n in ladder:
        grid = Grid2D(make_grid(a, b, n), make_grid(c, d, n))
        measure = FracMeasure(alpha, beta, grid)
        result = green_probe(sample_field(p, grid), sample_field(q, grid), measure)
        report.add(n, grid.t_grid.h, lhs=result.lhs, rhs=result.rhs, gap=result.gap)
        logger.debug(f"Грин n={n}: зазор {result.gap:.3e}")
    logger.info(f"Проба Грина: {len(report.rows)} разрешений")
    return report


def _line_ladder(name: str, alpha: Order, interval: Tuple[float, float],
                 ladder: Sequence[int], probe: Callable[[Grid1D, FracOperator], ResidualResult]) -> ProbeReport:
    report = ProbeReport(name, order_value(alpha), None, metric="l2")
    for n in ladder:
        grid = make_grid(interval[0], interval[1], n)
        op = build_operator(alpha, DERIVATIVE, grid)
        result = probe(grid, op)
        report.add(n, grid.h, l2=result.l2, max=result.max)
    logger.info(f"Проба {name}: {len(report.rows)} разрешений")
    return report


def leibniz_ladder(f: Callable, g: Callable, alpha: Order,
                   interval: Tuple[float, float] = (0.0, 1.0),
                   ladder: Sequence[int] = DEFAULT_LADDER) -> ProbeReport:
    return _line_ladder(
        "leibniz", alpha, interval, ladder,
        lambda grid, op: leibniz_probe(sample_field(f, grid), sample_field(g, grid), op),
    )


def chainrule_ladder(u: Callable, alpha: Order, outer: str = "square_half",
                     interval: Tuple[float, float] = (0.0, 1.0),
                     ladder: Sequence[int] = DEFAULT_LADDER) -> ProbeReport:
    report = _line_ladder(
        "chain", alpha, interval, ladder,
        lambda grid, op: chainrule_probe(sample_field(u, grid), op, outer),
    )
    report.params["outer"] = outer
    return report

# }}}
