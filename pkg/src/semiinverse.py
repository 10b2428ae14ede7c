"""
Полуобратный метод: пробный лагранжиан с неизвестным членом, ограничения
на потенциал φ, подбор недостающего члена и проверка, что уравнение
Эйлера-Лагранжа по φ даёт исходное уравнение в консервативной форме.

Подбор идёт в струйной записи: производные φ из ограничений подставляются
алгебраически, численные операторы нужны только для значений u и его
производных в узлах выборки.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.config import INTERIOR_MARGIN, MIN_SAMPLES, ZERO_COEFFICIENT
from src.errors import RankDeficientError, UsageError
from src.eulagrange import ELProblem, el_residual
from src.fracgrid import (
    INTEGRAL, Field, Grid, Grid2D, apply_values_along_axis, build_operator,
    cell_size, interior_mask,
)
from src.fracops import Order, order_value
from src.functional import FracMeasure, eval_functional
from src.jets import FieldLike, JetEvaluator, field_values
from src.lagexpr import (
    ZERO, BinOp, Const, Expr, JetVar, format_expr, jet_vars, placeholders,
    shift_jet, substitute, variational_derivative,
)
from src.reports import dump_json, interior_norms
from src.systems import SystemFixture, builtin_system

logger = logging.getLogger(__name__)

__all__ = [
    "builtin_system", "potential_from_field", "constraint_residual", "MonomialAnsatz",
    "default_ansatz", "SampleSet", "constraint_consistent_samples", "identify_completion",
    "completion_from_coefficients", "verify_el_recovery", "target_residual", "export_fixture",
]


def _x_line(grid: Grid):
    if isinstance(grid, Grid2D):
        return grid.x_grid, 1
    return grid, 0


def potential_from_field(u: Field, beta: Order) -> Field:
    """
    φ = I^β u по каждой линии x, φ(c) = 0.

    Значение u в первом узле не участвует: тогда дискретная D^β от φ
    совпадает с u во всех узлах, кроме первого.
    """
    line, axis = _x_line(u.grid)
    op = build_operator(beta, INTEGRAL, line)
    values = np.array(u.values, dtype=float)
    first = [slice(None)] * values.ndim
    first[axis] = 0
    values[tuple(first)] = 0.0
    return Field(u.grid, apply_values_along_axis(op, values, axis))


# {{{ ограничения

@dataclass(frozen=True, eq=False)
class ConstraintCheck:
    constraint: str
    residual: Field
    l2: float
    max: float


def constraint_residual(fixture: SystemFixture, u: FieldLike, phi: FieldLike,
                        F: Optional[FieldLike], measure: FracMeasure,
                        margin: int = INTERIOR_MARGIN) -> List[ConstraintCheck]:
    """Невязки D φ - rhs для каждого ограничения во внутренних узлах."""
    if not fixture.constraints:
        raise UsageError(f"У системы {fixture.name!r} нет ограничений на потенциал")
    exogenous = {"F": F} if F is not None and "F" in fixture.exogenous else {}
    evaluator = JetEvaluator(measure.grid, measure.alpha, measure.beta,
                             {"u": u, "phi": phi}, exogenous, fixture.params)
    inside = interior_mask(measure.grid, margin)
    checks = []
    for constraint in fixture.constraints:
        residual = evaluator.jet_value(constraint.jet) - evaluator.evaluate(fixture.parse(constraint.rhs))
        norms = interior_norms(residual, inside, cell_size(measure.grid))
        checks.append(ConstraintCheck(
            f"{constraint.jet} = {constraint.rhs}",
            Field(measure.grid, residual), norms["l2"], norms["max"],
        ))
    return checks


def _potential_substitutions(fixture: SystemFixture, expr: Expr) -> Dict[JetVar, Expr]:
    """D[phi,axis,k] -> D_axis^{k-m}(rhs) для ограничения D[phi,axis,m] = rhs."""
    mapping = {}
    potential = fixture.wrt
    for var in jet_vars(expr):
        if var.field_name != potential:
            continue
        found = [c for c in fixture.constraints
                 if c.jet.axis == var.axis and c.jet.multiplicity <= var.multiplicity]
        if var.multiplicity == 0 or not found:
            raise UsageError(f"Ограничения не определяют {var}")
        constraint = max(found, key=lambda c: c.jet.multiplicity)
        rhs = fixture.parse(constraint.rhs)
        mapping[var] = shift_jet(rhs, var.axis, var.multiplicity - constraint.jet.multiplicity)
    return mapping

# }}}


# {{{ подбор

@dataclass(frozen=True)
class MonomialAnsatz:
    labels: Tuple[str, ...]
    basis: Tuple[Expr, ...]

    def __post_init__(self):
        if not self.basis:
            raise UsageError("Пустой базис")
        if len(self.labels) != len(self.basis):
            raise UsageError("Число меток не совпадает с числом мономов")

    @classmethod
    def from_texts(cls, fixture: SystemFixture, texts: Sequence[str]) -> "MonomialAnsatz":
        basis = tuple(fixture.parse(text) for text in texts)
        for text, expr in zip(texts, basis):
            if any(v.field_name == fixture.wrt for v in jet_vars(expr)):
                raise UsageError(f"Моном {text!r} зависит от потенциала {fixture.wrt}")
        return cls(tuple(texts), basis)


def default_ansatz(fixture: SystemFixture) -> MonomialAnsatz:
    """u, u^2, u^3, F*u (если есть F), u*D[u,x,2]."""
    texts = ["u", "u^2", "u^3"]
    if "F" in fixture.exogenous:
        texts.append("F*u")
    texts.append("u*D[u,x,2]")
    return MonomialAnsatz.from_texts(fixture, texts)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Поля, согласованные с ограничениями."""
    grid: Grid
    alpha: float
    beta: float
    u: Field
    phi: Field
    F: Optional[Field] = None

    @property
    def measure(self) -> FracMeasure:
        return FracMeasure(self.alpha, self.beta, self.grid)


def constraint_consistent_samples(fixture: SystemFixture, grid: Grid2D, alpha: Order, beta: Order,
                                  count: int = MIN_SAMPLES, seed: int = 0,
                                  degree: Tuple[int, int] = (2, 4)) -> List[SampleSet]:
    """
    Случайный многочлен φ(t, x), u := D_x^β φ, F := D_t^α φ - u²/2.

    Для КдФ второе ограничение связывает u и φ уравнением, конструктивно
    оно не выполняется; выборка согласована только с D_x^β φ = u.
    """
    if not isinstance(grid, Grid2D):
        raise UsageError("Выборки строятся на двумерной сетке")
    rng = np.random.default_rng(seed)
    t, x = grid.mesh()
    samples = []
    for _ in range(count):
        coefficients = rng.normal(size=(degree[0] + 1, degree[1] + 1))
        phi_values = np.polynomial.polynomial.polyval2d(t, x, coefficients)
        evaluator = JetEvaluator(grid, alpha, beta, {"phi": phi_values})
        u_values = evaluator.jet_value(JetVar("phi", "x", 1))
        F = None
        if "F" in fixture.exogenous:
            F = Field(grid, evaluator.jet_value(JetVar("phi", "t", 1)) - 0.5 * u_values ** 2)
        samples.append(SampleSet(grid, order_value(alpha), order_value(beta),
                                 Field(grid, u_values), Field(grid, phi_values), F))
    logger.debug(f"{fixture.name}: построено {count} выборок, seed={seed}")
    return samples


@dataclass
class Identification:
    labels: Tuple[str, ...]
    coefficients: np.ndarray
    residual: float
    rank: int
    samples: int

    def as_dict(self) -> Dict[str, float]:
        return {label: float(c) for label, c in zip(self.labels, self.coefficients)}

    def to_dict(self) -> dict:
        return {
            "coefficients": self.as_dict(),
            "residual": self.residual,
            "rank": self.rank,
            "samples": self.samples,
        }


def identify_completion(fixture: SystemFixture, ansatz: Optional[MonomialAnsatz],
                        samples: Sequence[SampleSet], margin: int = INTERIOR_MARGIN) -> Identification:
    """
    Коэффициенты c_k, при которых δ(L0 + Σ c_k b_k)/δu = 0 после подстановки
    ограничений. Решается линейная задача наименьших квадратов по всем
    внутренним узлам всех выборок.
    """
    if fixture.placeholder is None or fixture.identify_wrt is None:
        raise UsageError(f"У системы {fixture.name!r} нет неизвестного члена")
    if len(samples) < MIN_SAMPLES:
        raise UsageError(f"Нужно не меньше {MIN_SAMPLES} выборок, получено {len(samples)}")
    ansatz = ansatz or default_ansatz(fixture)
    wrt = fixture.identify_wrt

    base = substitute(fixture.lagrangian, holes={fixture.placeholder: ZERO})
    if placeholders(base):
        raise UsageError(f"Неизвестные члены: {', '.join(sorted(placeholders(base)))}")
    el = variational_derivative(base, wrt)
    known = substitute(el, jets=_potential_substitutions(fixture, el))
    columns = [variational_derivative(b, wrt) for b in ansatz.basis]
    logger.debug(f"{fixture.name}: δL0/δ{wrt} = {format_expr(known)}")

    rows_a, rows_b = [], []
    for sample in samples:
        exogenous = {"F": sample.F} if sample.F is not None else {}
        evaluator = JetEvaluator(sample.grid, sample.alpha, sample.beta,
                                 {"u": sample.u}, exogenous, fixture.params)
        inside = interior_mask(sample.grid, margin)
        rows_a.append(np.column_stack([evaluator.evaluate(c)[inside] for c in columns]))
        rows_b.append(-evaluator.evaluate(known)[inside])
    matrix = np.vstack(rows_a)
    rhs = np.concatenate(rows_b)

    coefficients, _, rank, _ = np.linalg.lstsq(matrix, rhs, rcond=None)
    if rank < len(ansatz.basis):
        raise RankDeficientError(
            f"Ранг {rank} меньше числа мономов {len(ansatz.basis)}: выборки вырождены"
        )
    coefficients = np.where(np.abs(coefficients) < ZERO_COEFFICIENT, 0.0, coefficients)
    residual = float(np.linalg.norm(matrix @ coefficients - rhs) / max(np.linalg.norm(rhs), 1.0))
    result = Identification(ansatz.labels, coefficients, residual, int(rank), len(samples))
    logger.info(f"{fixture.name}: коэффициенты {result.as_dict()}, невязка {residual:.3e}")
    return result


def completion_from_coefficients(ansatz: MonomialAnsatz, coefficients: Sequence[float]) -> Expr:
    """Σ c_k b_k без нулевых слагаемых."""
    result = None
    for c, b in zip(coefficients, ansatz.basis):
        if c == 0.0:
            continue
        term = b if c == 1.0 else BinOp("*", Const(float(c)), b)
        result = term if result is None else BinOp("+", result, term)
    return ZERO if result is None else result

# }}}


# {{{ проверка

def target_residual(fixture: SystemFixture, evaluator: JetEvaluator) -> np.ndarray:
    """Σ sign·D_axis^m(expr): консервативная форма целевого уравнения."""
    total = np.zeros(evaluator.grid.shape)
    for term in fixture.target:
        values = evaluator.evaluate(fixture.parse(term.expr))
        if term.axis is not None:
            values = evaluator.derivative(values, term.axis, term.multiplicity)
        total = total + term.sign * values
    return total


@dataclass
class RecoveryReport:
    system: str
    alpha: float
    beta: float
    l2: float
    max: float
    functional: Optional[float]
    classical_space: bool
    residual: Field = field(repr=False)
    target: Field = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "alpha": self.alpha,
            "beta": self.beta,
            "agreement_l2": self.l2,
            "agreement_max": self.max,
            "constrained_functional": self.functional,
            "classical_space": self.classical_space,
        }


def verify_el_recovery(fixture: SystemFixture, fields: Mapping[str, FieldLike], measure: FracMeasure,
                       exogenous: Optional[Mapping[str, FieldLike]] = None,
                       completion: Optional[Expr] = None,
                       margin: int = INTERIOR_MARGIN) -> RecoveryReport:
    """
    Невязка Эйлера-Лагранжа по fixture.wrt от дополненного лагранжиана
    против консервативной невязки целевого уравнения.
    """
    lagrangian = fixture.completed(completion)
    problem = ELProblem(lagrangian, fields, measure.alpha, measure.beta, measure.grid,
                        exogenous or {}, fixture.params)
    residual = el_residual(problem, fixture.wrt)
    target = target_residual(fixture, problem.evaluator)
    norms = interior_norms(residual.values - target, interior_mask(measure.grid, margin),
                           cell_size(measure.grid))
    value = None
    if fixture.constrained_functional:
        value = eval_functional(fixture.parse(fixture.constrained_functional), fields, measure,
                                exogenous, fixture.params)
    classical_space = measure.is_2d and measure.beta == 1.0 and fixture.name == "burgers"
    if classical_space:
        logger.info("β = 1: ограниченный функционал Бюргерса в классическом пространстве")
    logger.info(f"{fixture.name}: расхождение EL и цели l2={norms['l2']:.3e}")
    return RecoveryReport(fixture.name, measure.alpha, measure.beta, norms["l2"], norms["max"],
                          value, classical_space, residual, Field(measure.grid, target))


def export_fixture(fixture: SystemFixture) -> Tuple[str, str]:
    """Текст пробного лагранжиана и JSON-описание системы."""
    text = f"# {fixture.name}: {fixture.title}\n{fixture.trial}\n"
    return text, dump_json(fixture.to_dict())

# }}}
