"""Обработчики подкоманд. Каждый получает argparse.Namespace и возвращает код выхода."""
import argparse
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from src.config import REPORT_SCHEMA
from src.errors import UsageError
from src.eulagrange import ELProblem, discrete_gradient, el_discrepancy_probe, el_residual
from src.fieldio import format_field, read_field, write_field
from src.fracgrid import (
    DERIVATIVE, INTEGRAL, Field, Grid, Grid2D, apply_values_along_axis, boundary_mask,
    build_operator, compose_order, make_grid, sample_field,
)
from src.fracops import ScalarFunction, frac_integral_dxa, mrl_derivative, rl_integral
from src.functional import (
    FracMeasure, Perturbation, chainrule_ladder, eval_functional, first_variation,
    green_ladder, leibniz_ladder,
)
from src.lagexpr import Expr, parse, to_callable
from src.reports import ProbeReport, dump_json, format_table, report_table, write_output
from src.semiinverse import (
    MonomialAnsatz, constraint_consistent_samples, default_ansatz, export_fixture,
    identify_completion, verify_el_recovery,
)
from src.systems import SYSTEMS, builtin_system

logger = logging.getLogger(__name__)


# {{{ общие помощники

def parse_assignments(items: Optional[List[str]], flag: str) -> Dict[str, str]:
    """['a=1', 'b=x^2'] -> {'a': '1', 'b': 'x^2'}."""
    result = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"{flag}: ожидалось имя=значение, получено {item!r}")
        name, value = item.split("=", 1)
        name = name.strip()
        if not name.isidentifier():
            raise UsageError(f"{flag}: неверное имя {name!r}")
        result[name] = value.strip()
    return result


def parse_params(items: Optional[List[str]]) -> Dict[str, float]:
    params = {}
    for name, value in parse_assignments(items, "--param").items():
        try:
            params[name] = float(value)
        except ValueError:
            raise UsageError(f"--param {name}: не число {value!r}")
    return params


def coordinate_function(text: str, params: Optional[Dict[str, float]] = None) -> Callable:
    return to_callable(parse(text, fields=(), params=tuple(params or ())), params)


def expression_text(args: argparse.Namespace) -> str:
    if getattr(args, "expr_file", None):
        return Path(args.expr_file).read_text(encoding="utf-8")
    if getattr(args, "expr", None):
        return args.expr
    raise UsageError("Нужен --expr или --expr-file")


def emit(args: argparse.Namespace, payload: dict, headers: List[str], rows: List[list],
         default: str = "table"):
    fmt = args.format or default
    if fmt == "json":
        data = {"schema": REPORT_SCHEMA}
        data.update(payload)
        text = dump_json(data)
    else:
        text = format_table(headers, rows)
    write_output(text, args.out)


def emit_report(args: argparse.Namespace, report: ProbeReport):
    if (args.format or "json") == "json":
        write_output(dump_json(report.to_dict()), args.out)
    else:
        write_output(report_table(report), args.out)


def emit_field(f: Field, out: Optional[str], alpha: Optional[float] = None,
               beta: Optional[float] = None):
    if out is None:
        write_output(format_field(f, alpha, beta))
    else:
        write_field(out, f, alpha, beta)


def make_problem_grid(args: argparse.Namespace) -> Grid:
    line = make_grid(args.interval[0], args.interval[1], args.n)
    if args.interval_x is None:
        return line
    return Grid2D(line, make_grid(args.interval_x[0], args.interval_x[1], args.m or args.n))


def _orders(args: argparse.Namespace) -> Tuple[float, float]:
    beta = args.beta if args.beta is not None else args.alpha
    return args.alpha, beta


def _load_fields(paths: Dict[str, str]) -> Dict[str, Field]:
    return {name: read_field(path)[0] for name, path in paths.items()}


class ProblemInput:
    """Лагранжиан, поля и сетка из флагов командной строки."""

    def __init__(self, args: argparse.Namespace):
        self.params = parse_params(args.param)
        field_files = parse_assignments(args.field, "--field")
        exo_files = parse_assignments(args.exogenous, "--exogenous")
        self.field_sources = {name: coordinate_function(text, self.params)
                              for name, text in parse_assignments(args.source, "--source").items()}
        self.exo_sources = {name: coordinate_function(text, self.params)
                            for name, text in parse_assignments(args.exo_source, "--exo-source").items()}
        self.alpha, self.beta = _orders(args)

        self.fixture = builtin_system(args.system) if args.system else None
        if self.fixture is not None:
            self.params = {**self.fixture.params, **self.params}
            self.lagrangian = self.fixture.completed()
        else:
            text = args.lagrangian
            if args.lagrangian_file:
                text = Path(args.lagrangian_file).read_text(encoding="utf-8")
            if not text:
                raise UsageError("Нужен --lagrangian, --lagrangian-file или --system")
            exo_names = set(exo_files) | set(self.exo_sources)
            self.lagrangian = parse(text, exogenous=exo_names, params=tuple(self.params))

        files = _load_fields(field_files)
        exo = _load_fields(exo_files)
        if files or exo:
            self.grid = next(iter({**files, **exo}.values())).grid
        else:
            self.grid = make_problem_grid(args)
        self.fields = {**files, **{n: sample_field(f, self.grid) for n, f in self.field_sources.items()}}
        self.exogenous = {**exo, **{n: sample_field(f, self.grid) for n, f in self.exo_sources.items()}}

    def problem(self) -> ELProblem:
        return ELProblem(self.lagrangian, self.fields, self.alpha, self.beta, self.grid,
                         self.exogenous, self.params)

    @property
    def sources(self) -> Dict[str, Callable]:
        return {**self.field_sources, **self.exo_sources}


def default_wrt(args: argparse.Namespace, problem_input: ProblemInput) -> str:
    if args.wrt:
        return args.wrt
    if problem_input.fixture is not None:
        return problem_input.fixture.wrt
    if len(problem_input.fields) == 1:
        return next(iter(problem_input.fields))
    raise UsageError("Укажите --wrt: полей несколько")

# }}}


# {{{ операторы

def _scalar_function(args: argparse.Namespace) -> ScalarFunction:
    func = coordinate_function(expression_text(args), parse_params(args.param))
    return ScalarFunction(func, args.interval[0], args.interval[1], smooth=args.smooth)


def deriv_command(args: argparse.Namespace) -> int:
    f = _scalar_function(args)
    rows = [[x, mrl_derivative(f, args.alpha, x, args.tol)] for x in args.at]
    emit(args, {"operator": "mrl_derivative", "alpha": args.alpha,
                "points": [{"x": x, "value": v} for x, v in rows]}, ["x", "value"], rows)
    return 0


def integral_command(args: argparse.Namespace) -> int:
    f = _scalar_function(args)
    operator = rl_integral if args.kind == "rl" else frac_integral_dxa
    rows = [[x, operator(f, args.alpha, x, args.tol)] for x in args.at]
    emit(args, {"operator": operator.__name__, "alpha": args.alpha,
                "points": [{"x": x, "value": v} for x, v in rows]}, ["x", "value"], rows)
    return 0


def field_op_command(args: argparse.Namespace) -> int:
    if args.field_file:
        field, _ = read_field(args.field_file)
    else:
        field = sample_field(coordinate_function(expression_text(args), parse_params(args.param)),
                             make_problem_grid(args))
    grid = field.grid
    if isinstance(grid, Grid2D):
        line, axis = grid.axis_grid(args.axis), (0 if args.axis == "t" else 1)
    else:
        line, axis = grid, 0
    kind = INTEGRAL if args.kind == "integral" else DERIVATIVE
    pipeline = compose_order(build_operator(args.alpha, kind, line), args.multiplicity)
    values = apply_values_along_axis(pipeline, field.values, axis, adjoint=args.adjoint)
    emit_field(Field(grid, values), args.out, alpha=args.alpha)
    return 0

# }}}


# {{{ функционалы и уравнения Эйлера-Лагранжа

def elcheck_command(args: argparse.Namespace) -> int:
    problem_input = ProblemInput(args)
    problem = problem_input.problem()
    residual = el_residual(problem, default_wrt(args, problem_input))
    emit_field(residual, args.out, problem.alpha, problem.beta)
    return 0


def functional_command(args: argparse.Namespace) -> int:
    problem_input = ProblemInput(args)
    measure = FracMeasure(problem_input.alpha, problem_input.beta, problem_input.grid)
    value = eval_functional(problem_input.lagrangian, problem_input.fields, measure,
                            problem_input.exogenous, problem_input.params)
    emit(args, {"functional": value, "alpha": measure.alpha, "beta": measure.beta},
         ["functional"], [[value]])
    return 0


def stationarity_command(args: argparse.Namespace) -> int:
    """Первая вариация по случайному η против ⟨градиент, η⟩."""
    problem_input = ProblemInput(args)
    problem = problem_input.problem()
    wrt = default_wrt(args, problem_input)
    rng = np.random.default_rng(args.seed)
    eta = rng.standard_normal(problem.grid.shape)
    eta[boundary_mask(problem.grid)] = 0.0
    pert = Perturbation(Field(problem.grid, eta), args.epsilon)
    variation = first_variation(problem.lagrangian, problem.fields, problem.measure, pert, wrt,
                                problem.exogenous, problem.params)
    gradient = discrete_gradient(problem, wrt)
    projected = float(np.sum(gradient.values * eta))
    relative = abs(variation - projected) / max(abs(projected), np.finfo(float).tiny)
    emit(args, {"first_variation": variation, "gradient_projection": projected,
                "relative_error": relative, "wrt": wrt},
         ["first_variation", "gradient_projection", "relative_error"],
         [[variation, projected, relative]])
    return 0

# }}}


# {{{ пробы

def probe_green_command(args: argparse.Namespace) -> int:
    params = parse_params(args.param)
    interval_x = args.interval_x or args.interval
    report = green_ladder(coordinate_function(args.p, params), coordinate_function(args.q, params),
                          args.alpha, args.beta if args.beta is not None else args.alpha,
                          (args.interval[0], args.interval[1], interval_x[0], interval_x[1]),
                          args.ladder)
    emit_report(args, report)
    return 0


def probe_leibniz_command(args: argparse.Namespace) -> int:
    params = parse_params(args.param)
    report = leibniz_ladder(coordinate_function(args.f, params), coordinate_function(args.g, params),
                            args.alpha, tuple(args.interval), args.ladder)
    emit_report(args, report)
    return 0


def probe_chain_command(args: argparse.Namespace) -> int:
    report = chainrule_ladder(coordinate_function(args.u, parse_params(args.param)), args.alpha,
                              args.outer, tuple(args.interval), args.ladder)
    emit_report(args, report)
    return 0


def probe_el_discrepancy_command(args: argparse.Namespace) -> int:
    problem_input = ProblemInput(args)
    problem = problem_input.problem()
    sources = problem_input.sources
    missing = (set(problem.fields) | set(problem.exogenous)) - set(sources)
    if missing:
        if sources:
            logger.warning(f"Нет источников для {', '.join(sorted(missing))}: только одна сетка")
        sources = None
    report = el_discrepancy_probe(problem, default_wrt(args, problem_input), sources, args.ladder)
    emit_report(args, report)
    return 0

# }}}


# {{{ полуобратный метод

def _semiinverse_fixture(args: argparse.Namespace):
    fixture = builtin_system(args.system)
    if fixture.placeholder is None:
        raise UsageError(f"Система {fixture.name!r} не содержит неизвестного члена")
    return fixture


def semiinverse_identify_command(args: argparse.Namespace) -> int:
    fixture = _semiinverse_fixture(args)
    alpha, beta = _orders(args)
    ansatz = MonomialAnsatz.from_texts(fixture, args.basis) if args.basis else default_ansatz(fixture)
    grid = Grid2D(make_grid(0.0, 1.0, args.n), make_grid(0.0, 1.0, args.n))
    samples = constraint_consistent_samples(fixture, grid, alpha, beta, args.samples, args.seed)
    result = identify_completion(fixture, ansatz, samples)
    coefficients = result.as_dict()
    emit(args, {"system": fixture.name, "alpha": alpha, "beta": beta, **result.to_dict()},
         ["monomial", "coefficient"], [[label, c] for label, c in coefficients.items()],
         default="json")
    return 0


def semiinverse_verify_command(args: argparse.Namespace) -> int:
    fixture = _semiinverse_fixture(args)
    alpha, beta = _orders(args)
    grid = Grid2D(make_grid(0.0, 1.0, args.n), make_grid(0.0, 1.0, args.n))
    sample = constraint_consistent_samples(fixture, grid, alpha, beta, 1, args.seed)[0]
    completion: Optional[Expr] = fixture.parse(args.completion) if args.completion else None
    exogenous = {"F": sample.F} if sample.F is not None else {}
    report = verify_el_recovery(fixture, {"u": sample.u, "phi": sample.phi}, sample.measure,
                                exogenous, completion)
    data = report.to_dict()
    emit(args, data, list(data), [list(data.values())], default="json")
    return 0


def fixtures_command(args: argparse.Namespace) -> int:
    names = [args.system] if args.system else list(SYSTEMS)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in names:
            text, meta = export_fixture(builtin_system(name))
            (out_dir / f"{name}.lag").write_text(text, encoding="utf-8")
            (out_dir / f"{name}.json").write_text(meta, encoding="utf-8")
            logger.info(f"Система {name} выгружена в {out_dir}")
        return 0
    data = {"schema": REPORT_SCHEMA, "systems": [builtin_system(name).to_dict() for name in names]}
    write_output(dump_json(data), args.out)
    return 0

# }}}
