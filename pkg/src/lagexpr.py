"""
Язык выражений для плотностей лагранжиана.

Грамматика:

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := primary ['^' ['-'] INT]
    primary := NUMBER | IDENT | FUNC '(' expr ')' | 'D' '[' f ',' axis ',' m ']'
             | '(' expr ')' | '?' IDENT

D[f,t,m] означает D_t^{mα} f, D[f,x,n] означает D_x^{nβ} f. Поэтому
"a+b*c" разбирается как a+(b*c), а "-a^2" как -(a^2). Литерал после
унарного минуса сворачивается в отрицательную константу, если за ним
не идёт '^'. ?NAME обозначает неизвестный член лагранжиана.

Деревья неизменяемы, равенство структурное. Упрощения сводятся
к свёртке констант в производных.
"""
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from src.config import MAX_MULTIPLICITY
from src.errors import (
    ExpressionError, UnboundSymbolError, PlaceholderError, EvaluationError,
    NonlinearOperandError, UsageError,
)

logger = logging.getLogger(__name__)

COORDINATES = ("t", "x")
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
JET_KEYWORD = "D"


# {{{ узлы

@dataclass(frozen=True)
class JetVar:
    """Струйная переменная: поле или его D^{m·порядок} по оси."""
    field_name: str
    axis: Optional[str] = None
    multiplicity: int = 0

    def __post_init__(self):
        if self.multiplicity == 0:
            if self.axis is not None:
                raise UsageError(f"{self.field_name}: у кратности 0 не бывает оси")
        else:
            if self.axis not in COORDINATES:
                raise UsageError(f"Неизвестная ось: {self.axis}")
            if not 1 <= self.multiplicity <= MAX_MULTIPLICITY:
                raise UsageError(
                    f"Кратность {self.multiplicity} вне диапазона 1..{MAX_MULTIPLICITY}"
                )

    def __str__(self):
        if self.multiplicity == 0:
            return self.field_name
        return f"{JET_KEYWORD}[{self.field_name},{self.axis},{self.multiplicity}]"


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Coord:
    name: str


@dataclass(frozen=True)
class Exo:
    """Заданная функция координат, например F(t, x)."""
    name: str


@dataclass(frozen=True)
class Param:
    """Именованный числовой параметр, например mgl."""
    name: str


@dataclass(frozen=True)
class Jet:
    var: JetVar


@dataclass(frozen=True)
class Hole:
    """Неизвестный член ?NAME."""
    name: str


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Expr"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


Expr = Union[Const, Coord, Exo, Param, Jet, Hole, Func, Neg, BinOp, Pow]
ZERO = Const(0.0)
ONE = Const(1.0)


def jet(field_name: str, axis: Optional[str] = None, multiplicity: int = 0) -> Jet:
    return Jet(JetVar(field_name, axis, multiplicity))


def children(e: Expr) -> Tuple[Expr, ...]:
    if isinstance(e, (Func, Neg)):
        return (e.arg,)
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Pow):
        return (e.base,)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    """Обход дерева в прямом порядке."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))

# }}}


# {{{ лексер

_TOKEN_RE = re.compile(r"""
    (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()\[\],?])
  | (?P<newline>\n)
  | (?P<skip>[ \t\r]+|\#[^\n]*)
  | (?P<error>.)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(src: str) -> List[Token]:
    tokens = []
    line, line_start = 1, 0
    for match in _TOKEN_RE.finditer(src):
        kind = match.lastgroup
        column = match.start() - line_start + 1
        if kind == "newline":
            line += 1
            line_start = match.end()
        elif kind == "skip":
            continue
        elif kind == "error":
            raise ExpressionError(f"недопустимый символ {match.group()!r}", line, column)
        else:
            tokens.append(Token(kind, match.group(), line, column))
    tokens.append(Token("end", "", line, len(src) - line_start + 1))
    return tokens

# }}}


# {{{ парсер

class _Parser:
    def __init__(self, tokens: List[Token], fields: Optional[Set[str]],
                 exogenous: Set[str], params: Set[str]):
        self.tokens = tokens
        self.pos = 0
        self.fields = fields
        self.exogenous = exogenous
        self.params = params

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.current
        self.pos += 1
        return token

    def error(self, message: str, token: Optional[Token] = None) -> ExpressionError:
        token = token or self.current
        return ExpressionError(message, token.line, token.column)

    def expect(self, text: str) -> Token:
        if self.current.text != text or self.current.kind not in ("op", "ident"):
            shown = self.current.text or "конец выражения"
            raise self.error(f"ожидалось {text!r}, получено {shown!r}")
        return self.advance()

    def parse(self) -> Expr:
        if self.current.kind == "end":
            raise self.error("пустое выражение")
        e = self.expr()
        if self.current.kind != "end":
            raise self.error(f"лишний токен {self.current.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance().text
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        token = self.current
        if token.kind == "op" and token.text == "-":
            self.advance()
            following = self.peek(1)
            if self.current.kind == "number" and not (following.kind == "op" and following.text == "^"):
                return Const(-float(self.advance().text))
            return Neg(self.unary())
        if token.kind == "op" and token.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.current.kind == "op" and self.current.text == "^":
            self.advance()
            sign = 1
            if self.current.kind == "op" and self.current.text == "-":
                self.advance()
                sign = -1
            token = self.current
            if token.kind != "number" or not token.text.isdigit():
                raise self.error("показатель степени должен быть целым числом")
            self.advance()
            return Pow(base, sign * int(token.text))
        return base

    def primary(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Const(float(token.text))
        if token.kind == "op" and token.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if token.kind == "op" and token.text == "?":
            self.advance()
            name = self.current
            if name.kind != "ident":
                raise self.error("после '?' ожидалось имя")
            self.advance()
            return Hole(name.text)
        if token.kind == "ident":
            return self.identifier()
        shown = token.text or "конец выражения"
        raise self.error(f"неожиданный токен {shown!r}")

    def identifier(self) -> Expr:
        token = self.advance()
        name = token.text
        following = self.current
        if following.kind == "op" and following.text == "(":
            if name not in FUNCTIONS:
                raise self.error(f"неизвестная функция {name!r}", token)
            self.advance()
            arg = self.expr()
            self.expect(")")
            return Func(name, arg)
        if name == JET_KEYWORD and following.kind == "op" and following.text == "[":
            return self.jet_derivative(token)
        if name in FUNCTIONS:
            raise self.error(f"функция {name!r} без аргумента", token)
        if name in COORDINATES:
            return Coord(name)
        if name in self.params:
            return Param(name)
        if name in self.exogenous:
            return Exo(name)
        if self.fields is None or name in self.fields:
            return Jet(JetVar(name))
        raise self.error(f"неизвестный символ {name!r}", token)

    def jet_derivative(self, start: Token) -> Expr:
        self.expect("[")
        field_token = self.current
        if field_token.kind != "ident":
            raise self.error("ожидалось имя поля")
        self.advance()
        if self.fields is not None and field_token.text not in self.fields:
            raise self.error(f"{field_token.text!r} не объявлено как поле", field_token)
        self.expect(",")
        axis_token = self.current
        if axis_token.kind != "ident" or axis_token.text not in COORDINATES:
            raise self.error("ось должна быть t или x")
        self.advance()
        self.expect(",")
        m_token = self.current
        if m_token.kind != "number" or not m_token.text.isdigit():
            raise self.error("кратность должна быть целым числом")
        multiplicity = int(m_token.text)
        if multiplicity == 0:
            raise self.error("кратность 0: пишите само поле", m_token)
        if multiplicity > MAX_MULTIPLICITY:
            raise self.error(
                f"кратность {multiplicity} больше {MAX_MULTIPLICITY}", m_token
            )
        self.advance()
        self.expect("]")
        return Jet(JetVar(field_token.text, axis_token.text, multiplicity))


def parse(src: str, fields: Optional[Iterable[str]] = None,
          exogenous: Iterable[str] = (), params: Iterable[str] = ()) -> Expr:
    """
    Разбирает текст выражения.

    fields, exogenous, params задают таблицу символов. Без fields любой
    необъявленный идентификатор считается полем.
    """
    table = None if fields is None else set(fields)
    parser = _Parser(tokenize(src), table, set(exogenous), set(params))
    return parser.parse()


def read_expression(path: Union[str, Path], **symbols) -> Expr:
    text = Path(path).read_text(encoding="utf-8")
    logger.info(f"Лагранжиан прочитан из {path}")
    return parse(text, **symbols)

# }}}


# {{{ печать

def _format_const(value: float) -> str:
    text = repr(float(value))
    if math.copysign(1.0, value) < 0:
        return f"({text})"
    return text


def format_expr(e: Expr) -> str:
    """Полностью скобочная запись: parse(format_expr(e)) == e."""
    if isinstance(e, Const):
        return _format_const(e.value)
    if isinstance(e, (Coord, Exo, Param)):
        return e.name
    if isinstance(e, Jet):
        return str(e.var)
    if isinstance(e, Hole):
        return f"?{e.name}"
    if isinstance(e, Func):
        return f"{e.name}({format_expr(e.arg)})"
    if isinstance(e, Neg):
        return f"(-({format_expr(e.arg)}))"
    if isinstance(e, BinOp):
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    if isinstance(e, Pow):
        return f"({format_expr(e.base)}^{e.exponent})"
    raise TypeError(f"Не выражение: {e!r}")

# }}}


# {{{ конструкторы со свёрткой констант

def _is_const(e: Expr, value: Optional[float] = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(b):
        a, b = b, a
    if _is_const(a) and isinstance(b, BinOp) and b.op == "*" and _is_const(b.left):
        return _mul(Const(a.value * b.left.value), b.right)
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(b) and b.value != 0.0 and isinstance(a, BinOp) and a.op == "*" and _is_const(a.left):
        return _mul(Const(a.left.value / b.value), a.right)
    return BinOp("/", a, b)


def _pow(base: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if _is_const(base) and (base.value != 0.0 or exponent > 0):
        return Const(base.value ** exponent)
    return Pow(base, exponent)

# }}}


# {{{ производные

def partial_jet(e: Expr, v: JetVar) -> Expr:
    """
    Частная производная по струйной переменной v.

    Остальные струйные переменные, координаты и параметры считаются
    константами.
    """
    if isinstance(e, (Const, Coord, Exo, Param)):
        return ZERO
    if isinstance(e, Jet):
        return ONE if e.var == v else ZERO
    if isinstance(e, Hole):
        raise PlaceholderError(f"Нельзя дифференцировать неизвестный член ?{e.name}")
    if isinstance(e, Neg):
        return _neg(partial_jet(e.arg, v))
    if isinstance(e, Func):
        inner = partial_jet(e.arg, v)
        if _is_const(inner, 0.0):
            return ZERO
        if e.name == "sin":
            outer = Func("cos", e.arg)
        elif e.name == "cos":
            outer = Neg(Func("sin", e.arg))
        else:
            outer = e
        return _mul(outer, inner)
    if isinstance(e, Pow):
        inner = partial_jet(e.base, v)
        if _is_const(inner, 0.0):
            return ZERO
        return _mul(_mul(Const(float(e.exponent)), _pow(e.base, e.exponent - 1)), inner)
    if isinstance(e, BinOp):
        da = partial_jet(e.left, v)
        db = partial_jet(e.right, v)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, e.right), _mul(e.left, db))
        if _is_const(db, 0.0):
            return _div(da, e.right)
        return _div(_sub(_mul(da, e.right), _mul(e.left, db)), _pow(e.right, 2))
    raise TypeError(f"Не выражение: {e!r}")


def _is_constant(e: Expr) -> bool:
    return all(isinstance(node, (Const, Param, Neg, BinOp, Pow, Func)) for node in walk(e))


def shift_jet(e: Expr, axis: str, m: int) -> Expr:
    """
    Символьное D_axis^{m·порядок} от линейной комбинации струйных переменных.

    Константы уничтожаются, кратности по одной оси складываются.
    Произведения двух неконстантных множителей не поддерживаются:
    правила Лейбница для дробной производной нет.
    """
    if axis not in COORDINATES:
        raise UsageError(f"Неизвестная ось: {axis}")
    if m == 0:
        return e
    if _is_constant(e):
        return ZERO
    if isinstance(e, Jet):
        var = e.var
        if var.multiplicity and var.axis != axis:
            raise NonlinearOperandError(f"Смешанная производная {var} по оси {axis}")
        total = var.multiplicity + m
        if total > MAX_MULTIPLICITY:
            raise UsageError(f"Кратность {total} больше {MAX_MULTIPLICITY}")
        return Jet(JetVar(var.field_name, axis, total))
    if isinstance(e, Hole):
        raise PlaceholderError(f"Неизвестный член ?{e.name}")
    if isinstance(e, Neg):
        return _neg(shift_jet(e.arg, axis, m))
    if isinstance(e, BinOp):
        if e.op == "+":
            return _add(shift_jet(e.left, axis, m), shift_jet(e.right, axis, m))
        if e.op == "-":
            return _sub(shift_jet(e.left, axis, m), shift_jet(e.right, axis, m))
        if e.op == "*" and _is_constant(e.left):
            return _mul(e.left, shift_jet(e.right, axis, m))
        if e.op == "*" and _is_constant(e.right):
            return _mul(e.right, shift_jet(e.left, axis, m))
        if e.op == "/" and _is_constant(e.right):
            return _div(shift_jet(e.left, axis, m), e.right)
    raise NonlinearOperandError(
        f"D[{axis},{m}] от нелинейного выражения {format_expr(e)}"
    )


def variational_derivative(e: Expr, field_name: str) -> Expr:
    """δe/δy = ∂e/∂y + Σ_m (-1)^m D^m(∂e/∂D^m y) в струйной записи."""
    result = partial_jet(e, JetVar(field_name))
    derived = [v for v in jet_vars(e) if v.field_name == field_name and v.multiplicity]
    for var in sorted(derived, key=lambda v: (v.axis, v.multiplicity)):
        term = shift_jet(partial_jet(e, var), var.axis, var.multiplicity)
        result = _sub(result, term) if var.multiplicity % 2 else _add(result, term)
    return result

# }}}


# {{{ вычисление

def _lookup(bindings: Mapping, keys: Sequence, label: str):
    for key in keys:
        if key in bindings:
            return bindings[key]
    raise UnboundSymbolError(f"Нет значения для {label}")


def _eval(e: Expr, bindings: Mapping):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Jet):
        return _lookup(bindings, (e.var, str(e.var)), str(e.var))
    if isinstance(e, (Coord, Exo, Param)):
        return _lookup(bindings, (e.name,), e.name)
    if isinstance(e, Hole):
        raise PlaceholderError(f"Неизвестный член ?{e.name} нельзя вычислить")
    if isinstance(e, Func):
        return FUNCTIONS[e.name](_eval(e.arg, bindings))
    if isinstance(e, Neg):
        return -_eval(e.arg, bindings)
    if isinstance(e, Pow):
        base = np.asarray(_eval(e.base, bindings), dtype=float)
        if e.exponent < 0 and np.any(base == 0.0):
            raise EvaluationError(f"Деление на ноль в {format_expr(e)}")
        return base ** e.exponent
    if isinstance(e, BinOp):
        left = _eval(e.left, bindings)
        right = _eval(e.right, bindings)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        if np.any(np.asarray(right) == 0.0):
            raise EvaluationError(f"Деление на ноль в {format_expr(e)}")
        return np.asarray(left, dtype=float) / right
    raise TypeError(f"Не выражение: {e!r}")


def evaluate(e: Expr, bindings: Mapping):
    """
    Значение выражения. Ключи bindings: JetVar или его запись ("D[y,t,1]"),
    имена координат, параметров и заданных функций. Массивы вычисляются
    поточечно.
    """
    with np.errstate(all="ignore"):
        value = np.asarray(_eval(e, bindings), dtype=float)
    if not np.all(np.isfinite(value)):
        raise EvaluationError(f"Нечисловой результат выражения {format_expr(e)}")
    if value.ndim == 0:
        return float(value)
    return value

# }}}


# {{{ утилиты

def jet_vars(e: Expr) -> Set[JetVar]:
    return {node.var for node in walk(e) if isinstance(node, Jet)}


def placeholders(e: Expr) -> Set[str]:
    return {node.name for node in walk(e) if isinstance(node, Hole)}


def symbols(e: Expr, kind: type) -> Set[str]:
    return {node.name for node in walk(e) if isinstance(node, kind)}


def substitute(e: Expr, jets: Optional[Mapping[JetVar, Expr]] = None,
               holes: Optional[Mapping[str, Expr]] = None) -> Expr:
    """Заменяет струйные переменные и члены ?NAME поддеревьями."""
    jets = jets or {}
    holes = holes or {}

    def rebuild(node: Expr) -> Expr:
        if isinstance(node, Jet):
            return jets.get(node.var, node)
        if isinstance(node, Hole):
            return holes.get(node.name, node)
        if isinstance(node, Func):
            return Func(node.name, rebuild(node.arg))
        if isinstance(node, Neg):
            return Neg(rebuild(node.arg))
        if isinstance(node, BinOp):
            return BinOp(node.op, rebuild(node.left), rebuild(node.right))
        if isinstance(node, Pow):
            return Pow(rebuild(node.base), node.exponent)
        return node

    return rebuild(e)


def to_callable(e: Expr, params: Optional[Mapping[str, float]] = None) -> Callable:
    """
    Функция координат: f(x) или f(t, x).

    С одним аргументом он подставляется и за t, и за x.
    """
    if jet_vars(e):
        names = ", ".join(sorted(str(v) for v in jet_vars(e)))
        raise UnboundSymbolError(f"В выражении координат есть поля: {names}")
    fixed: Dict[str, float] = dict(params or {})

    def func(*coords):
        if len(coords) == 1:
            bindings = {"t": coords[0], "x": coords[0]}
        elif len(coords) == 2:
            bindings = {"t": coords[0], "x": coords[1]}
        else:
            raise TypeError("Ожидалось один или два аргумента")
        bindings.update(fixed)
        value = evaluate(e, bindings)
        return np.broadcast_to(value, np.shape(coords[0])) if np.ndim(value) == 0 else value

    return func

# }}}
