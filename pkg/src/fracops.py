"""
Непрерывные дробные операторы.

Интеграл Римана–Лиувилля, его форма по (dξ)^α и модифицированная
производная Римана–Лиувилля (Джумари) считаются квадратурой с особым ядром:
отрезок [a, x] делится пополам, каждая половина геометрически сгущается
к своему концу. В ячейке у особенности ядра (x - ξ)^p стоит правило
Гаусса–Якоби, в остальных ячейках Гаусса–Лежандра. Глубина сгущения
удваивается, пока две оценки не совпадут с заданной точностью.

Все вычисления идут в локальной координате r = ξ - a, поэтому оператор
на [a, b] совпадает с оператором на [0, b - a] от сдвинутой функции.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma as _gamma, roots_jacobi

from src.config import (
    DEFAULT_TOL, QUAD_NODES, INITIAL_GRADING_DEPTH, MAX_GRADING_DEPTH,
    DERIVATIVE_GRADING_DEPTH, FD_RELATIVE_STEP,
)
from src.errors import (
    OrderError, DomainError, GammaPoleError, ConvergenceError, EvaluationError, UsageError,
)

logger = logging.getLogger(__name__)

# Оптимальный шаг центральной разности
_FD_STEP = float(np.cbrt(np.finfo(float).eps))


@dataclass(frozen=True)
class FractionalOrder:
    """Порядок дробного оператора, 0 < value <= 1."""
    value: float

    def __post_init__(self):
        object.__setattr__(self, 'value', order_value(self.value))

    def __float__(self):
        return self.value


Order = Union[float, FractionalOrder]


def order_value(alpha: Order, allow_one: bool = True) -> float:
    """Проверяет порядок и возвращает его как float."""
    try:
        value = float(alpha)
    except (TypeError, ValueError):
        raise OrderError(f"Порядок должен быть числом: {alpha!r}")
    upper_ok = value <= 1.0 if allow_one else value < 1.0
    if not math.isfinite(value) or value <= 0.0 or not upper_ok:
        bracket = "]" if allow_one else ")"
        raise OrderError(f"Порядок должен быть в (0, 1{bracket}: {value}")
    return value


@dataclass(frozen=True)
class ScalarFunction:
    """
    Непрерывная функция f на [a, b].

    smooth=True объявляет f непрерывно дифференцируемой, тогда производная
    считается в эквивалентной форме Капуто. derivative: точная f', если известна.
    func должна принимать массивы numpy.
    """
    func: Callable
    a: float = 0.0
    b: float = 1.0
    smooth: bool = False
    derivative: Optional[Callable] = None

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a >= self.b:
            raise DomainError(f"Неверный интервал [{self.a}, {self.b}]")

    def __call__(self, xi) -> np.ndarray:
        return _finite(self.func, xi)

    def local(self, r) -> np.ndarray:
        """f(a + r)."""
        return self(self.a + np.asarray(r, dtype=float))

    @property
    def length(self) -> float:
        return self.b - self.a


def _finite(func: Callable, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    values = np.asarray(func(xi), dtype=float)
    if values.shape != xi.shape:
        values = np.broadcast_to(values, xi.shape).copy()
    if not np.all(np.isfinite(values)):
        raise EvaluationError("Функция вернула нечисловое значение")
    return values


def gamma(x):
    """Гамма-функция, ошибка в полюсах 0, -1, -2, ..."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr <= 0) & (arr == np.round(arr))):
        raise GammaPoleError(f"Полюс гамма-функции: {x}")
    result = _gamma(arr)
    return float(result) if result.ndim == 0 else result


# {{{ квадратура с особым ядром

@lru_cache(maxsize=None)
def _legendre(m: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(m)


@lru_cache(maxsize=512)
def _jacobi(m: int, p: float) -> Tuple[np.ndarray, np.ndarray]:
    # вес (1 + t)^p на [-1, 1]
    return roots_jacobi(m, 0.0, p)


def _graded_cells(half: float, depth: int) -> Tuple[np.ndarray, np.ndarray]:
    # [half/2, half], [half/4, half/2], ..., затем [0, half/2^depth]
    edges = half * 0.5 ** np.arange(depth + 1)
    lo = np.append(edges[1:], 0.0)
    hi = np.append(edges[:-1], edges[-1])
    return lo, hi


def _kernel_rule(length: float, p: float, depth: int,
                 m: int = QUAD_NODES) -> Tuple[np.ndarray, np.ndarray]:
    """
    Узлы r и веса W, такие что sum W·g(r) ~ ∫_0^L (L - r)^p g(r) dr, p > -1.

    Левая половина сгущается к r = 0 (возможная негладкость f в a),
    правая к r = L (особенность ядра).
    """
    t, w = _legendre(m)
    lo, hi = _graded_cells(0.5 * length, depth)
    centers = 0.5 * (lo + hi)
    radii = 0.5 * (hi - lo)

    # половина у нижнего предела
    r_left = (centers[:, None] + radii[:, None] * t[None, :]).ravel()
    w_left = (radii[:, None] * w[None, :]).ravel() * (length - r_left) ** p

    # половина у особенности: s = L - r, последняя ячейка [0, eps] считается по Гауссу–Якоби
    regular = slice(0, depth)
    s_right = (centers[regular, None] + radii[regular, None] * t[None, :]).ravel()
    w_right = (radii[regular, None] * w[None, :]).ravel() * s_right ** p

    eps = hi[-1]
    tj, wj = _jacobi(m, p)
    s_inner = 0.5 * eps * (1.0 + tj)
    w_inner = (0.5 * eps) ** (p + 1.0) * wj

    nodes = np.concatenate([r_left, length - s_right, length - s_inner])
    weights = np.concatenate([w_left, w_right, w_inner])
    return nodes, weights


def _graded_integral(g: Callable, length: float, p: float, depth: int) -> float:
    nodes, weights = _kernel_rule(length, p, depth)
    return float(np.dot(weights, g(nodes)))


def _adaptive_integral(g: Callable, length: float, p: float, tol: float) -> float:
    """∫_0^L (L - r)^p g(r) dr с удвоением глубины сгущения."""
    previous = None
    depth = INITIAL_GRADING_DEPTH
    while depth <= MAX_GRADING_DEPTH:
        current = _graded_integral(g, length, p, depth)
        if previous is not None and abs(current - previous) <= tol:
            logger.debug(f"Квадратура сошлась: глубина={depth}, значение={current:.12g}")
            return current
        previous = current
        depth *= 2
    raise ConvergenceError(
        f"Квадратура не сошлась за глубину {MAX_GRADING_DEPTH} (p={p}, L={length})"
    )

# }}}


def _local_length(f: ScalarFunction, x: float) -> float:
    if not isinstance(f, ScalarFunction):
        raise UsageError("Ожидается ScalarFunction")
    if not math.isfinite(x) or x < f.a or x > f.b:
        raise DomainError(f"Точка x={x} вне [{f.a}, {f.b}]")
    return x - f.a


def _local_derivative(f: ScalarFunction, r: np.ndarray) -> np.ndarray:
    """f'(a + r): точная, если задана, иначе разности второго порядка."""
    r = np.asarray(r, dtype=float)
    if f.derivative is not None:
        return _finite(f.derivative, f.a + r)

    h = _FD_STEP * max(1.0, f.length)
    out = np.empty_like(r)
    lo = r - h < 0.0
    hi = (r + h > f.length) & ~lo
    mid = ~(lo | hi)
    if mid.any():
        rm = r[mid]
        out[mid] = (f.local(rm + h) - f.local(rm - h)) / (2.0 * h)
    if lo.any():
        rl = r[lo]
        out[lo] = (-3.0 * f.local(rl) + 4.0 * f.local(rl + h) - f.local(rl + 2.0 * h)) / (2.0 * h)
    if hi.any():
        rh = r[hi]
        out[hi] = (3.0 * f.local(rh) - 4.0 * f.local(rh - h) + f.local(rh - 2.0 * h)) / (2.0 * h)
    return out


def rl_integral(f: ScalarFunction, alpha: Order, x: float, tol: Optional[float] = None) -> float:
    """
    Дробный интеграл Римана–Лиувилля
    (1/Γ(α)) ∫_a^x (x - ξ)^{α-1} f(ξ) dξ.
    """
    alpha = order_value(alpha)
    length = _local_length(f, x)
    if length == 0.0:
        return 0.0
    tol = DEFAULT_TOL if tol is None else tol
    value = _adaptive_integral(f.local, length, alpha - 1.0, tol)
    return value / gamma(alpha)


def frac_integral_dxa(f: ScalarFunction, alpha: Order, x: float,
                      tol: Optional[float] = None) -> float:
    """
    Интеграл по (dξ)^α: (1/Γ(α+1)) ∫_a^x f(ξ)(dξ)^α,
    то есть (α/Γ(α+1)) ∫_a^x (x - ξ)^{α-1} f(ξ) dξ.
    """
    alpha = order_value(alpha)
    length = _local_length(f, x)
    if length == 0.0:
        return 0.0
    tol = DEFAULT_TOL if tol is None else tol
    value = _adaptive_integral(f.local, length, alpha - 1.0, tol)
    return alpha * value / gamma(alpha + 1.0)


def mrl_derivative(f: ScalarFunction, alpha: Order, x: float,
                   tol: Optional[float] = None) -> float:
    """
    Модифицированная производная Римана–Лиувилля
    (1/Γ(1-α)) d/dx ∫_a^x (x - ξ)^{-α} (f(ξ) - f(a)) dξ.

    Для гладкой f используется форма Капуто с f' под интегралом, иначе производная
    сдвинутого интеграла порядка 1-α численно по x. При α = 1 возвращает f'(x).
    """
    alpha = order_value(alpha)
    length = _local_length(f, x)
    if alpha == 1.0:
        return float(_local_derivative(f, np.array([length]))[0])
    if length == 0.0:
        return 0.0

    if f.smooth or f.derivative is not None:
        tol = DEFAULT_TOL if tol is None else tol
        value = _adaptive_integral(lambda r: _local_derivative(f, r), length, -alpha, tol)
        return value / gamma(1.0 - alpha)

    return _shifted_slope(f, alpha, length) / gamma(1.0 - alpha)


def _shifted_slope(f: ScalarFunction, alpha: float, length: float) -> float:
    """d/dx ∫_a^x (x - ξ)^{-α}(f(ξ) - f(a)) dξ разностями с экстраполяцией Ричардсона."""
    fa = float(f.local(np.zeros(1))[0])

    def shifted(r):
        return f.local(r) - fa

    # фиксированная глубина: погрешность квадратуры гладко зависит от x
    def integral(upper):
        return _graded_integral(shifted, upper, -alpha, DERIVATIVE_GRADING_DEPTH)

    h = FD_RELATIVE_STEP * length
    if f.length - length >= h:
        def slope(step):
            return (integral(length + step) - integral(length - step)) / (2.0 * step)
    else:
        # x у правого конца: односторонняя формула
        def slope(step):
            return (3.0 * integral(length) - 4.0 * integral(length - step)
                    + integral(length - 2.0 * step)) / (2.0 * step)

    return (4.0 * slope(0.5 * h) - slope(h)) / 3.0


def power_law_oracle(gamma_exp: float, alpha: Order, x, kind: str = "derivative"):
    """
    Замкнутая форма операторов на x^γ по [0, x] (только для тестов):
    производная Γ(γ+1)/Γ(γ+1-α)·x^{γ-α}, интеграл Γ(γ+1)/Γ(γ+1+α)·x^{γ+α}.
    Модифицированная производная константы (γ = 0) равна нулю.
    """
    alpha = order_value(alpha)
    if not gamma_exp > -1.0:
        raise DomainError(f"Показатель должен быть > -1: {gamma_exp}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError(f"x должен быть >= 0: {x}")

    if kind == "derivative":
        if gamma_exp == 0:
            result = np.zeros_like(arr)
        else:
            coeff = gamma(gamma_exp + 1.0) / gamma(gamma_exp + 1.0 - alpha)
            with np.errstate(divide='ignore'):
                result = coeff * np.power(arr, gamma_exp - alpha)
    elif kind == "integral":
        coeff = gamma(gamma_exp + 1.0) / gamma(gamma_exp + 1.0 + alpha)
        result = coeff * np.power(arr, gamma_exp + alpha)
    else:
        raise UsageError(f"Неизвестный вид оператора: {kind}")

    return float(result) if result.ndim == 0 else result
