"""Исключения пакета.

UsageError и наследники означают неверный ввод (CLI завершается с кодом 2),
NumericalError и наследники: численную неудачу (код 1).
"""


class FravarError(Exception):
    """Базовое исключение."""
    pass


class UsageError(FravarError, ValueError):
    """Неверные входные данные."""
    pass


class OrderError(UsageError):
    """Порядок вне (0, 1]."""
    pass


class DomainError(UsageError):
    """Точка или сетка вне допустимой области."""
    pass


class GammaPoleError(DomainError):
    """Аргумент гамма-функции попал в полюс."""
    pass


class GridMismatchError(UsageError):
    """Поля или операторы живут на разных сетках."""
    pass


class ExpressionError(UsageError):
    """Лексическая или синтаксическая ошибка в выражении лагранжиана."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        if line:
            message = f"строка {line}, столбец {column}: {message}"
        super().__init__(message)


class UnboundSymbolError(UsageError):
    """У символа нет значения при вычислении."""
    pass


class PlaceholderError(UsageError):
    """В выражении остался неизвестный член ?NAME."""
    pass


class FieldFormatError(UsageError):
    """Файл поля не в формате fravar-field."""
    pass


class NumericalError(FravarError, ArithmeticError):
    """Численная неудача."""
    pass


class ConvergenceError(NumericalError):
    """Квадратура не сошлась за максимальную глубину."""
    pass


class EvaluationError(NumericalError):
    """Деление на ноль или нечисловой результат."""
    pass


class RankDeficientError(NumericalError):
    """Вырожденная система наименьших квадратов."""
    pass


class NonlinearOperandError(NumericalError):
    """Символьная производная нелинейного выражения требует правила Лейбница."""
    pass
