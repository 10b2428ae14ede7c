import logging
import os
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"{name}={raw!r} не число, используется {default}")
        return default


# Точность квадратур (переменная окружения FRAVAR_TOL)
DEFAULT_TOL = _env_float("FRAVAR_TOL", 1e-8)

# Квадратура с особым ядром
QUAD_NODES = 16               # узлов Гаусса на ячейку
INITIAL_GRADING_DEPTH = 4     # начальная глубина сгущения сетки
MAX_GRADING_DEPTH = 64        # предел удвоения глубины
DERIVATIVE_GRADING_DEPTH = 48  # фиксированная глубина для производной негладких f
FD_RELATIVE_STEP = 1e-3       # шаг разностей по x относительно (x - a)

# Сетки и операторы
MAX_MULTIPLICITY = 4          # D^{k·alpha} только композицией, k <= 4
INTERIOR_MARGIN = 2           # внутренние узлы: не ближе 2 ячеек к границе
DEFAULT_LADDER = (32, 64, 128, 256)

# Полуобратный метод
ZERO_COEFFICIENT = 1e-8       # |c| меньше этого считаем точным нулём
MIN_SAMPLES = 3

# Вывод
REPORT_SCHEMA = "fravar-report/1"
FIELD_FORMAT = "fravar-field v1"
JSON_DIGITS = 17
TABLE_DIGITS = 10

LOG_LEVEL = os.getenv("FRAVAR_LOG_LEVEL", "WARNING").upper()
