import argparse
import logging
import sys
from typing import List, Optional

from src.config import DEFAULT_LADDER, LOG_LEVEL
from src.errors import FravarError, UsageError
from src.fracops import order_value
from src.functional import OUTER_FUNCTIONS
from src.systems import SYSTEMS
from src.handlers import (
    deriv_command,
    integral_command,
    field_op_command,
    elcheck_command,
    functional_command,
    stationarity_command,
    probe_green_command,
    probe_leibniz_command,
    probe_chain_command,
    probe_el_discrepancy_command,
    semiinverse_identify_command,
    semiinverse_verify_command,
    fixtures_command,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


def order_arg(text: str) -> float:
    """Порядок из командной строки, 0 < α <= 1."""
    try:
        return order_value(float(text))
    except (ValueError, FravarError) as e:
        raise argparse.ArgumentTypeError(str(e))


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"не целое число: {text!r}")
    if value < 2:
        raise argparse.ArgumentTypeError(f"нужно не меньше 2: {value}")
    return value


def _output_flags(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("table", "json"), default=None)
    p.add_argument("--out", default=None, help="файл вместо stdout")


def _function_flags(p: argparse.ArgumentParser):
    source = p.add_mutually_exclusive_group()
    source.add_argument("--expr", help="выражение от x, например \"x^2\"")
    source.add_argument("--expr-file")
    p.add_argument("--param", action="append", metavar="NAME=VALUE")


def _grid_flags(p: argparse.ArgumentParser):
    p.add_argument("--interval", nargs=2, type=float, default=[0.0, 1.0], metavar=("A", "B"))
    p.add_argument("--interval-x", nargs=2, type=float, default=None, metavar=("C", "D"),
                   help="второй отрезок: сетка становится двумерной")
    p.add_argument("--n", type=positive_int, default=64)
    p.add_argument("--m", type=positive_int, default=None, help="интервалов по x (по умолчанию n)")


def _problem_flags(p: argparse.ArgumentParser):
    problem = p.add_mutually_exclusive_group()
    problem.add_argument("--lagrangian")
    problem.add_argument("--lagrangian-file")
    problem.add_argument("--system", choices=sorted(SYSTEMS))
    p.add_argument("--alpha", type=order_arg, required=True)
    p.add_argument("--beta", type=order_arg, default=None)
    p.add_argument("--wrt", default=None)
    p.add_argument("--field", action="append", metavar="NAME=PATH")
    p.add_argument("--exogenous", action="append", metavar="NAME=PATH")
    p.add_argument("--source", action="append", metavar="NAME=EXPR")
    p.add_argument("--exo-source", action="append", metavar="NAME=EXPR")
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    _grid_flags(p)


def _ladder_flag(p: argparse.ArgumentParser):
    p.add_argument("--ladder", nargs="+", type=positive_int, default=list(DEFAULT_LADDER))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fravar",
        description="Дробное вариационное исчисление: операторы, уравнения Эйлера-Лагранжа, "
                    "функционалы, пробы и полуобратный метод",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="логи уровня INFO")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("deriv", help="модифицированная производная Римана-Лиувилля")
    p.add_argument("--alpha", type=order_arg, required=True)
    _function_flags(p)
    p.add_argument("--interval", nargs=2, type=float, default=[0.0, 1.0], metavar=("A", "B"))
    p.add_argument("--at", nargs="+", type=float, required=True)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--smooth", action="store_true", help="f непрерывно дифференцируема")
    _output_flags(p)
    p.set_defaults(handler=deriv_command)

    p = commands.add_parser("integral", help="дробный интеграл")
    p.add_argument("--alpha", type=order_arg, required=True)
    p.add_argument("--kind", choices=("rl", "dxa"), default="rl")
    _function_flags(p)
    p.add_argument("--interval", nargs=2, type=float, default=[0.0, 1.0], metavar=("A", "B"))
    p.add_argument("--at", nargs="+", type=float, required=True)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--smooth", action="store_true")
    _output_flags(p)
    p.set_defaults(handler=integral_command)

    p = commands.add_parser("field-op", help="дискретный оператор на поле")
    p.add_argument("--alpha", type=order_arg, required=True)
    p.add_argument("--kind", choices=("derivative", "integral"), default="derivative")
    p.add_argument("--axis", choices=("t", "x"), default="t")
    p.add_argument("--multiplicity", type=int, default=1)
    p.add_argument("--adjoint", action="store_true")
    p.add_argument("--field-file", default=None)
    _function_flags(p)
    _grid_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=field_op_command)

    p = commands.add_parser("elcheck", help="невязка Эйлера-Лагранжа")
    _problem_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=elcheck_command)

    p = commands.add_parser("functional", help="значение функционала")
    _problem_flags(p)
    _output_flags(p)
    p.set_defaults(handler=functional_command)

    p = commands.add_parser("stationarity", help="первая вариация против дискретного градиента")
    _problem_flags(p)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    _output_flags(p)
    p.set_defaults(handler=stationarity_command)

    probe = commands.add_parser("probe", help="численные пробы тождеств").add_subparsers(
        dest="probe", required=True)

    p = probe.add_parser("green")
    p.add_argument("--alpha", type=order_arg, required=True)
    p.add_argument("--beta", type=order_arg, default=None)
    p.add_argument("--p", required=True, help="P(t, x)")
    p.add_argument("--q", required=True, help="Q(t, x)")
    p.add_argument("--interval", nargs=2, type=float, default=[0.0, 1.0], metavar=("A", "B"))
    p.add_argument("--interval-x", nargs=2, type=float, default=None, metavar=("C", "D"))
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    _ladder_flag(p)
    _output_flags(p)
    p.set_defaults(handler=probe_green_command)

    p = probe.add_parser("leibniz")
    p.add_argument("--alpha", type=order_arg, required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--interval", nargs=2, type=float, default=[0.0, 1.0], metavar=("A", "B"))
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    _ladder_flag(p)
    _output_flags(p)
    p.set_defaults(handler=probe_leibniz_command)

    p = probe.add_parser("chain")
    p.add_argument("--alpha", type=order_arg, required=True)
    p.add_argument("--u", required=True)
    p.add_argument("--outer", choices=sorted(OUTER_FUNCTIONS), default="square_half")
    p.add_argument("--interval", nargs=2, type=float, default=[0.0, 1.0], metavar=("A", "B"))
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    _ladder_flag(p)
    _output_flags(p)
    p.set_defaults(handler=probe_chain_command)

    p = probe.add_parser("el-discrepancy")
    _problem_flags(p)
    _ladder_flag(p)
    _output_flags(p)
    p.set_defaults(handler=probe_el_discrepancy_command)

    semi = commands.add_parser("semiinverse", help="полуобратный метод").add_subparsers(
        dest="semiinverse", required=True)

    for name, handler in (("identify", semiinverse_identify_command),
                          ("verify", semiinverse_verify_command)):
        p = semi.add_parser(name)
        p.add_argument("--system", choices=("burgers", "kdv"), required=True)
        p.add_argument("--alpha", type=order_arg, default=0.5)
        p.add_argument("--beta", type=order_arg, default=None)
        p.add_argument("--n", type=positive_int, default=16)
        p.add_argument("--seed", type=int, default=0)
        if name == "identify":
            p.add_argument("--basis", action="append", metavar="MONOMIAL")
            p.add_argument("--samples", type=int, default=3)
        else:
            p.add_argument("--completion", default=None)
        _output_flags(p)
        p.set_defaults(handler=handler)

    p = commands.add_parser("fixtures", help="встроенные системы")
    p.add_argument("--system", choices=sorted(SYSTEMS), default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=fixtures_command)

    return parser


def setup_logging(verbose: bool = False):
    level = logging.INFO if verbose else getattr(logging, LOG_LEVEL, logging.WARNING)
    logging.basicConfig(
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        level=level,
        stream=sys.stderr,
    )
    logging.getLogger().setLevel(level)


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    setup_logging(args.verbose)
    try:
        return args.handler(args)
    except UsageError as e:
        logger.error(f"Ошибка ввода: {e}")
        return EXIT_USAGE
    except FravarError as e:
        logger.error(f"Численная ошибка: {e}")
        return EXIT_NUMERICAL
    except OSError as e:
        logger.error(f"Ошибка файла: {e}")
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
