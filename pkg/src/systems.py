"""Встроенные системы: осциллятор, маятник, Бюргерс, КдФ."""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from src.errors import UsageError
from src.lagexpr import Expr, JetVar, parse, substitute


@dataclass(frozen=True)
class Constraint:
    """Определение производной потенциала: jet = rhs."""
    jet: JetVar
    rhs: str


@dataclass(frozen=True)
class TargetTerm:
    """Слагаемое sign·D_axis^m(expr) целевой невязки. axis=None означает без оператора."""
    sign: int
    axis: Optional[str]
    multiplicity: int
    expr: str


@dataclass(frozen=True)
class SystemFixture:
    name: str
    title: str
    trial: str
    fields: Tuple[str, ...]
    wrt: str
    target: Tuple[TargetTerm, ...]
    exogenous: Tuple[str, ...] = ()
    params: Dict[str, float] = field(default_factory=dict)
    constraints: Tuple[Constraint, ...] = ()
    placeholder: Optional[str] = None
    completion: Optional[str] = None
    identify_wrt: Optional[str] = None
    constrained_functional: Optional[str] = None
    note: str = ""

    @property
    def dimensions(self) -> int:
        return 2 if self.constraints else 1

    def parse(self, text: str) -> Expr:
        return parse(text, fields=self.fields, exogenous=self.exogenous, params=tuple(self.params))

    @property
    def lagrangian(self) -> Expr:
        return self.parse(self.trial)

    @property
    def expected_completion(self) -> Optional[Expr]:
        return self.parse(self.completion) if self.completion else None

    def completed(self, completion: Optional[Expr] = None) -> Expr:
        """Пробный лагранжиан с подставленным недостающим членом."""
        if self.placeholder is None:
            return self.lagrangian
        completion = completion if completion is not None else self.expected_completion
        return substitute(self.lagrangian, holes={self.placeholder: completion})

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "title": self.title,
            "trial": self.trial,
            "fields": list(self.fields),
            "exogenous": list(self.exogenous),
            "params": dict(self.params),
            "wrt": self.wrt,
            "constraints": [{"jet": str(c.jet), "rhs": c.rhs} for c in self.constraints],
            "placeholder": self.placeholder,
            "completion": self.completion,
            "identify_wrt": self.identify_wrt,
            "constrained_functional": self.constrained_functional,
            "target": [
                {"sign": t.sign, "axis": t.axis, "multiplicity": t.multiplicity, "expr": t.expr}
                for t in self.target
            ],
            "note": self.note,
        }


OSCILLATOR = SystemFixture(
    name="oscillator",
    title="Дробный гармонический осциллятор",
    trial="0.5*D[theta,t,1]^2 - 0.5*mgl*theta^2",
    fields=("theta",),
    params={"mgl": 1.0},
    wrt="theta",
    target=(
        TargetTerm(-1, "t", 2, "theta"),
        TargetTerm(-1, None, 0, "mgl*theta"),
    ),
    note=(
        "Невязка Эйлера-Лагранжа даёт D^{2α}θ + mgl·θ = 0. В исходной записи "
        "уравнения стоит D^{2α}θ - mgl·θ = 0; здесь знак взят из самой формулы "
        "Эйлера-Лагранжа."
    ),
)

PENDULUM = SystemFixture(
    name="pendulum",
    title="Дробный математический маятник",
    trial="D[y,t,1]^2/2 + cos(y)",
    fields=("y",),
    wrt="y",
    target=(
        TargetTerm(-1, "t", 2, "y"),
        TargetTerm(-1, None, 0, "sin(y)"),
    ),
)

BURGERS = SystemFixture(
    name="burgers",
    title="Дробное уравнение Бюргерса",
    trial="u*D[phi,t,1] - (u^2/2 + F)*D[phi,x,1] + ?G",
    fields=("u", "phi"),
    exogenous=("F",),
    wrt="phi",
    constraints=(
        Constraint(JetVar("phi", "x", 1), "u"),
        Constraint(JetVar("phi", "t", 1), "u^2/2 + F"),
    ),
    placeholder="G",
    completion="u^3/6 - F*u",
    identify_wrt="u",
    constrained_functional="u^3/6 - F*u",
    target=(
        TargetTerm(-1, "t", 1, "u"),
        TargetTerm(1, "x", 1, "u^2/2 + F"),
    ),
    note="При β = 1 ограниченный функционал относится к классическому пространству.",
)

KDV = SystemFixture(
    name="kdv",
    title="Дробное уравнение Кортевега-де Фриза",
    trial="u*D[phi,t,1] - (3*u^2 + D[u,x,2])*D[phi,x,1] + ?F",
    fields=("u", "phi"),
    wrt="phi",
    constraints=(
        Constraint(JetVar("phi", "x", 1), "u"),
        Constraint(JetVar("phi", "t", 1), "3*u^2 + D[u,x,2]"),
    ),
    placeholder="F",
    completion="u^3",
    identify_wrt="u",
    constrained_functional="u*D[phi,t,1] - (3*u^2 + D[u,x,2])*D[phi,x,1] + u^3",
    target=(
        TargetTerm(-1, "t", 1, "u"),
        TargetTerm(1, "x", 1, "3*u^2 + D[u,x,2]"),
    ),
    note="Граничные вклады от D[u,x,2] в ограниченном функционале опущены.",
)

SYSTEMS = {s.name: s for s in (OSCILLATOR, PENDULUM, BURGERS, KDV)}


def builtin_system(name: str) -> SystemFixture:
    if name not in SYSTEMS:
        raise UsageError(f"Неизвестная система {name!r}. Доступны: {', '.join(SYSTEMS)}")
    return SYSTEMS[name]
