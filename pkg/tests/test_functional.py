import json
import math

import numpy as np
import pytest

from src.errors import GridMismatchError, UsageError
from src.fracgrid import DERIVATIVE, Field, Grid2D, build_operator, make_grid, sample_field
from src.fracops import gamma, power_law_oracle
from src.functional import (
    FracMeasure, Perturbation, axis_weights, chainrule_ladder, chainrule_probe, eval_functional,
    first_variation, green_ladder, green_probe, leibniz_ladder, leibniz_probe,
)
from src.lagexpr import parse
from src.reports import dump_json


def square(n, a=0.0, b=1.0, c=0.0, d=1.0):
    return Grid2D(make_grid(a, b, n), make_grid(c, d, n))


@pytest.mark.parametrize("alpha", [0.2, 0.5, 1.0])
def test_axis_weights(alpha):
    grid = make_grid(0.5, 2.0, 40)
    weights = axis_weights(grid, alpha)
    assert np.all(weights >= 0.0)
    assert weights.sum() == pytest.approx(1.5 ** alpha, rel=1e-12)


def test_axis_weights_order_one_is_trapezoid():
    grid = make_grid(0.0, 1.0, 8)
    expected = np.full(9, grid.h)
    expected[[0, -1]] = grid.h / 2
    assert np.allclose(axis_weights(grid, 1.0), expected)


def test_axis_weights_exact_for_linear():
    # ∫_0^1 ξ α(1 - ξ)^{α-1} dξ = 1/(α + 1)
    grid = make_grid(0.0, 1.0, 16)
    alpha = 0.3
    assert np.dot(axis_weights(grid, alpha), grid.nodes) == pytest.approx(1.0 / (alpha + 1.0))


def test_normalisation_unit_square():
    one = parse("1")
    measure = FracMeasure(1.0, 1.0, square(16))
    assert eval_functional(one, {}, measure) == pytest.approx(1.0, abs=1e-10)
    measure = FracMeasure(0.5, 0.5, square(16))
    assert eval_functional(one, {}, measure) == pytest.approx(4.0 / math.pi, abs=1e-6)


def test_normalisation_random_rectangles(rng):
    one = parse("1")
    for _ in range(20):
        a, c = rng.uniform(-1.0, 1.0, size=2)
        b, d = a + rng.uniform(0.2, 2.0), c + rng.uniform(0.2, 2.0)
        alpha, beta = rng.uniform(0.1, 1.0, size=2)
        measure = FracMeasure(alpha, beta, square(12, a, b, c, d))
        expected = (b - a) ** alpha * (d - c) ** beta / (gamma(1 + alpha) * gamma(1 + beta))
        assert eval_functional(one, {}, measure) == pytest.approx(expected, rel=1e-6)


def test_one_dimensional_measure():
    measure = FracMeasure(0.5, 0.5, make_grid(0.0, 1.0, 10))
    assert not measure.is_2d
    assert measure.integrate(1.0) == pytest.approx(1.0 / gamma(1.5))
    with pytest.raises(UsageError):
        measure.x_weights


def test_zero_field_gives_zero(unit_square):
    measure = FracMeasure(0.6, 0.4, unit_square)
    y = np.zeros(unit_square.shape)
    assert eval_functional(parse("y^2 + D[y,t,1]^2"), {"y": y}, measure) == 0.0


def test_linearity_in_lagrangian(unit_square, rng):
    measure = FracMeasure(0.7, 0.5, unit_square)
    fields = {"y": rng.standard_normal(unit_square.shape)}
    j1 = eval_functional(parse("y^2"), fields, measure)
    j2 = eval_functional(parse("D[y,x,1]*t"), fields, measure)
    j = eval_functional(parse("2*y^2 - 3*D[y,x,1]*t"), fields, measure)
    assert j == pytest.approx(2 * j1 - 3 * j2, rel=1e-12, abs=1e-12)


def test_additivity_for_integer_orders():
    L = parse("t*x + x^2", fields=())
    whole = eval_functional(L, {}, FracMeasure(1.0, 1.0, square(16)))
    left = eval_functional(L, {}, FracMeasure(1.0, 1.0, Grid2D(make_grid(0.0, 0.5, 8),
                                                                make_grid(0.0, 1.0, 16))))
    right = eval_functional(L, {}, FracMeasure(1.0, 1.0, Grid2D(make_grid(0.5, 1.0, 8),
                                                                 make_grid(0.0, 1.0, 16))))
    assert whole == pytest.approx(left + right, abs=1e-12)


def test_exogenous_and_params(unit_square):
    measure = FracMeasure(1.0, 1.0, unit_square)
    L = parse("k*F", fields=(), exogenous=("F",), params=("k",))
    F = np.full(unit_square.shape, 2.0)
    assert eval_functional(L, {}, measure, {"F": F}, {"k": 1.5}) == pytest.approx(3.0)


def test_first_variation_zero_perturbation(unit_square, rng):
    measure = FracMeasure(0.5, 0.5, unit_square)
    fields = {"y": rng.standard_normal(unit_square.shape)}
    pert = Perturbation(Field(unit_square, np.zeros(unit_square.shape)))
    assert first_variation(parse("sin(y)*D[y,t,1]"), fields, measure, pert, "y") == 0.0


def test_perturbation_validation(unit_line):
    eta = np.ones(unit_line.shape)
    with pytest.raises(UsageError):
        Perturbation(Field(unit_line, eta))
    eta[[0, -1]] = 0.0
    with pytest.raises(UsageError):
        Perturbation(Field(unit_line, eta), epsilon=0.0)
    Perturbation(Field(unit_line, eta), epsilon=1e-3)


def test_first_variation_unknown_field(unit_line):
    measure = FracMeasure(0.5, 0.5, unit_line)
    eta = np.zeros(unit_line.shape)
    with pytest.raises(UsageError):
        first_variation(parse("y^2"), {"y": eta}, measure, Perturbation(Field(unit_line, eta)), "u")


def test_green_constant_potentials(unit_square):
    measure = FracMeasure(0.5, 0.7, unit_square)
    P = np.full(unit_square.shape, 2.0)
    Q = np.full(unit_square.shape, -1.0)
    result = green_probe(P, Q, measure)
    assert result.lhs == 0.0
    assert result.rhs == pytest.approx(0.0, abs=1e-15)


def test_green_requires_2d(unit_line):
    values = np.zeros(unit_line.shape)
    with pytest.raises(GridMismatchError):
        green_probe(values, values, FracMeasure(0.5, 0.5, unit_line))


def test_green_order_one_converges():
    report = green_ladder(lambda t, x: t * np.sin(x), lambda t, x: t ** 2 * x, 1.0, 1.0,
                          ladder=(16, 32, 64, 128))
    gaps = [abs(g) for g in report.column("gap")]
    assert gaps[0] > gaps[1] > gaps[2] > gaps[3]
    assert 0.8 < report.observed_orders[-1] < 1.2


def test_green_fractional_report():
    report = green_ladder(lambda t, x: t * x, lambda t, x: t + x ** 2, 0.5, 0.8, ladder=(8, 16))
    data = report.to_dict()
    assert data["schema"] == "fravar-report/1"
    assert data["probe"] == "green"
    assert [row["n"] for row in data["rows"]] == [8, 16]
    assert all(math.isfinite(row["gap"]) for row in data["rows"])
    dump_json(data)


def test_report_json_reads_back_exactly():
    data = {"b": 0.1 + 0.2, "a": 1.0 / 3.0, "c": [math.pi, 2.5e-17]}
    text = dump_json(data)
    assert json.loads(text) == data
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "0.30000000000000004" in text
    with pytest.raises(ValueError):
        dump_json({"gap": float("nan")})


def test_leibniz_constant_factor(unit_line):
    op = build_operator(0.5, DERIVATIVE, unit_line)
    f = np.full(unit_line.shape, 3.0)
    g = sample_field(np.sin, unit_line)
    result = leibniz_probe(f, g, op)
    assert result.max <= 1e-10


def test_leibniz_order_one_converges():
    report = leibniz_ladder(lambda x: x, lambda x: x ** 2, 1.0, ladder=(64, 128, 256))
    errors = report.column("l2")
    assert 1.7 < errors[0] / errors[1] < 2.3
    assert 1.7 < errors[1] / errors[2] < 2.3


def test_leibniz_fractional_gap_matches_closed_form():
    grid = make_grid(0.0, 1.0, 1024)
    op = build_operator(0.5, DERIVATIVE, grid)
    x = sample_field(lambda x: x, grid)
    result = leibniz_probe(x, x, op)
    expected = power_law_oracle(2.0, 0.5, 1.0) - 2.0 * power_law_oracle(1.0, 0.5, 1.0)
    assert result.residual.values[-1] == pytest.approx(expected, abs=1e-2)


def test_chainrule_constant(unit_line):
    op = build_operator(0.4, DERIVATIVE, unit_line)
    for outer in ("square_half", "sin", "cos", "exp"):
        result = chainrule_probe(np.full(unit_line.shape, 0.7), op, outer)
        assert result.max <= 1e-10


def test_chainrule_order_one_converges():
    report = chainrule_ladder(lambda x: np.sin(2 * x), 1.0, "square_half", ladder=(64, 128, 256))
    errors = report.column("l2")
    assert 1.7 < errors[0] / errors[1] < 2.3
    assert report.params["outer"] == "square_half"


def test_chainrule_unknown_outer(unit_line):
    op = build_operator(0.4, DERIVATIVE, unit_line)
    with pytest.raises(UsageError):
        chainrule_probe(np.zeros(unit_line.shape), op, "tanh")
