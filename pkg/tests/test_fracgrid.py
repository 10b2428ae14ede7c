import numpy as np
import pytest

from src.errors import DomainError, EvaluationError, GridMismatchError, UsageError
from src.fracgrid import (
    DERIVATIVE, INTEGRAL, Field, Grid2D, apply_adjoint, apply_along_axis, apply_operator,
    boundary_mask, build_operator, compose_order, gl_coefficients, interior_mask, make_grid,
    make_grid2d, sample_field,
)
from src.fracops import power_law_oracle


def test_grid_nodes():
    grid = make_grid(1.0, 2.0, 4)
    assert grid.h == pytest.approx(0.25)
    assert np.allclose(grid.nodes, [1.0, 1.25, 1.5, 1.75, 2.0])
    assert grid.shape == (5,)


@pytest.mark.parametrize("a, b, n", [(0.0, 1.0, 1), (1.0, 0.0, 8), (0.0, float("inf"), 8)])
def test_bad_grids(a, b, n):
    with pytest.raises(DomainError):
        make_grid(a, b, n)


def test_grid2d_mesh():
    grid = make_grid2d(0.0, 1.0, 4, 0.0, 2.0, 8)
    t, x = grid.mesh()
    assert grid.shape == (5, 9)
    assert t.shape == x.shape == (5, 9)
    assert t[3, 0] == pytest.approx(0.75)
    assert x[0, 3] == pytest.approx(0.75)
    assert grid.axis_grid("x").n == 8


def test_field_is_frozen_copy():
    grid = make_grid(0.0, 1.0, 4)
    raw = np.arange(5.0)
    f = Field(grid, raw)
    raw[0] = 100.0
    assert f.values[0] == 0.0
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_field_validation():
    grid = make_grid(0.0, 1.0, 4)
    with pytest.raises(GridMismatchError):
        Field(grid, np.zeros(4))
    with pytest.raises(EvaluationError):
        Field(grid, np.array([0.0, 1.0, np.inf, 0.0, 0.0]))


def test_field_helpers():
    grid = make_grid(0.0, 1.0, 4)
    f = Field(grid, np.arange(5.0))
    g = f.with_values(2.0 * f.values)
    assert g.grid == grid
    assert np.array_equal(g.values, [0.0, 2.0, 4.0, 6.0, 8.0])
    assert np.array_equal(f.interior_values(1), [1.0, 2.0, 3.0])
    assert np.array_equal(f.interior_values(2), [2.0])


def test_masks():
    grid = make_grid(0.0, 1.0, 10)
    assert interior_mask(grid).sum() == 7
    assert boundary_mask(grid).sum() == 2
    square = Grid2D(grid, grid)
    assert interior_mask(square).sum() == 49
    assert boundary_mask(square).sum() == 121 - 81


def test_gl_coefficients():
    assert np.allclose(gl_coefficients(1.0, 4), [1.0, -1.0, 0.0, 0.0])
    assert np.allclose(gl_coefficients(0.5, 3), [1.0, -0.5, -0.125])
    assert np.allclose(gl_coefficients(-1.0, 4), [1.0, 1.0, 1.0, 1.0])


def test_derivative_converges_first_order():
    alpha = 0.5
    errors = []
    for n in (128, 256, 512):
        grid = make_grid(0.0, 1.0, n)
        op = build_operator(alpha, DERIVATIVE, grid)
        values = apply_operator(op, sample_field(lambda x: x ** 2, grid)).values
        errors.append(abs(values[-1] - power_law_oracle(2.0, alpha, 1.0)))
    assert errors[0] > errors[1] > errors[2]
    assert 1.7 < errors[1] / errors[2] < 2.3


def test_constant_is_annihilated_exactly(unit_line):
    op = build_operator(0.3, DERIVATIVE, unit_line)
    out = apply_operator(op, Field(unit_line, np.full(unit_line.shape, 7.5)))
    assert np.all(out.values == 0.0)


def test_order_one_is_backward_difference(unit_line, rng):
    values = rng.standard_normal(unit_line.shape)
    op = build_operator(1.0, DERIVATIVE, unit_line)
    out = op.apply_values(values)
    assert out[0] == 0.0
    assert np.allclose(out[1:], np.diff(values) / unit_line.h)


@pytest.mark.parametrize("kind", [DERIVATIVE, INTEGRAL])
def test_matrix_matches_apply(kind, unit_line, rng):
    op = build_operator(0.6, kind, unit_line)
    values = rng.standard_normal(unit_line.shape)
    assert np.allclose(op.matrix() @ values, op.apply_values(values), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("kind", [DERIVATIVE, INTEGRAL])
def test_adjoint_is_exact_transpose(kind, unit_line, rng):
    op = build_operator(0.4, kind, unit_line)
    u = rng.standard_normal(unit_line.shape)
    v = rng.standard_normal(unit_line.shape)
    adjoint = op.adjoint_values(v)
    assert np.allclose(adjoint, op.matrix().T @ v, rtol=1e-12, atol=1e-10)
    lhs = np.dot(op.apply_values(u), v)
    rhs = np.dot(u, adjoint)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-10)


def test_adjoint_field_wrapper(unit_line, rng):
    op = build_operator(0.4, DERIVATIVE, unit_line)
    v = Field(unit_line, rng.standard_normal(unit_line.shape))
    assert np.array_equal(apply_adjoint(op, v).values, op.adjoint_values(v.values))


def test_causality(unit_line, rng):
    op = build_operator(0.7, DERIVATIVE, unit_line)
    values = rng.standard_normal(unit_line.shape)
    changed = values.copy()
    changed[40:] += 1.0
    assert np.array_equal(op.apply_values(values)[:40], op.apply_values(changed)[:40])


def test_integral_inverts_derivative(unit_line, rng):
    alpha = 0.35
    values = rng.standard_normal(unit_line.shape)
    derivative = build_operator(alpha, DERIVATIVE, unit_line)
    integral = build_operator(alpha, INTEGRAL, unit_line)
    restored = integral.apply_values(derivative.apply_values(values))
    assert np.allclose(restored, values - values[0], atol=1e-10)


def test_composition(unit_line, rng):
    op = build_operator(0.5, DERIVATIVE, unit_line)
    pipeline = compose_order(op, 3)
    values = rng.standard_normal(unit_line.shape)
    expected = op.apply_values(op.apply_values(op.apply_values(values)))
    assert np.array_equal(pipeline.apply_values(values), expected)
    assert np.allclose(pipeline.matrix() @ values, expected, rtol=1e-10, atol=1e-8)
    assert np.allclose(pipeline.adjoint_values(values), pipeline.matrix().T @ values,
                       rtol=1e-10, atol=1e-8)


@pytest.mark.parametrize("k", [0, 5, 1.5])
def test_composition_bounds(unit_line, k):
    op = build_operator(0.5, DERIVATIVE, unit_line)
    with pytest.raises(UsageError):
        compose_order(op, k)


def test_unknown_kind(unit_line):
    with pytest.raises(UsageError):
        build_operator(0.5, "laplacian", unit_line)


def test_grid_mismatch(unit_line):
    op = build_operator(0.5, DERIVATIVE, unit_line)
    other = make_grid(0.0, 2.0, 64)
    with pytest.raises(GridMismatchError):
        apply_operator(op, Field(other, np.zeros(other.shape)))


def test_apply_along_axis(unit_square, rng):
    field = Field(unit_square, rng.standard_normal(unit_square.shape))
    op_t = build_operator(0.5, DERIVATIVE, unit_square.t_grid)
    op_x = build_operator(0.8, DERIVATIVE, unit_square.x_grid)

    along_t = apply_along_axis(op_t, field, "t").values
    along_x = apply_along_axis(op_x, field, "x").values
    for j in range(unit_square.shape[1]):
        assert np.allclose(along_t[:, j], op_t.apply_values(field.values[:, j]))
    for i in range(unit_square.shape[0]):
        assert np.allclose(along_x[i, :], op_x.apply_values(field.values[i, :]))

    with pytest.raises(UsageError):
        apply_along_axis(op_t, field, "z")


def test_apply_along_axis_checks_grid(unit_square):
    field = Field(unit_square, np.zeros(unit_square.shape))
    op = build_operator(0.5, DERIVATIVE, make_grid(0.0, 1.0, 32))
    with pytest.raises(GridMismatchError):
        apply_along_axis(op, field, "t")


def test_sample_field_2d(unit_square):
    field = sample_field(lambda t, x: t + 2.0 * x, unit_square)
    assert field.values[4, 8] == pytest.approx(4 / 16 + 2.0 * 8 / 16)
    constant = sample_field(lambda t, x: 1.0, unit_square)
    assert constant.values.shape == unit_square.shape
