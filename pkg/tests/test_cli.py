import json

import numpy as np
import pytest

from main import build_parser, run
from src.fieldio import parse_field, read_field, write_field
from src.fracgrid import Grid2D, make_grid, sample_field
from src.functional import FracMeasure, eval_functional
from src.lagexpr import parse


def output(capsys):
    return capsys.readouterr().out


def test_deriv_table(capsys):
    code = run(["deriv", "--alpha", "0.5", "--expr", "x^1", "--interval", "0", "1", "--at", "1.0"])
    assert code == 0
    value = float(output(capsys).split()[-1])
    assert value == pytest.approx(1.128379167, abs=1e-6)


def test_deriv_json(capsys):
    code = run(["deriv", "--alpha", "0.5", "--expr", "x^2", "--at", "0.5", "1.0", "--format", "json"])
    assert code == 0
    data = json.loads(output(capsys))
    assert data["schema"] == "fravar-report/1"
    assert [p["x"] for p in data["points"]] == [0.5, 1.0]


def test_integral_kinds(capsys):
    run(["integral", "--alpha", "0.5", "--expr", "1", "--at", "1.0", "--format", "json"])
    rl = json.loads(output(capsys))["points"][0]["value"]
    run(["integral", "--alpha", "0.5", "--kind", "dxa", "--expr", "1", "--at", "1.0", "--format", "json"])
    dxa = json.loads(output(capsys))["points"][0]["value"]
    assert rl == pytest.approx(dxa, rel=1e-12)


@pytest.mark.parametrize("argv", [
    ["deriv", "--alpha", "1.5", "--expr", "x", "--at", "0.5"],
    ["deriv", "--alpha", "0", "--expr", "x", "--at", "0.5"],
    ["deriv", "--alpha", "0.5", "--expr", "x", "--at", "2.0"],
    ["deriv", "--alpha", "0.5", "--expr", "D[x,t,9]", "--at", "0.5"],
    ["deriv", "--alpha", "0.5", "--at", "0.5"],
    ["semiinverse", "identify", "--system", "heat"],
    ["elcheck", "--alpha", "0.5", "--lagrangian", "y^2"],
    ["nonsense"],
])
def test_usage_errors(argv):
    assert run(argv) == 2


def test_help_exits_cleanly(capsys):
    assert run(["--help"]) == 0
    assert "deriv" in output(capsys)


def test_field_op_writes_field(tmp_path):
    out = tmp_path / "dy.csv"
    code = run(["field-op", "--alpha", "1", "--expr", "x^2", "--n", "8", "--out", str(out)])
    assert code == 0
    field, orders = read_field(out)
    assert orders == {"alpha": 1.0}
    assert field.values[0] == 0.0
    assert np.allclose(field.values[1:], np.diff(field.grid.nodes ** 2) / field.grid.h)


def test_field_op_to_stdout(capsys):
    assert run(["field-op", "--alpha", "0.5", "--expr", "x", "--n", "4"]) == 0
    field, orders = parse_field(output(capsys))
    assert orders == {"alpha": 0.5}
    assert field.grid == make_grid(0.0, 1.0, 4)


def test_field_op_from_file(tmp_path):
    grid = make_grid(0.0, 1.0, 16)
    source = tmp_path / "u.csv"
    write_field(source, sample_field(lambda x: 1.0 + 0.0 * x, grid))
    out = tmp_path / "du.csv"
    assert run(["field-op", "--alpha", "0.4", "--field-file", str(source), "--out", str(out)]) == 0
    field, _ = read_field(out)
    assert np.all(field.values == 0.0)


def test_elcheck_with_sources(tmp_path):
    out = tmp_path / "residual.csv"
    code = run(["elcheck", "--alpha", "1", "--lagrangian", "D[y,t,1]^2/2", "--source", "y=t^2",
                "--n", "64", "--out", str(out)])
    assert code == 0
    field, orders = parse_field(out.read_text(encoding="utf-8"))
    assert orders == {"alpha": 1.0, "beta": 1.0}
    assert np.allclose(field.values[2:], -2.0, atol=1e-8)


def test_elcheck_with_field_files(tmp_path):
    grid = make_grid(0.0, 1.0, 32)
    source = tmp_path / "theta.csv"
    write_field(source, sample_field(np.sin, grid))
    out = tmp_path / "residual.csv"
    code = run(["elcheck", "--system", "oscillator", "--alpha", "0.5",
                "--field", f"theta={source}", "--out", str(out)])
    assert code == 0
    assert read_field(out)[0].grid == grid


def test_functional_matches_library(capsys):
    code = run(["functional", "--alpha", "0.5", "--beta", "0.7", "--lagrangian", "y^2 + D[y,x,1]",
                "--source", "y=sin(t)*x", "--interval", "0", "1", "--interval-x", "0", "2",
                "--n", "16", "--format", "json"])
    assert code == 0
    value = json.loads(output(capsys))["functional"]

    grid = Grid2D(make_grid(0.0, 1.0, 16), make_grid(0.0, 2.0, 16))
    y = sample_field(lambda t, x: np.sin(t) * x, grid)
    expected = eval_functional(parse("y^2 + D[y,x,1]"), {"y": y}, FracMeasure(0.5, 0.7, grid))
    assert value == pytest.approx(expected, rel=1e-12)


def test_stationarity(capsys):
    code = run(["stationarity", "--system", "pendulum", "--alpha", "0.6", "--source", "y=t-t^2",
                "--n", "24", "--seed", "3", "--format", "json"])
    assert code == 0
    data = json.loads(output(capsys))
    assert data["wrt"] == "y"
    assert data["relative_error"] <= 1e-6


def test_probe_leibniz_json(capsys):
    code = run(["probe", "leibniz", "--alpha", "1", "--f", "x", "--g", "x^2", "--ladder", "32", "64"])
    assert code == 0
    data = json.loads(output(capsys))
    assert data["probe"] == "leibniz"
    assert [row["n"] for row in data["rows"]] == [32, 64]
    assert len(data["observed_orders"]) == 1


def test_probe_chain_table(capsys):
    code = run(["probe", "chain", "--alpha", "0.5", "--u", "sin(x)", "--outer", "exp",
                "--ladder", "16", "32", "--format", "table"])
    assert code == 0
    text = output(capsys)
    assert text.startswith("# chain: alpha=0.5")
    assert "order" in text.splitlines()[1]


def test_probe_green(capsys):
    code = run(["probe", "green", "--alpha", "0.5", "--beta", "0.9", "--p", "t*x", "--q", "x^2",
                "--ladder", "8", "16"])
    assert code == 0
    data = json.loads(output(capsys))
    assert data["beta"] == 0.9
    assert len(data["rows"]) == 2


def test_probe_el_discrepancy(capsys):
    code = run(["probe", "el-discrepancy", "--alpha", "1", "--lagrangian", "D[y,t,1]^2/2 + cos(y)",
                "--source", "y=sin(t)+t", "--ladder", "32", "64"])
    assert code == 0
    data = json.loads(output(capsys))
    errors = [row["l2"] for row in data["rows"]]
    assert errors[0] > errors[1]


def test_semiinverse_identify_kdv(capsys):
    code = run(["semiinverse", "identify", "--system", "kdv", "--alpha", "0.5", "--beta", "0.5"])
    assert code == 0
    data = json.loads(output(capsys))
    coefficients = data["coefficients"]
    assert coefficients["u^3"] == pytest.approx(1.0, abs=1e-8)
    assert abs(coefficients["u^2"]) <= 1e-8
    assert data["rank"] == 4


def test_semiinverse_identify_is_deterministic(capsys):
    argv = ["semiinverse", "identify", "--system", "burgers", "--alpha", "0.3", "--beta", "0.7",
            "--seed", "5"]
    run(argv)
    first = output(capsys)
    run(argv)
    assert output(capsys) == first


def test_semiinverse_rank_deficiency_is_numerical_error():
    code = run(["semiinverse", "identify", "--system", "kdv", "--basis", "u^2", "--basis", "u^2"])
    assert code == 1


def test_semiinverse_verify(capsys):
    code = run(["semiinverse", "verify", "--system", "burgers", "--alpha", "0.5", "--beta", "1"])
    assert code == 0
    data = json.loads(output(capsys))
    assert data["agreement_max"] <= 1e-8
    assert data["classical_space"] is True


def test_fixtures_to_directory(tmp_path):
    assert run(["fixtures", "--out-dir", str(tmp_path)]) == 0
    for name in ("oscillator", "pendulum", "burgers", "kdv"):
        assert (tmp_path / f"{name}.lag").exists()
        meta = json.loads((tmp_path / f"{name}.json").read_text(encoding="utf-8"))
        assert meta["name"] == name


def test_fixture_file_feeds_elcheck(tmp_path):
    run(["fixtures", "--system", "pendulum", "--out-dir", str(tmp_path)])
    out = tmp_path / "residual.csv"
    code = run(["elcheck", "--lagrangian-file", str(tmp_path / "pendulum.lag"), "--alpha", "0.8",
                "--source", "y=t", "--n", "16", "--out", str(out)])
    assert code == 0
    assert read_field(out)[0].values.shape == (17,)


def test_fixtures_json(capsys):
    assert run(["fixtures", "--system", "kdv"]) == 0
    data = json.loads(output(capsys))
    assert [s["name"] for s in data["systems"]] == ["kdv"]


def test_parser_defaults():
    args = build_parser().parse_args(["probe", "leibniz", "--alpha", "0.5", "--f", "x", "--g", "x"])
    assert args.ladder == [32, 64, 128, 256]
    assert args.interval == [0.0, 1.0]
