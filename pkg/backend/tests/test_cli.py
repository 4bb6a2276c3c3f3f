import csv
import io
import json
import math

import pytest

from cli import CliConfig, main, parse_direction
from nrspace.algebra import load_spec
from nrspace.errors import DirectionError


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_builtin(capsys):
    code, out, _ = run(capsys, "validate", "--space", "sp2_su2")
    assert code == 0
    assert out.startswith("sp2_su2: 0 violations")
    assert "jacobi: 120 checked, 0 violated" in out
    assert "matrix oracle: all 45 pairs agree" in out


def test_validate_json(capsys):
    code, out, _ = run(capsys, "validate", "--space", "su2_biinv", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["ok"] is True and payload["violations"] == []


def test_validate_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "validate", "--space", str(tmp_path / "absent.json"))
    assert code == 2
    assert "unknown space" in err


def test_validate_broken_spec(capsys, tmp_path):
    one = ["1", "0", "0", "0", "0", "0", "0", "0"]
    minus = ["-1", "0", "0", "0", "0", "0", "0", "0"]
    doc = {
        "name": "broken",
        "dim_g": 3,
        "dim_m": 3,
        "labels": ["a", "b", "c"],
        "normal": False,
        "brackets": [
            {"i": 1, "j": 2, "terms": [{"k": 3, "coeff": one}]},
            {"i": 2, "j": 3, "terms": [{"k": 1, "coeff": one}]},
            {"i": 1, "j": 3, "terms": [{"k": 1, "coeff": minus}]},
        ],
    }
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "validate", "--space", str(path))
    assert code == 1
    assert "jacobi (1, 2, 3)" in out


def test_validate_malformed_file(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x", "dim_g": 2, "dim_m": 3, "labels": ["a", "b"]}')
    code, _, err = run(capsys, "validate", "--space", str(path))
    assert code == 2
    assert "dim_m" in err


def test_curvature_at_q1(capsys):
    code, out, _ = run(capsys, "curvature", "--direction", "1,0,0,0,0,0,0")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# R_0"
    assert lines[4] == "0,0,0,25/4,0,0,0"
    assert lines[2] == "0,1/4,0,0,0,0,0"
    assert "# osculating rank: 2 (coefficients -1, 0)" in lines
    assert any("locally symmetric along this direction" in line for line in lines)


def test_curvature_random_direction_is_deterministic(capsys):
    _, first, _ = run(capsys, "curvature", "--direction", "random:7")
    _, second, _ = run(capsys, "curvature", "--direction", "random:7")
    assert first == second
    assert "locally symmetric along this direction" not in first


def test_curvature_json_and_symmetric_space(capsys):
    code, out, _ = run(capsys, "curvature", "--space", "su2_biinv", "--direction", "1,0,0", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["R_0"][1][1] == "1/4"
    assert payload["rank"] == "osculating rank: 0 (locally symmetric space)"


def test_curvature_zero_direction(capsys):
    code, _, err = run(capsys, "curvature", "--direction", "0,0,0,0,0,0,0")
    assert code == 2
    assert "error" in err


def test_parse_direction(v1):
    exact = parse_direction(v1, "3/5,4/5,0,0,0,0,0")
    assert exact.exact
    floats = parse_direction(v1, "1,1,0,0,0,0,0")
    assert floats[0] == pytest.approx(2 ** -0.5)
    with pytest.raises(DirectionError):
        parse_direction(v1, "1,0")
    with pytest.raises(DirectionError):
        parse_direction(v1, "random:x")


def test_jacobi_flat_table(capsys):
    code, out, _ = run(
        capsys, "jacobi", "--space", "flat7", "--direction", "1,0,0,0,0,0,0", "--t-stop", "2", "--t-steps", "4", "--order", "10"
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 5
    assert float(rows[0]["det"]) == 0.0
    for row in rows:
        t = float(row["t"])
        assert float(row["det"]) == pytest.approx(t ** 7)
        assert float(row["A1_1"]) == pytest.approx(t)


def test_jacobi_with_rk_columns(capsys):
    code, out, _ = run(capsys, "jacobi", "--direction", "random:3", "--t-stop", "1", "--t-steps", "2", "--rk")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert all(float(row["rk_max_diff"]) <= 1e-6 for row in rows)


def test_jacobi_truncation_exit_code(capsys):
    code, _, err = run(capsys, "jacobi", "--direction", "random:1", "--t-stop", "3", "--t-steps", "1", "--order", "3")
    assert code == 1
    assert "tail bound" in err


def test_volume_table_is_reproducible(capsys, tmp_path):
    args = ["volume", "--space", "su2_biinv", "--t-stop", "3", "--t-steps", "3", "--samples", "64", "--seed", "5"]
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    assert main(args + ["--output", str(first)]) == 0
    assert main(args + ["--output", str(second)]) == 0
    assert first.read_text() == second.read_text()
    rows = list(csv.DictReader(io.StringIO(first.read_text())))
    assert list(rows[0]) == ["t", "theta_mean", "theta_stderr", "area", "volume"]
    assert len(rows) == 4


def test_volume_json(capsys):
    code, out, _ = run(capsys, "volume", "--space", "flat7", "--t-steps", "2", "--samples", "16", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["config"]["samples"] == 16
    assert len(payload["rows"]) == 3


def test_identities(capsys):
    code, out, _ = run(capsys, "identities", "--max-k", "12")
    assert code == 0
    assert "shifted_sign_holds: True" in out
    assert "doubled_identities_hold: True" in out


def test_export_round_trip(capsys, tmp_path, v1):
    path = tmp_path / "v1.json"
    assert main(["export", "--output", str(path)]) == 0
    assert load_spec(str(path)) == v1
    code, out, _ = run(capsys, "export", "--space", "su2_biinv")
    assert code == 0 and json.loads(out)["dim_g"] == 3


def test_cli_config_grid():
    config = CliConfig(command="jacobi", t_start=0.0, t_stop=1.0, t_steps=4)
    assert config.grid() == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_bad_option_value_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["volume", "--samples", "0"])
    assert info.value.code == 2


def test_jacobi_reaches_pi_with_default_order(capsys):
    code, out, _ = run(capsys, "jacobi", "--direction", "random:2", "--t-stop", "3.14159", "--t-steps", "4")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 5


def test_volume_reaches_three_with_default_order(capsys):
    code, out, err = run(
        capsys, "volume", "--space", "sp2_su2", "--t-stop", "3", "--t-steps", "3", "--samples", "32", "--seed", "1"
    )
    assert code == 0, err
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(row["t"]) for row in rows] == [0.0, 1.0, 2.0, 3.0]
    volumes = [float(row["volume"]) for row in rows]
    assert volumes == sorted(volumes)


def test_jacobi_field_columns(capsys):
    code, out, _ = run(
        capsys, "jacobi", "--space", "su2_biinv", "--direction", "1,0,0", "--field", "0,1,0", "--t-stop", "2", "--t-steps", "2"
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["t", "Y1", "Y2", "Y3", "dY1", "dY2", "dY3"]
    for row in rows:
        t = float(row["t"])
        assert float(row["Y2"]) == pytest.approx(2 * math.sin(t / 2), abs=1e-10)
        assert float(row["dY2"]) == pytest.approx(math.cos(t / 2), abs=1e-10)


def test_jacobi_field_needs_dim_m_coordinates(capsys):
    code, _, err = run(capsys, "jacobi", "--space", "su2_biinv", "--direction", "1,0,0", "--field", "0,1")
    assert code == 2
    assert "field initial derivative" in err
