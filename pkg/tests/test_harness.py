import json
import math

import numpy as np
import pytest

from hjselect import io
from hjselect.cli import main
from hjselect.config import load_config, resolve
from hjselect.errors import ConfigError, SchemaError
from hjselect.geometry import StarDomain, build_grid
from hjselect.measures import DiscreteMeasure

BASE = {
    "domain": {"kind": "interval", "a": -1.0, "b": 1.0},
    "h": 0.05,
    "hamiltonian": {"preset": "mech", "V": {"kind": "quadratic", "a": 1.0}},
}


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ------------------------------------------------------------ config
def test_defaults_filled():
    cfg = resolve(BASE)
    assert cfg["seed"] == 0 and cfg["hamiltonian"]["kappa"] == 1.0
    assert cfg["sweep"]["lambdas"] == pytest.approx([0.2 * 0.5 ** k for k in range(6)])
    assert cfg["sweep"]["C_rule"]["zeta"] == 0.0


@pytest.mark.parametrize("patch,pointer", [
    ({"lamda": 0.1}, "/lamda"),
    ({"solver": {"lamda": 0.1}}, "/solver/lamda"),
    ({"h": -0.1}, "/h"),
])
def test_schema_pointer(patch, pointer):
    with pytest.raises(SchemaError) as info:
        resolve({**BASE, **patch})
    assert info.value.pointer == pointer


def test_interval_must_contain_origin():
    with pytest.raises(SchemaError):
        resolve({**BASE, "domain": {"kind": "interval", "a": 0.1, "b": 1.0}})


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(SchemaError):
        load_config(str(bad))


# ------------------------------------------------------------ io
def test_json_nan_becomes_null(tmp_path):
    path = io.write_json(tmp_path / "a.json", {"x": float("nan"), "y": np.array([1.0, np.inf]),
                                               "z": np.int64(3), "b": np.bool_(True)})
    data = io.read_json(path)
    assert data == {"x": None, "y": [1.0, None], "z": 3, "b": True}


def test_field_csv_roundtrip(tmp_path):
    g = build_grid(StarDomain.interval(-1, 1), 0.25)
    vals = g.points[:, 0] ** 2 / 3
    path = io.write_field_csv(tmp_path / "f.csv", g, {"u": vals})
    raw = open(path, "rb").read()
    assert b"\r" not in raw
    header, rows = io.read_field_csv(path)
    assert header == ["x", "u"]
    assert np.array_equal(rows[:, 1], vals)  # repr keeps every bit


def test_measure_csv_header_2d(tmp_path):
    g = build_grid(StarDomain.ball(1.0), 0.25)
    mu = DiscreteMeasure.dirac(g, np.zeros((1, 2)), 0, 0)
    path = io.write_measure_csv(tmp_path / "m.csv", mu)
    assert open(path).readline().strip() == "x,y,vx,vy,weight"


def test_columns_file(tmp_path):
    path = io.write_columns(tmp_path / "c.dat", [0.0, 0.5], [1.0, 2.0], "x y")
    assert open(path).read() == "# x y\n0.0 1.0\n0.5 2.0\n"


# ------------------------------------------------------------ cli
def test_unknown_key_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, {**BASE, "lamda": 0.1})
    code, _, err = run(tmp_path, capsys, "validate", "-c", cfg, "-o", str(tmp_path))
    assert code == 2
    assert json.loads(err)["pointer"] == "/lamda"


def test_bad_arguments_exit_code(capsys):
    assert main(["solve"]) == 2
    capsys.readouterr()


def test_solve_zero_potential(tmp_path, capsys):
    cfg = write_config(tmp_path, {**BASE, "hamiltonian": {"preset": "mech"}})
    code, _, _ = run(tmp_path, capsys, "solve", "-c", cfg, "-o", str(tmp_path), "-q")
    assert code == 0
    data = io.read_json(tmp_path / "solve.json")
    assert np.max(np.abs(data["field"]["values"])) <= 1e-9
    header, rows = io.read_field_csv(tmp_path / "field.csv")
    assert header == ["x", "u"] and len(rows) == 41


@pytest.mark.parametrize("command,name", [("validate", "validate.json"), ("ergodic", "ergodic.json"),
                                          ("mather", "mather.json"), ("select", "select.json")])
def test_commands_write_reports(tmp_path, capsys, command, name):
    cfg = write_config(tmp_path, BASE)
    code, out, _ = run(tmp_path, capsys, command, "-c", cfg, "-o", str(tmp_path))
    assert code == 0
    data = io.read_json(tmp_path / name)
    assert data["command"] == command and data["resolved_config"]["h"] == 0.05
    assert out.strip().endswith(name)


def test_ergodic_values(tmp_path, capsys):
    cfg = write_config(tmp_path, {**BASE, "ergodic": {"c_values": [0.5]}})
    assert run(tmp_path, capsys, "ergodic", "-c", cfg, "-o", str(tmp_path), "-q")[0] == 0
    e = io.read_json(tmp_path / "ergodic.json")["ergodic"]
    assert abs(e["c_H"]) <= 1e-9
    assert e["h0"][0]["h"] == pytest.approx(0.5, abs=1e-3)


def test_sweep_is_reproducible_and_verifiable(tmp_path, capsys):
    cfg = write_config(tmp_path, BASE)
    outs = [tmp_path / "one", tmp_path / "two"]
    for out in outs:
        code, _, _ = run(tmp_path, capsys, "sweep", "-c", cfg, "-o", str(out), "-q")
        assert code == 0
    for name in ("report.json", "u0.csv", "lambda_0.csv", "u0.dat"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    code, out, _ = run(tmp_path, capsys, "verify", "-r", str(outs[0] / "report.json"),
                       "-o", str(tmp_path / "v"))
    assert code == 0 and "T1" in out
    checklist = io.read_json(tmp_path / "v" / "verify.json")["checklist"]
    report = io.read_json(outs[0] / "report.json")
    assert [e["pass"] for e in checklist] == [e["pass"] for e in report["checklist"]]


def test_sweep_checkpoint_resume(tmp_path, capsys):
    cfg = write_config(tmp_path, {**BASE, "sweep": {"checkpoint": True}})
    out = tmp_path / "o"
    assert run(tmp_path, capsys, "sweep", "-c", cfg, "-o", str(out), "-q")[0] == 0
    first = (out / "report.json").read_bytes()
    assert len(list((out / "checkpoints").iterdir())) == 6
    assert run(tmp_path, capsys, "sweep", "-c", cfg, "-o", str(out), "-q")[0] == 0
    assert (out / "report.json").read_bytes() == first


def test_gate_failure_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, {**BASE, "solver": {"lambda": 0.01, "max_sweeps": 1}})
    code, _, err = run(tmp_path, capsys, "solve", "-c", cfg, "-o", str(tmp_path))
    assert code == 3
    assert json.loads(err)["exit_code"] == 3


def test_verify_rejects_other_reports(tmp_path, capsys):
    io.write_json(tmp_path / "x.json", {"command": "solve"})
    assert run(tmp_path, capsys, "verify", "-r", str(tmp_path / "x.json"))[0] == 2


def test_report_values_are_finite_json(tmp_path, capsys):
    cfg = write_config(tmp_path, BASE)
    run(tmp_path, capsys, "sweep", "-c", cfg, "-o", str(tmp_path), "-q")
    text = (tmp_path / "report.json").read_text()
    assert "NaN" not in text and "Infinity" not in text
    data = json.loads(text)
    assert all(isinstance(v, float) and math.isfinite(v) for v in data["u0"])
