import json

import numpy as np
import pytest

from kktstab import (
    BATTERY_NAMES,
    InstanceFormatError,
    dumps_report,
    emit_report,
    instance_from_dict,
    kkt_check,
    load_battery,
    load_instance,
    load_report,
    run_command,
)
from kktstab.problem import DimensionError


def _nlp_dict():
    return {
        "name": "nlp_toy",
        "n": 1,
        "F": {"polynomial": [
            {"const": 0.0, "linear": [0.0], "quadratic": [[1.0]]},
            {"const": 1.0, "linear": [-1.0]},
        ]},
        "g": [{"kind": "epi_lift",
               "inner": {"kind": "orthant_indicator", "dim": 1, "sign": -1}}],
        "known_solution": {"x": [1.0], "mu": [1.0, 1.0]},
    }


def test_battery_loads_and_validates():
    for name in BATTERY_NAMES:
        problem, meta = load_battery(name)
        assert meta.known_solution is not None
        assert kkt_check(problem, meta.known_solution, 1e-8).ok, name


def test_loader_contract_nlp():
    problem, meta = instance_from_dict(_nlp_dict())
    assert problem.n == 1 and problem.m == 2
    assert len(problem.pieces) == 1
    assert problem.pieces[0].kind == "epi_lift"


def test_loader_dimension_error_names_dims():
    data = _nlp_dict()
    data["g"] = [{"kind": "l1_norm", "dim": 3}]
    with pytest.raises(DimensionError) as exc:
        instance_from_dict(data)
    assert "3" in str(exc.value) and "2" in str(exc.value)


def test_loader_unknown_kind():
    data = _nlp_dict()
    data["g"] = [{"kind": "socp_ball", "dim": 2}]
    with pytest.raises(InstanceFormatError):
        instance_from_dict(data)


def test_loader_rejects_bad_known_solution():
    data = _nlp_dict()
    data["known_solution"] = {"x": [1.2], "mu": [1.0, 1.0]}
    with pytest.raises(InstanceFormatError):
        instance_from_dict(data)


def test_loader_parse_error_carries_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "name": "x",\n  bad\n}\n')
    with pytest.raises(InstanceFormatError) as exc:
        load_instance(p)
    assert "line 3" in str(exc.value)


def test_load_instance_missing_file(tmp_path):
    with pytest.raises(InstanceFormatError):
        load_instance(tmp_path / "nope.json")


def test_report_round_trip_and_byte_identical(tmp_path):
    payload = {
        "name": "demo",
        "values": [1.0, 0.1 + 0.2, 1e-17, float("inf"), float("-inf")],
        "flag": True,
        "nested": {"b": 2, "a": [3, None]},
    }
    p1 = tmp_path / "r1.json"
    p2 = tmp_path / "r2.json"
    emit_report(payload, p1, kind="probe", seed=7, tolerances={"tol": 1e-8})
    emit_report(payload, p2, kind="probe", seed=7, tolerances={"tol": 1e-8})
    b1 = p1.read_bytes()
    assert b1 == p2.read_bytes()
    doc = load_report(p1)
    assert doc["payload"]["values"] == payload["values"]
    assert doc["payload"]["nested"] == {"b": 2, "a": [3, None]}
    assert doc["seed"] == 7
    assert doc["tool"] == "kktstab"
    # the infinite entries round-trip through the sentinel strings
    raw = json.loads(b1.decode())
    assert raw["payload"]["values"][3] == "+inf"
    assert raw["payload"]["values"][4] == "-inf"


def test_report_float_precision_lossless():
    rng = np.random.default_rng(0)
    vals = list(rng.standard_normal(50) * 10.0 ** rng.integers(-12, 12, 50))
    text = dumps_report({"vals": vals}, kind="probe")
    parsed = json.loads(text)
    assert parsed["payload"]["vals"] == vals


def _battery_file(name):
    from kktstab import battery_path
    from importlib import resources
    with resources.as_file(battery_path(name)) as p:
        return str(p)


def test_cli_solve_exit_codes(tmp_path, capsys):
    rc = run_command(["solve", _battery_file("nlp_toy"), "--tol", "1e-10",
                      "--json", str(tmp_path / "s.json")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "converged" in out
    doc = load_report(tmp_path / "s.json")
    assert doc["kind"] == "newton"
    assert np.isclose(doc["payload"]["x"][0], 1.0, atol=1e-8)


def test_cli_analyze_consistent_negative_instance(tmp_path, capsys):
    rc = run_command(["analyze", _battery_file("sdp_degenerate"),
                      "--num-delta", "10", "--json", str(tmp_path / "a.json")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "consistent" in out
    doc = load_report(tmp_path / "a.json")
    assert doc["payload"]["nondegeneracy"]["status"] == "fails"
    assert doc["payload"]["sweep"]["verdict"] == "singular-element-found"


def test_cli_probe(tmp_path, capsys):
    rc = run_command(["probe", _battery_file("l1_toy"), "--radius", "0.1",
                      "--num-delta", "10", "--json", str(tmp_path / "p.json")])
    capsys.readouterr()
    assert rc == 0
    doc = load_report(tmp_path / "p.json")
    assert doc["payload"]["violations"] == 0


def test_cli_usage_and_error_codes(tmp_path, capsys):
    assert run_command([]) == 64
    assert run_command(["bogus"]) == 64
    capsys.readouterr()
    assert run_command(["solve", str(tmp_path / "missing.json")]) == 1
    capsys.readouterr()


def test_cli_determinism_byte_identical(tmp_path, capsys):
    f1, f2 = tmp_path / "a1.json", tmp_path / "a2.json"
    argv = ["analyze", _battery_file("nlp_toy"), "--seed", "3",
            "--num-delta", "10"]
    assert run_command(argv + ["--json", str(f1)]) == 0
    assert run_command(argv + ["--json", str(f2)]) == 0
    capsys.readouterr()
    assert f1.read_bytes() == f2.read_bytes()


def test_cli_verify_prox_suite(capsys):
    rc = run_command(["verify", "--suite", "prox"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "PASS" in out and "FAIL" not in out


def test_cli_start_override(capsys):
    rc = run_command(["solve", _battery_file("nlp_toy"),
                      "--start", "1.6,0.9,0.4"])
    out = capsys.readouterr().out
    assert rc == 0 and "converged" in out
    rc = run_command(["solve", _battery_file("nlp_toy"), "--start", "1.0,2.0"])
    capsys.readouterr()
    assert rc == 1


def test_cli_env_var_default_seed(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KKTSTAB_SEED", "17")
    f = tmp_path / "env.json"
    assert run_command(["probe", _battery_file("l1_toy"), "--num-delta", "5",
                        "--json", str(f)]) == 0
    capsys.readouterr()
    assert load_report(f)["seed"] == 17


def test_piece_spec_round_trip():
    from kktstab import parse_piece, piece_spec
    specs = [
        {"kind": "psd_indicator", "order": 3},
        {"kind": "orthant_indicator", "dim": 2, "sign": 1},
        {"kind": "box_indicator", "lower": [-1.0, 0.0], "upper": [1.0, 0.0]},
        {"kind": "l1_norm", "dim": 4},
        {"kind": "epi_lift", "inner": {"kind": "psd_indicator", "order": 2}},
    ]
    for spec in specs:
        assert piece_spec(parse_piece(spec)) == spec
