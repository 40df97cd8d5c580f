from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from rsvolterra.cli import main, parse_z
from rsvolterra.errors import ConfigError

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


def test_level1_exponential_monomial(tmp_path):
    code, report, out = run(tmp_path, "level1", "--problem", str(PROBLEMS / "d1_tau05.json"))
    assert code == 0
    (sol,) = report["result"]["solutions"]
    re, im = sol["Psi"]["values"][0]
    assert abs(re - 0.169620) <= 1e-4 and im == 0.0
    assert (out / "psi_0.csv").exists() and (out / "Psi_0.csv").exists()
    assert report["config"]["P"] == [[1.0, 0.0], [1.0, 0.0]]


def test_double_root_fails_validation(tmp_path):
    code, report, _ = run(tmp_path, "level1", "--problem", str(PROBLEMS / "double_root.json"))
    assert code == 1
    assert "DoubleRoot" in report["error"]["reasons"]


def test_missing_file(tmp_path):
    code, _, _ = run(tmp_path, "level1", "--problem", str(tmp_path / "nope.json"))
    assert code == 3


@pytest.mark.parametrize("text", ["{not json", '{"P": [1, 1]}', '{"P": [1, 1], "Q": [0.5], "grid": 3}'])
def test_malformed_problem(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    code, _, _ = run(tmp_path, "validate", "--problem", str(path))
    assert code == 3


def test_numerical_failure(tmp_path):
    path = tmp_path / "big.json"
    path.write_text(json.dumps({"P": [1, 1], "Q": [0.5], "R": [20]}))
    code, report, _ = run(
        tmp_path, "solve", "--problem", str(path), "--lambda", "0.1", "--nodes-per-panel", "8"
    )
    assert code == 2 and report["error"]["type"] == "NotContracting"


def test_deterministic_reports(tmp_path):
    args = ("verify-all", "--problem", str(PROBLEMS / "d1_r025.json"), "--seed", "3")
    _, _, a = run(tmp_path, *args, name="a")
    _, _, b = run(tmp_path, *args, name="b")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_verify_all_toy(tmp_path, capsys):
    code, report, _ = run(tmp_path, "verify-all", "--problem", str(PROBLEMS / "d1_r025.json"))
    assert code == 0
    checks = {row["check"]: row["status"] for row in report["result"]["points"][0]["checks"]}
    assert set(checks.values()) == {"pass"}
    assert {"sing", "diag_star", "gamma", "contraction_near", "smoothing", "dictionary"} <= set(checks)
    assert "PASS" in capsys.readouterr().out


def test_verify_all_without_series(tmp_path):
    code, report, _ = run(tmp_path, "verify-all", "--problem", str(PROBLEMS / "d1_tau05.json"))
    checks = {row["check"]: row["status"] for row in report["result"]["points"][0]["checks"]}
    assert code == 0 and checks["smoothing"] == "n/a"
    assert all(s in ("pass", "n/a") for s in checks.values())


def test_two_root_flags(tmp_path):
    code, report, out = run(
        tmp_path,
        "laplace",
        "--problem",
        str(PROBLEMS / "d2_two_roots.json"),
        "--alpha-index",
        "0",
        "--theta",
        str(math.pi / 2),
        "--nodes-per-panel",
        "12",
        "--z",
        "2,-2;1,-3",
    )
    assert code == 0
    (sol,) = report["result"]["solutions"]
    assert sol["alpha"] == [1.0, 0.0] and sol["theta"] == pytest.approx(math.pi / 2)
    assert len(sol["Psi"]["values"]) == 2
    assert report["config"]["grid"]["nodes_per_panel"] == 12


def test_blocked_ray_is_a_condition_failure(tmp_path):
    code, report, _ = run(
        tmp_path, "solve", "--problem", str(PROBLEMS / "d2_two_roots.json"), "--theta", "0"
    )
    assert code == 1 and report["error"]["type"] == "NoAdmissibleRay"


@pytest.mark.parametrize("command", ["validate", "proto", "solve"])
def test_other_commands(tmp_path, command):
    code, report, _ = run(tmp_path, command, "--problem", str(PROBLEMS / "d1_r025.json"))
    assert code == 0 and report["command"] == command


def test_parse_z():
    assert parse_z("2,0;1,-3") == [2 + 0j, 1 - 3j]
    assert parse_z("4") == [4 + 0j]
    with pytest.raises(ConfigError):
        parse_z("a,b")
