import json
import math
import subprocess
import sys

import pytest

from hamcal import conventions, hamflow
from hamcal.cli import main


@pytest.fixture(autouse=True)
def restore_globals():
    saved = (hamflow.STEPS_PER_UNIT, conventions.INVERSE_VARIANT, conventions.COMPOSE_VARIANT)
    yield
    hamflow.STEPS_PER_UNIT, conventions.INVERSE_VARIANT, conventions.COMPOSE_VARIANT = saved


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_calabi_command(capsys):
    code, out, _ = run(capsys, "calabi", "--expr", "max(0, 1-q1^2-p1^2)^3", "--grid", "128")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(math.pi / 4, rel=1e-5)


def test_flow_command(capsys):
    code, out, _ = run(capsys, "flow", "--expr", "max(0, 1-q1^2-p1^2)^3",
                       "--point", "0.5,0", "--t", "0.1")
    assert code == 0
    end = json.loads(out)["end"]
    assert math.hypot(*end) == pytest.approx(0.5, abs=1e-6)


def test_flow_odd_point(capsys):
    code, _, err = run(capsys, "flow", "--expr", "q1", "--point", "1,2,3")
    assert code == 2 and "even" in err


def test_genfun_command_round_trip(capsys):
    expr = "0.05*bump(sqrt(x1^2+eta1^2))"
    code, out, _ = run(capsys, "genfun", "--expr", expr, "--point", "0.2,0.1")
    img = json.loads(out)["image"]
    assert code == 0 and json.loads(out)["admissible"]
    code, out, _ = run(capsys, "genfun", "--expr", expr, "--point",
                       ",".join(repr(v) for v in img), "--inverse")
    assert json.loads(out)["image"] == pytest.approx([0.2, 0.1], abs=1e-10)


def test_rotation_command(capsys):
    code, out, _ = run(capsys, "rotation", "--profile", "max(0, 1-r^2)")
    d = json.loads(out)
    assert code == 0 and abs(d["calabi"]) == pytest.approx(math.pi / 12, rel=1e-6)
    assert not d["angle_obstructed"]


def test_rotation_unbounded(capsys):
    code, out, _ = run(capsys, "rotation", "--profile=-log(r)*bump(r)", "--unbounded",
                       "--eps", "0.2,0.1")
    d = json.loads(out)
    assert code == 0 and d["angle_obstructed"] and len(d["singular_study"]) == 2


def test_parse_error_exit_2(capsys):
    code, _, err = run(capsys, "calabi", "--expr", "q1 +* p1")
    assert code == 2 and "error" in err


def test_numerical_failure_exit_1(capsys):
    code, _, err = run(capsys, "calabi", "--expr", "q1^2+1", "--grid", "16")
    assert code == 1 and "SupportError" in err


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as ei:
        main(["calabi"])
    assert ei.value.code == 2


def test_run_command(tmp_path, capsys):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({"hamiltonians": {"H": "max(0, 1-q1^2-p1^2)^3"},
                              "tasks": [{"kind": "calabi", "hamiltonian": "H", "grid": 32}]}))
    code, _, err = run(capsys, "run", "--scenario", str(sc), "--out", str(tmp_path / "o"),
                       "--steps", "64")
    assert code == 0 and "task 0 calabi: ok" in err
    assert (tmp_path / "o" / "00_calabi.csv").exists()


def test_verify_single_check(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--only", "1", "--out", str(tmp_path))
    assert code == 0 and "[PASS]" in out
    rep = json.loads((tmp_path / "verify_report.json").read_text())
    assert [r["cid"] for r in rep["checks"]] == [1]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "hamcal", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "verify" in r.stdout
