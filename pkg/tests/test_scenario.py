import csv
import io
import json
import math

import pytest
from hypothesis import given, strategies as st

from hamcal import conventions
from hamcal.scenario import COLUMNS, ScenarioError, emit_plot_data, load_scenario, run_scenario
from hamcal.rotations import singular_profile_study
from hamcal import fixtures

H0 = {"expr": "max(0, 1-q1^2-p1^2)^3", "radius": 1.0}


def write(tmp_path, obj, name="sc.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return p


def read_csv(path):
    return list(csv.DictReader(path.open()))


def test_empty_tasks(tmp_path):
    p = write(tmp_path, {"n": 1, "tasks": []})
    assert run_scenario(p, tmp_path / "out") == 0
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["tasks"] == [] and man["exit_code"] == 0


def test_calabi_task_row(tmp_path):
    p = write(tmp_path, {"hamiltonians": {"H0": H0},
                         "tasks": [{"kind": "calabi", "hamiltonian": "H0", "grid": 128}]})
    assert run_scenario(p, tmp_path / "out") == 0
    rows = read_csv(tmp_path / "out" / "00_calabi.csv")
    assert list(rows[0]) == COLUMNS["calabi"]
    assert float(rows[0]["value"]) == pytest.approx(math.pi / 4, rel=1e-5)


def test_undeclared_name_reports_line(tmp_path):
    text = json.dumps({"hamiltonians": {"H0": H0},
                       "tasks": [{"kind": "calabi", "hamiltonian": "H0"},
                                 {"kind": "calabi", "hamiltonian": "H9"}]}, indent=2)
    p = write(tmp_path, text)
    with pytest.raises(ScenarioError) as ei:
        load_scenario(p)
    want = next(i for i, ln in enumerate(text.splitlines(), 1) if '"H9"' in ln)
    assert ei.value.line == want
    assert "H9" in str(ei.value)
    assert run_scenario(p, tmp_path / "out") == 2


def test_bad_json_line(tmp_path):
    p = write(tmp_path, '{\n  "n": 1,\n  "tasks": [\n    {"kind": }\n  ]\n}')
    with pytest.raises(ScenarioError) as ei:
        load_scenario(p)
    assert ei.value.line == 4


@pytest.mark.parametrize("obj, fragment", [
    ({"n": 5}, "n must be"),
    ({"seed": -1}, "seed"),
    ({"tasks": [{"kind": "teleport"}]}, "unknown task kind"),
    ({"hamiltonians": {"H0": H0}, "tasks": [{"kind": "calabi", "hamiltonian": "H0", "grid": 3}]},
     "grid"),
    ({"hamiltonians": {"H0": H0}, "tasks": [{"kind": "counterexample", "hamiltonian": "H0",
                                             "ks": [0, 1]}]}, "ks"),
    ({"hamiltonians": {"H0": "q1 +* p1"}}, "hamiltonian 'H0'"),
    ({"hamiltonians": {"H0": "zeta*q1"}}, "unknown variable"),
    ({"tasks": [{"kind": "homomorphism", "F": "H0"}]}, "undeclared"),
    ({"centers": {"c": [0.0]}}, "coordinates"),
])
def test_schema_errors(tmp_path, obj, fragment):
    with pytest.raises(ScenarioError, match=fragment):
        load_scenario(write(tmp_path, obj))


def test_numerical_failure_exit_1(tmp_path):
    p = write(tmp_path, {"hamiltonians": {"bad": "q1^2+1", "H0": H0},
                         "tasks": [{"kind": "calabi", "hamiltonian": "bad", "grid": 32},
                                   {"kind": "calabi", "hamiltonian": "H0", "grid": 32}]})
    assert run_scenario(p, tmp_path / "out") == 1
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert [t["status"] for t in man["tasks"]] == ["failed", "ok"]
    assert "SupportError" in man["tasks"][0]["error"]


finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite, st.booleans()), max_size=20))
def test_emit_round_trip(rows):
    dicts = [{"a": a, "b": b, "flag": f} for a, b, f in rows]
    text = emit_plot_data(dicts, ["a", "b", "flag"])
    back = list(csv.DictReader(io.StringIO(text)))
    assert len(back) == len(rows)
    for d, r in zip(dicts, back):
        assert float(r["a"]) == d["a"] and float(r["b"]) == d["b"]
        assert r["flag"] == ("true" if d["flag"] else "false")


def test_emit_unknown_column():
    with pytest.raises(ValueError, match="unknown column"):
        emit_plot_data([{"a": 1.0}], ["a", "zz"])


def test_emit_header_only():
    assert emit_plot_data([], ["t", "cal_direct"]) == "t,cal_direct\n"


def test_commutator_study_columns(tmp_path):
    p = write(tmp_path, {"hamiltonians": {"H0": H0},
                         "tasks": [{"kind": "commutator_study", "hamiltonian": "H0",
                                    "deltas": [0.1], "grid": 32}]})
    assert run_scenario(p, tmp_path / "out") == 0
    rows = read_csv(tmp_path / "out" / "00_commutator_study.csv")
    assert list(rows[0]) == ["t", "cal_direct", "cal_law", "gap"]
    assert float(rows[0]["cal_law"]) == pytest.approx((math.exp(0.2) - 1) * math.pi / 4, rel=1e-4)


def test_singular_rows_emit():
    st_ = singular_profile_study(fixtures.profile("log"), [0.2, 0.1], radial_nodes=1001,
                                 samples=64)
    text = emit_plot_data(st_.rows, COLUMNS["singular_study"])
    lines = text.splitlines()
    assert lines[0] == ",".join(COLUMNS["singular_study"])
    assert len(lines) == 3 and "nan" in lines[1]


SMALL = {"seed": 3, "hamiltonians": {"H0": H0},
         "genfuns": {"S": "0.05*bump(sqrt(x1^2+eta1^2))"},
         "tasks": [{"kind": "flow", "hamiltonian": "H0", "samples": 6},
                   {"kind": "calabi", "hamiltonian": "H0", "grid": 64},
                   {"kind": "genfun_roundtrip", "genfun": "S", "samples": 50}]}


def test_reruns_byte_identical(tmp_path):
    p = write(tmp_path, SMALL)
    for d in ("a", "b"):
        assert run_scenario(p, tmp_path / d, {"serial": True}) == 0
    for name in ("00_flow.csv", "01_calabi.csv", "02_genfun_roundtrip.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_contents(tmp_path):
    p = write(tmp_path, SMALL)
    run_scenario(p, tmp_path / "out", {"steps": 64, "seed": 11})
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["conventions"] == conventions.table()
    assert man["seed"] == 11
    assert man["knobs"]["steps"] == 64
    assert set(man["versions"]) >= {"hamcal", "numpy", "scipy", "python"}
    assert man["inputs"] == SMALL


def test_knob_override_restored(tmp_path):
    from hamcal import hamflow

    before = hamflow.STEPS_PER_UNIT
    run_scenario(write(tmp_path, SMALL), tmp_path / "out", {"steps": 7, "literal_variants": True})
    assert hamflow.STEPS_PER_UNIT == before
    assert conventions.INVERSE_VARIANT == "oracle"


def test_seed_changes_flow_samples(tmp_path):
    p = write(tmp_path, SMALL)
    run_scenario(p, tmp_path / "a", {"seed": 1})
    run_scenario(p, tmp_path / "b", {"seed": 2})
    assert (tmp_path / "a" / "00_flow.csv").read_bytes() != (tmp_path / "b" / "00_flow.csv").read_bytes()
