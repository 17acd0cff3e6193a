"""JSON scenario files: schema validation, task execution, CSV and manifest output.

A scenario is a JSON object::

    {
      "n": 1,
      "seed": 0,
      "hamiltonians": {"H0": {"expr": "max(0, 1-q1^2-p1^2)^3", "radius": 1.0}},
      "genfuns": {"S": {"expr": "0.05*bump(sqrt(x1^2+eta1^2))", "radius": 1.0}},
      "profiles": {"rho": {"expr": "max(0, 1-r^2)", "R": 1.0, "bounded": true}},
      "centers": {"c": [0.3, 0.0]},
      "tasks": [{"kind": "calabi", "hamiltonian": "H0", "grid": 256}]
    }

Hamiltonians and generating functions may also be given as bare expression
strings (radius 1).  Each task writes ``NN_<kind>.csv`` with the columns in
:data:`COLUMNS`; ``manifest.json`` records inputs, knobs, seed, conventions,
versions and wall time.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import conventions, hamflow
from .calabi import (
    alternate_liouville_invariance,
    calabi_eq1,
    commutator_calabi,
    counterexample_report,
    extended_calabi_limit,
    homomorphism_check,
)
from .errors import HamcalError
from .exprlang import ParseError
from .genfun import (
    GeneratingFunction,
    admissibility_check,
    c1_distance,
    genfun_from_map,
    hj_flow_residual,
    mollify,
    psi_apply,
    psi_inverse_apply,
    resolve_hj_sign,
)
from .geom import LiouvilleFlow, SupportBox, quasi_random_points
from .hamflow import HamiltonianField, flow, flow_map
from .rotations import (
    AngularProfile,
    FiberedRotation,
    angle_bound_diagnostic,
    commutator_hamiltonian_literal,
    commutator_hamiltonian_radial,
    composed_commutator,
    rotation_calabi_smooth,
    rotation_commutator_map,
    rotation_extended_calabi,
    rotation_hamiltonian,
    singular_profile_study,
)

VERSION = "0.1.0"

COLUMNS = {
    "calabi": ["hamiltonian", "value", "error_estimate"],
    "homomorphism": ["cal_F", "cal_G", "cal_FG", "cal_invF", "composition_rel", "inverse_rel"],
    "flow": None,  # index, x0_1..x0_2n, x1_1..x1_2n
    "commutator_study": ["t", "cal_direct", "cal_law", "gap"],
    "extended_limit": ["delta", "window_mean", "extrapolated", "slice_value", "reference"],
    "counterexample": ["k", "cal", "c0_to_id"],
    "genfun_roundtrip": ["samples", "roundtrip_error", "admissible", "min_slope"],
    "genfun_from_map": ["grid", "exactness_residual", "reproduction_error"],
    "mollify": ["k", "admissible", "min_slope", "c1_error"],
    "hamilton_jacobi": ["t", "residual", "sigma", "residual_plus", "residual_minus"],
    "rotation_commutator": ["t", "r", "h_radial", "h_literal", "composed_gap"],
    "rotation_calabi": ["value", "error_estimate", "extended_value"],
    "singular_study": ["k", "eps", "map_distance", "hamiltonian_gap", "extended_calabi",
                       "extended_gap"],
    "angle_diagnostic": ["radius", "estimate", "obstructed"],
    "alternate_liouville": ["cal_center0", "cal_alt", "gap", "rel_gap"],
}

# task kind -> {field: declared-name table}
REFERENCES = {
    "calabi": {"hamiltonian": "hamiltonians"},
    "homomorphism": {"F": "hamiltonians", "G": "hamiltonians"},
    "flow": {"hamiltonian": "hamiltonians"},
    "commutator_study": {"hamiltonian": "hamiltonians", "center": "centers"},
    "extended_limit": {"hamiltonian": "hamiltonians", "profile": "profiles", "center": "centers"},
    "counterexample": {"hamiltonian": "hamiltonians"},
    "genfun_roundtrip": {"genfun": "genfuns"},
    "genfun_from_map": {"hamiltonian": "hamiltonians"},
    "mollify": {"genfun": "genfuns"},
    "hamilton_jacobi": {"genfun": "genfuns"},
    "rotation_commutator": {"profile": "profiles"},
    "rotation_calabi": {"profile": "profiles"},
    "singular_study": {"profile": "profiles"},
    "angle_diagnostic": {"profile": "profiles"},
    "alternate_liouville": {"hamiltonian": "hamiltonians", "center": "centers"},
}

KNOB_RANGES = {
    "grid": (8, 2048),
    "steps": (1, 100_000),
    "samples": (1, 1_000_000),
    "seed": (0, 2**31 - 1),
}
LIST_RANGES = {
    "deltas": (0.0, 1.0),
    "times": (0.0, 1.0),
    "eps": (0.0, 1.0),
    "ks": (1, 256),
}


class ScenarioError(HamcalError):
    """Schema or parse error in a scenario file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class Scenario:
    n: int
    seed: int
    hamiltonians: dict
    genfuns: dict
    profiles: dict
    centers: dict
    tasks: list
    raw: dict = field(default_factory=dict)


# ------------------------------------------------------------------ parsing

def _line_of(text: str, *needles: str, start: int = 1) -> int | None:
    """First line at or after ``start`` containing all quoted needles, else the last one alone."""
    lines = text.splitlines()
    quoted = [json.dumps(s) for s in needles]
    for want in (quoted, quoted[-1:]):
        for i, ln in enumerate(lines[start - 1:], start):
            if all(q in ln for q in want):
                return i
    return None


def _task_line(text: str, idx: int) -> int:
    """Line of the idx-th '"kind"' key, i.e. where task idx starts."""
    seen = -1
    for i, ln in enumerate(text.splitlines(), 1):
        seen += ln.count('"kind"')
        if seen >= idx:
            return i
    return 1


def _declared(section, n: int, kind: str, text: str) -> dict:
    out = {}
    if section is None:
        return out
    if not isinstance(section, dict):
        raise ScenarioError(f"{kind} must be an object", _line_of(text, kind))
    for name, spec in section.items():
        line = _line_of(text, name)
        if isinstance(spec, str):
            spec = {"expr": spec}
        if not isinstance(spec, dict) or ("expr" not in spec and kind != "centers"):
            raise ScenarioError(f"{kind[:-1]} {name!r} needs an 'expr' string", line)
        try:
            if kind == "hamiltonians":
                out[name] = HamiltonianField.from_expression(
                    spec["expr"], n, float(spec.get("radius", 1.0)),
                    tuple(spec.get("time_interval", (0.0, 1.0))), name)
            elif kind == "genfuns":
                out[name] = GeneratingFunction.from_expression(
                    spec["expr"], n, float(spec.get("radius", 1.0)), name)
            else:
                flags = {k: bool(spec[k]) for k in ("bounded", "integrable_near_zero",
                                                     "r_rho_to_zero") if k in spec}
                prof = AngularProfile.from_expression(spec["expr"], float(spec.get("R", 1.0)),
                                                      **flags)
                out[name] = prof
        except ParseError as e:
            raise ScenarioError(f"{kind[:-1]} {name!r}: {e}", line) from e
        except (ValueError, TypeError) as e:
            raise ScenarioError(f"{kind[:-1]} {name!r}: {e}", line) from e
    return out


def _check_task(task, idx: int, tables: dict, text: str):
    if not isinstance(task, dict) or "kind" not in task:
        raise ScenarioError(f"task {idx} needs a 'kind'", _line_of(text, "tasks"))
    kind = task["kind"]
    at = _task_line(text, idx)
    if kind not in REFERENCES:
        raise ScenarioError(f"unknown task kind {kind!r}", _line_of(text, "kind", kind, start=at))
    for key, value in task.items():
        if key in REFERENCES[kind]:
            table = REFERENCES[kind][key]
            if key == "center" and isinstance(value, list):
                continue
            if not isinstance(value, str) or value not in tables[table]:
                raise ScenarioError(f"task {idx} ({kind}) references undeclared name "
                                    f"{value!r} in {key!r}", _line_of(text, key, str(value), start=at))
        elif key in KNOB_RANGES:
            lo, hi = KNOB_RANGES[key]
            if not isinstance(value, int) or isinstance(value, bool) or not lo <= value <= hi:
                raise ScenarioError(f"task {idx}: {key} must be an integer in [{lo}, {hi}]",
                                    _line_of(text, key, start=at))
        elif key in LIST_RANGES:
            lo, hi = LIST_RANGES[key]
            ok = isinstance(value, list) and value and all(
                isinstance(v, (int, float)) and not isinstance(v, bool) and lo <= v <= hi
                for v in value)
            if key in ("deltas", "eps"):
                ok = ok and all(v > 0 for v in value)
            if key == "ks":
                ok = ok and all(isinstance(v, int) for v in value)
            if not ok:
                raise ScenarioError(f"task {idx}: {key} must be a non-empty list in [{lo}, {hi}]",
                                    _line_of(text, key, start=at))
        elif key == "tol":
            if not isinstance(value, (int, float)) or not 0 < value < 1:
                raise ScenarioError(f"task {idx}: tol must lie in (0, 1)",
                                    _line_of(text, key, start=at))
    needed = {"homomorphism": ("F", "G")}.get(kind)
    if needed is None:
        needed = tuple(k for k in REFERENCES[kind] if k != "center")
        if kind == "extended_limit":
            if ("hamiltonian" in task) == ("profile" in task):
                raise ScenarioError(f"task {idx}: extended_limit needs exactly one of "
                                    "'hamiltonian' or 'profile'", at)
            needed = ()
    for k in needed:
        if k not in task:
            raise ScenarioError(f"task {idx} ({kind}) is missing {k!r}", at)


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e.msg}", e.lineno) from e
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object", 1)
    n = raw.get("n", 1)
    if not isinstance(n, int) or not 1 <= n <= 3:
        raise ScenarioError("n must be 1, 2 or 3", _line_of(text, "n"))
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ScenarioError("seed must be a non-negative integer", _line_of(text, "seed"))
    tables = {
        "hamiltonians": _declared(raw.get("hamiltonians"), n, "hamiltonians", text),
        "genfuns": _declared(raw.get("genfuns"), n, "genfuns", text),
        "profiles": _declared(raw.get("profiles"), n, "profiles", text),
    }
    centers = {}
    for name, c in (raw.get("centers") or {}).items():
        if not isinstance(c, list) or len(c) != 2 * n:
            raise ScenarioError(f"center {name!r} needs {2 * n} coordinates", _line_of(text, name))
        centers[name] = tuple(float(v) for v in c)
    tables["centers"] = centers
    tasks = raw.get("tasks", [])
    if not isinstance(tasks, list):
        raise ScenarioError("tasks must be a list", _line_of(text, "tasks"))
    for i, task in enumerate(tasks):
        _check_task(task, i, tables, text)
    return Scenario(n, seed, tables["hamiltonians"], tables["genfuns"], tables["profiles"],
                    centers, tasks, raw)


# ------------------------------------------------------------------ output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_plot_data(rows: list[dict], columns: list[str], path: str | Path | None = None) -> str:
    """Plain CSV with a header row; floats are written in shortest round-trip form."""
    for row in rows:
        missing = [c for c in columns if c not in row]
        if missing:
            raise ValueError(f"unknown column(s): {', '.join(missing)}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


# ------------------------------------------------------------------ tasks

def _center(sc: Scenario, task: dict, n: int):
    c = task.get("center")
    if c is None:
        return LiouvilleFlow((0.0,) * (2 * n))
    return LiouvilleFlow.about(sc.centers[c] if isinstance(c, str) else c)


def _run_task(sc: Scenario, task: dict, knobs: dict) -> tuple[list[dict], list[str]]:
    kind = task["kind"]
    grid = knobs.get("grid") or task.get("grid")
    seed = knobs["seed"] if knobs.get("seed") is not None else task.get("seed", sc.seed)
    tol = knobs.get("tol") or task.get("tol")
    samples = task.get("samples", 256)
    H = sc.hamiltonians.get(task.get("hamiltonian"))
    cols = COLUMNS[kind]

    if kind == "calabi":
        r = calabi_eq1(H, grid or 256)
        return [{"hamiltonian": task["hamiltonian"], "value": r.value,
                 "error_estimate": r.error_estimate}], cols
    if kind == "homomorphism":
        r = homomorphism_check(sc.hamiltonians[task["F"]], sc.hamiltonians[task["G"]],
                               grid or 128)
        return [r], cols
    if kind == "flow":
        t = float(task.get("t", 1.0))
        pts = task.get("points")
        pts = (np.asarray(pts, dtype=float) if pts is not None
               else quasi_random_points(H.support, samples, seed))
        steps = task.get("steps")
        out = flow(H, 0.0, t, pts, steps)
        m = pts.shape[-1]
        cols = ["index"] + [f"x0_{i + 1}" for i in range(m)] + [f"x1_{i + 1}" for i in range(m)]
        rows = []
        for i, (a, b) in enumerate(zip(pts, out)):
            row = {"index": i}
            row.update({f"x0_{j + 1}": a[j] for j in range(m)})
            row.update({f"x1_{j + 1}": b[j] for j in range(m)})
            rows.append(row)
        return rows, cols
    if kind == "commutator_study":
        lflow = _center(sc, task, H.n)
        res = grid or (128 if H.n == 1 else 12)
        rule = "simpson" if H.n == 1 else "midpoint"
        base = calabi_eq1(H, res, rule, 5).value
        rows = []
        for d in task.get("deltas", [0.05, 0.1, 0.2]):
            r = commutator_calabi(H, float(d), lflow, res, 5, base, rule)
            rows.append({"t": float(d), **r})
        return rows, cols
    if kind == "extended_limit":
        if H is not None:
            phi = flow_map(H)
            ref = calabi_eq1(H, 256).value
        else:
            prof = sc.profiles[task["profile"]]
            phi = FiberedRotation(prof).as_map()
            ref = calabi_eq1(rotation_hamiltonian(prof), 256).value
        lim = extended_calabi_limit(phi, _center(sc, task, phi.n),
                                    tuple(task.get("deltas", (0.2, 0.1, 0.05))), grid or 64,
                                    serial=knobs.get("serial", True))
        return [{"delta": d, "window_mean": m, "extrapolated": lim["extrapolated"],
                 "slice_value": lim["slice_value"], "reference": ref}
                for d, m in zip(lim["deltas"], lim["window_means"])], cols
    if kind == "counterexample":
        r = counterexample_report(flow_map(H), tuple(task.get("ks", (1, 2, 3))), grid or 128,
                                  task.get("samples", 1024), seed)
        return [{"k": k, "cal": c, "c0_to_id": d}
                for k, c, d in zip(r["k"], r["cal"], r["c0_to_id"])], cols
    if kind == "genfun_roundtrip":
        S = sc.genfuns[task["genfun"]]
        pts = quasi_random_points(S.phase_support(), samples, seed)
        kw = {"tol": tol} if tol else {}
        err = float(np.max(np.abs(psi_inverse_apply(S, psi_apply(S, pts, **kw), **kw) - pts)))
        adm = admissibility_check(S, max(32, grid or 64))
        return [{"samples": samples, "roundtrip_error": err, "admissible": adm.passed,
                 "min_slope": adm.min_slope}], cols
    if kind == "genfun_from_map":
        phi = flow_map(H, float(task.get("t", 0.1)))
        g = grid or 256
        S, resid = genfun_from_map(phi, g)
        pts = quasi_random_points(phi.support, samples, seed)
        rep = float(np.max(np.linalg.norm(psi_apply(S, pts) - phi(pts), axis=-1)))
        return [{"grid": g, "exactness_residual": resid, "reproduction_error": rep}], cols
    if kind == "mollify":
        S = sc.genfuns[task["genfun"]]
        spacing = float(task.get("spacing", 1 / 128))
        rows = []
        for k in task.get("ks", [8, 16, 32]):
            Sk = mollify(S, int(k), spacing=spacing)
            adm = admissibility_check(Sk)
            rows.append({"k": int(k), "admissible": adm.passed, "min_slope": adm.min_slope,
                         "c1_error": c1_distance(Sk, S)})
        return rows, cols
    if kind == "hamilton_jacobi":
        S0 = sc.genfuns[task["genfun"]]

        def path(t, S0=S0):
            return GeneratingFunction(lambda z: t * S0.func(z), S0.n, S0.support,
                                      f"{t:g}*{S0.name}")

        sign = resolve_hj_sign(path, seed=seed)
        rows = []
        for t in task.get("times", [0.1, 0.2, 0.3]):
            res = hj_flow_residual(path, [float(t)], samples=task.get("samples", 100),
                                   seed=seed, sign=conventions.HJ_SIGN)
            rows.append({"t": float(t), "residual": res, "sigma": sign["sign"],
                         "residual_plus": sign["residual_plus"],
                         "residual_minus": sign["residual_minus"]})
        return rows, cols
    if kind == "rotation_commutator":
        prof = sc.profiles[task["profile"]]
        radii = task.get("radii") or list(np.linspace(0.1, prof.R, 5))
        rows = []
        for t in task.get("times", [0.05, 0.1, 0.2]):
            t = float(t)
            box = SupportBox.centered(1, prof.R * math.exp(0.5 * t))
            pts = quasi_random_points(box, samples, seed)
            gap = float(np.max(np.abs(rotation_commutator_map(prof, t)(pts)
                                      - composed_commutator(prof, t)(pts))))
            for r in radii:
                rows.append({"t": t, "r": float(r),
                             "h_radial": float(commutator_hamiltonian_radial(prof, t, float(r))),
                             "h_literal": float(commutator_hamiltonian_literal(prof, t, float(r))),
                             "composed_gap": gap})
        return rows, cols
    if kind == "rotation_calabi":
        prof = sc.profiles[task["profile"]]
        r = rotation_calabi_smooth(prof)
        ext = rotation_extended_calabi(prof, grid or 64)
        return [{"value": r.value, "error_estimate": r.error_estimate,
                 "extended_value": ext.value}], cols
    if kind == "singular_study":
        prof = sc.profiles[task["profile"]]
        st = singular_profile_study(prof, task.get("eps", [0.2, 0.1, 0.05, 0.025]))
        return st.rows, cols
    if kind == "angle_diagnostic":
        d = angle_bound_diagnostic(FiberedRotation(sc.profiles[task["profile"]]))
        return [{"radius": r, "estimate": e, "obstructed": d.obstructed}
                for r, e in zip(d.radii, d.estimates)], cols
    if kind == "alternate_liouville":
        c = task.get("center")
        c = sc.centers[c] if isinstance(c, str) else (c or (0.3,) + (0.0,) * (2 * H.n - 1))
        r = alternate_liouville_invariance(flow_map(H), c, grid or 64)
        return [r], cols
    raise ScenarioError(f"unknown task kind {kind!r}")


@contextmanager
def _overridden(knobs: dict):
    saved = (hamflow.STEPS_PER_UNIT, conventions.INVERSE_VARIANT, conventions.COMPOSE_VARIANT)
    try:
        if knobs.get("steps"):
            hamflow.STEPS_PER_UNIT = int(knobs["steps"])
        if knobs.get("literal_variants"):
            conventions.INVERSE_VARIANT = conventions.COMPOSE_VARIANT = "literal"
        yield
    finally:
        hamflow.STEPS_PER_UNIT, conventions.INVERSE_VARIANT, conventions.COMPOSE_VARIANT = saved


def run_scenario(path: str | Path, out_dir: str | Path, overrides: dict | None = None,
                 echo=None) -> int:
    """Run every task; returns 0 on success, 1 on a numerical failure, 2 on schema errors."""
    knobs = dict(overrides or {})
    try:
        sc = load_scenario(path)
    except ScenarioError as e:
        if echo:
            echo(f"error: {e}")
        return 2
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    records = []
    failed = False
    with _overridden(knobs):
        for i, task in enumerate(sc.tasks):
            name = f"{i:02d}_{task['kind']}.csv"
            t0 = time.perf_counter()
            rec = {"index": i, "kind": task["kind"], "task": task, "csv": name}
            try:
                rows, cols = _run_task(sc, task, knobs)
                emit_plot_data(rows, cols, out / name)
                rec["status"] = "ok"
            except (HamcalError, ArithmeticError) as e:
                rec.update(status="failed", error=f"{type(e).__name__}: {e}", csv=None)
                failed = True
            rec["seconds"] = round(time.perf_counter() - t0, 3)
            records.append(rec)
            if echo:
                echo(f"task {i} {task['kind']}: {rec['status']}"
                     + (f" ({rec['error']})" if "error" in rec else ""))
        table = conventions.table()
    manifest = {
        "scenario": str(path),
        "inputs": sc.raw,
        "knobs": {k: v for k, v in knobs.items() if v is not None},
        "seed": knobs.get("seed") if knobs.get("seed") is not None else sc.seed,
        "sample_points": "scrambled Halton sequence seeded by 'seed'",
        "conventions": table,
        "versions": {"hamcal": VERSION, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "tasks": records,
        "wall_time": round(time.perf_counter() - start, 3),
        "exit_code": 1 if failed else 0,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 1 if failed else 0


__all__ = ["Scenario", "ScenarioError", "COLUMNS", "load_scenario", "emit_plot_data",
           "run_scenario"]
