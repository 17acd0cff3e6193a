"""Verification suite: one check per acceptance criterion.

Each check computes its identity two ways (or against a closed form) and
returns a :class:`Check` row.  ``run_suite`` collects the rows, prints a table
and returns exit code 0 when every row passes.
"""
from __future__ import annotations

import json
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import conventions, fixtures as fx, hamflow
from .calabi import (
    alternate_liouville_invariance,
    calabi_eq1,
    commutator_calabi,
    counterexample_report,
    extended_calabi_limit,
    homomorphism_check,
)
from .errors import HamcalError
from .genfun import (
    admissibility_check,
    c1_distance,
    genfun_from_map,
    hj_flow_residual,
    liouville_conjugated_genfun,
    mollify,
    psi_apply,
    psi_inverse_apply,
    resolve_hj_sign,
)
from .geom import LiouvilleFlow, SupportBox, quasi_random_points
from .hamflow import (
    HamiltonianField,
    closed_form,
    compose_hamiltonian,
    flow,
    flow_map,
    inverse_hamiltonian,
)
from .rotations import (
    FiberedRotation,
    angle_bound_diagnostic,
    commutator_hamiltonian_recovered,
    composed_commutator,
    rotation_calabi_smooth,
    rotation_commutator_map,
    rotation_flow_match,
    rotation_hamiltonian,
    singular_profile_study,
)

LEVELS = {
    "quick": {
        "hom_res": 128, "hom_res_4d": 12, "scal_res": 128, "scal_res_4d": 12,
        "limit_grid": 64, "limit_grid_rot": 128, "gfm_grid": 256, "hj_samples": 100,
        "psi_samples": 500, "rot_grid": 256, "ext_grid": 64, "c0_samples": 1024,
    },
    "full": {
        "hom_res": 256, "hom_res_4d": 14, "scal_res": 192, "scal_res_4d": 14,
        "limit_grid": 96, "limit_grid_rot": 192, "gfm_grid": 320, "hj_samples": 300,
        "psi_samples": 2000, "rot_grid": 320, "ext_grid": 96, "c0_samples": 4096,
    },
}


@dataclass
class Check:
    cid: int
    name: str
    identity: str
    measured: str
    bound: str
    passed: bool
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"[{verdict}] {self.cid:>2} {self.name:<22} measured {self.measured:<34} "
                f"bound {self.bound} ({self.seconds:.1f}s)")


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# ------------------------------------------------------------------ checks

def check_quadrature(cfg: dict) -> Check:
    t0 = time.perf_counter()
    res = calabi_eq1(fx.h0(), 256)
    dt = time.perf_counter() - t0
    err = _rel(res.value, fx.H0_CALABI)
    return Check(1, "quadrature", "Calabi space-time integral of the bump H0 vs pi/4",
                 f"rel err {err:.2e}, {dt:.2f}s", "< 5e-3 and < 10 s",
                 err < 5e-3 and dt < 10.0,
                 details={"value": res.value, "error_estimate": res.error_estimate})


def check_homomorphism(cfg: dict) -> Check:
    t0 = time.perf_counter()
    rows = []
    for F, G in fx.HOMOMORPHISM_PAIRS_2D:
        r = homomorphism_check(fx.field(F), fx.field(G), cfg["hom_res"], t_nodes=9)
        rows.append({"F": F, "G": G, **r})
    F4, G4 = fx.HOMOMORPHISM_PAIR_4D
    r = homomorphism_check(fx.field(F4, 2), fx.field(G4, 2), cfg["hom_res_4d"], t_nodes=5,
                           rule="midpoint")
    rows.append({"F": F4, "G": G4, **r})
    dt = time.perf_counter() - t0
    worst = max(r["composition_rel"] for r in rows)
    worst_inv = max(r["inverse_rel"] for r in rows if abs(r["cal_F"]) > 1e-8)
    return Check(2, "homomorphism", "Cal(F#G) = Cal F + Cal G on 5 planar + 1 R^4 pair",
                 f"worst rel defect {worst:.2e}, {dt:.0f}s", "< 1e-2 and < 120 s",
                 worst < 1e-2 and dt < 120.0, details={"rows": rows, "inverse_worst": worst_inv})


def check_scaling(cfg: dict) -> Check:
    rows = []
    H2 = fx.h0()
    base2 = calabi_eq1(H2, cfg["scal_res"], t_nodes=5).value
    H4 = fx.field(fx.BUMP_4D, 2)
    base4 = calabi_eq1(H4, cfg["scal_res_4d"], "midpoint", 5).value
    for delta in (0.05, 0.1, 0.2):
        rows.append({"n": 1, **commutator_calabi(H2, delta, resolution=cfg["scal_res"],
                                                 t_nodes=5, base=base2)})
        rows.append({"n": 2, **commutator_calabi(H4, delta, resolution=cfg["scal_res_4d"],
                                                 t_nodes=5, base=base4, rule="midpoint")})
    worst = max(r["rel_gap"] for r in rows)
    return Check(3, "scaling law", "Cal[mu_delta, phi] = (e^{(d+1)delta} - 1) Cal(phi)",
                 f"worst rel gap {worst:.2e}", "< 1e-2", worst < 1e-2, details={"rows": rows})


def check_limit(cfg: dict) -> Check:
    rows = []
    H = fx.h0()
    lim = extended_calabi_limit(flow_map(H), grid=cfg["limit_grid"])
    ref = calabi_eq1(H, 256).value
    rows.append({"fixture": "flow of H0", "extrapolated": lim["extrapolated"], "eq1": ref,
                 "rel": _rel(lim["extrapolated"], ref), "window_means": lim["window_means"]})
    prof = fx.profile("quadratic")
    lim = extended_calabi_limit(FiberedRotation(prof).as_map(), grid=cfg["limit_grid_rot"])
    ref = calabi_eq1(rotation_hamiltonian(prof), 256).value
    rows.append({"fixture": "rotation (1-r^2)+", "extrapolated": lim["extrapolated"], "eq1": ref,
                 "rel": _rel(lim["extrapolated"], ref), "window_means": lim["window_means"]})
    worst = max(r["rel"] for r in rows)
    return Check(4, "limit formula", "extrapolated extended Calabi vs Calabi integral",
                 f"worst rel gap {worst:.2e}", "< 2e-2", worst < 2e-2, details={"rows": rows})


def check_counterexample(cfg: dict) -> Check:
    phi = flow_map(fx.h0())
    rep = counterexample_report(phi, (1, 2, 3), samples=cfg["c0_samples"])
    cal, dist = rep["cal"], rep["c0_to_id"]
    spread = max(_rel(c, cal[0]) for c in cal)
    decreasing = all(b < a for a, b in zip(dist, dist[1:]))
    return Check(5, "counterexample", "Cal(phi_k) constant, C0 distance to id decreasing",
                 f"cal spread {spread:.1e}; d0 " + ",".join(f"{d:.3f}" for d in dist),
                 "< 2e-2, strictly decreasing", spread < 2e-2 and decreasing,
                 details={"k": rep["k"], "cal": cal, "c0_to_id": dist,
                          "iterates": "k^4"})


def _hamiltonian_control(H: HamiltonianField, t: float):
    phi = flow_map(H, t)
    bump = lambda z: (np.max(np.abs(z), -1) < 1)[..., None]

    def bad(z):
        z = np.asarray(z, dtype=float)
        push = np.sin(np.pi * z[..., 0]) * np.cos(np.pi * z[..., 1] / 2) ** 2
        return phi(z) + 0.01 * np.stack([push, 0 * push], -1) * bump(z)

    return phi, closed_form(bad, None, 1, phi.support, "non-symplectic control")


def check_genfun(cfg: dict) -> Check:
    roundtrip = 0.0
    for S in (fx.genfun(fx.GENFUN_SMOOTH), fx.genfun(fx.GENFUN_WAVY), fx.genfun(fx.GENFUN_C1),
              fx.stiff_genfun()):
        pts = quasi_random_points(S.phase_support(), cfg["psi_samples"], 1)
        roundtrip = max(roundtrip, float(np.max(np.abs(psi_inverse_apply(S, psi_apply(S, pts)) - pts))))
    phi, bad = _hamiltonian_control(fx.h0(), 0.1)
    S, res = genfun_from_map(phi, cfg["gfm_grid"])
    _, res_bad = genfun_from_map(bad, cfg["gfm_grid"])
    pts = quasi_random_points(phi.support, 400, 2)
    repro = float(np.max(np.linalg.norm(psi_apply(S, pts) - phi(pts), axis=-1)))
    ratio = res_bad / max(res, 1e-300)
    ok = roundtrip < 1e-8 and repro < 1e-5 and ratio >= 1e3
    return Check(6, "generating functions", "Psi round trip, map -> S -> map, exactness control",
                 f"rt {roundtrip:.1e}, repro {repro:.1e}, x{ratio:.0f}",
                 "< 1e-8, < 1e-5, >= 1e3", ok,
                 details={"roundtrip": roundtrip, "reproduction": repro, "residual": res,
                          "residual_control": res_bad})


def check_mollify(cfg: dict) -> Check:
    rows = []
    ok = True
    for src in (fx.GENFUN_SMOOTH, fx.GENFUN_WAVY, fx.GENFUN_C1):
        S = fx.genfun(src)
        base_ok = admissibility_check(S, 64).passed
        errs, passes = [], []
        for k in (8, 16, 32):
            Sk = mollify(S, k, spacing=1 / 128)
            passes.append(admissibility_check(Sk).passed)
            errs.append(c1_distance(Sk, S))
        mono = all(b < a for a, b in zip(errs, errs[1:]))
        ok &= base_ok and all(passes) and mono
        rows.append({"S": src, "admissible": base_ok, "k_pass": passes, "c1_error": errs})
    worst = max(r["c1_error"][-1] for r in rows)
    return Check(7, "mollification", "mollified admissible S stays admissible, C1 error drops",
                 f"all pass={ok}, C1(k=32) <= {worst:.1e}", "pass, monotone in k", ok,
                 details={"rows": rows})


def check_hamilton_jacobi(cfg: dict) -> Check:
    rows = []
    for src in fx.HJ_SEEDS:
        path = fx.linear_path(src)
        sign = resolve_hj_sign(path)
        resid = hj_flow_residual(path, [0.1, 0.2, 0.3], samples=cfg["hj_samples"],
                                 sign=conventions.HJ_SIGN)
        rows.append({"S0": src, **sign, "residual": resid})
    signs = {r["sign"] for r in rows}
    worst = max(r["residual"] for r in rows)
    ok = worst < 1e-4 and signs == {conventions.HJ_SIGN}
    return Check(8, "Hamilton-Jacobi", "flow of sigma dS_t/dt reproduces t -> Psi(S_t)",
                 f"sigma {sorted(signs)}, worst C0 {worst:.1e}", "< 1e-4, one sigma", ok,
                 details={"rows": rows, "sigma": conventions.HJ_SIGN})


def check_conjugated_genfun(cfg: dict) -> Check:
    worst = 0.0
    mu = LiouvilleFlow()
    for src in (fx.GENFUN_WAVY, fx.GENFUN_SMOOTH):
        S = fx.genfun(src)
        pts = quasi_random_points(S.phase_support(), 500, 3)
        for t in (0.1, 0.2):
            a = psi_apply(liouville_conjugated_genfun(S, t), pts)
            b = mu.apply(t, psi_apply(S, mu.apply(-t, pts)))
            worst = max(worst, float(np.max(np.linalg.norm(a - b, axis=-1))))
    return Check(9, "conjugated genfun", "Psi(e^t S(e^{-t/2} .)) = mu_t Psi(S) mu_t^{-1}",
                 f"worst {worst:.1e}", "< 1e-7", worst < 1e-7)


def check_rotations(cfg: dict) -> Check:
    d = {}
    pts = quasi_random_points(SupportBox.centered(1, 1.3), 500, 4)
    closed = 0.0
    for name in ("quadratic", "bump", "log"):
        p = fx.profile(name)
        for t in (0.05, 0.1, 0.2):
            a = rotation_commutator_map(p, t)(pts)
            b = composed_commutator(p, t)(pts)
            closed = max(closed, float(np.max(np.abs(a - b))))
    d["closed_vs_composed"] = closed
    bump = fx.profile("bump")
    tg = np.linspace(0.0, 0.2, 9)
    Hr = commutator_hamiltonian_recovered(bump, tg, grid=cfg["rot_grid"])
    d["flow_match"] = rotation_flow_match(bump, Hr, tg)
    try:
        cal = rotation_calabi_smooth(fx.profile("quadratic")).value
    except HamcalError as e:
        cal, d["calabi_error"] = float("nan"), str(e)
    d["calabi"] = cal
    d["calabi_rel"] = abs(abs(cal) - fx.ROTATION_CALABI_QUADRATIC) / fx.ROTATION_CALABI_QUADRATIC
    study = singular_profile_study(fx.profile("log"), [0.2, 0.1, 0.05, 0.025])
    d["singular_rows"] = study.rows
    d["singular_last_gap"] = study.extended_gaps[-1]
    diag_log = angle_bound_diagnostic(FiberedRotation(fx.profile("log")))
    diag_q = angle_bound_diagnostic(FiberedRotation(fx.profile("quadratic")))
    d["angle_log"], d["angle_quadratic"] = diag_log.obstructed, diag_q.obstructed
    ok = (closed < 1e-10 and d["flow_match"] < 1e-4 and d["calabi_rel"] < 1e-2
          and d["singular_last_gap"] < 2e-2 and diag_log.obstructed and not diag_q.obstructed)
    return Check(10, "fibered rotations", "commutator closed form, recovery, Calabi, G3 vs G2",
                 f"cf {closed:.0e}, fm {d['flow_match']:.1e}, cal {d['calabi_rel']:.0e}, "
                 f"gap {d['singular_last_gap']:.0e}",
                 "< 1e-10, < 1e-4, < 1e-2, < 2e-2, flags", ok, details=d)


def check_alternate_liouville(cfg: dict) -> Check:
    rep = alternate_liouville_invariance(flow_map(fx.h0()), (0.3, 0.0), cfg["ext_grid"])
    return Check(11, "Liouville invariance", "extended Calabi with centers 0 and (0.3, 0)",
                 f"rel gap {rep['rel_gap']:.1e}", "< 2e-2", rep["rel_gap"] < 2e-2, details=rep)


REPRO_SCENARIO = {
    "n": 1,
    "hamiltonians": {"H0": {"expr": fx.H0, "radius": 1.0}},
    "profiles": {"quad": {"expr": fx.PROFILE_QUADRATIC, "R": 1.0}},
    "tasks": [
        {"kind": "calabi", "hamiltonian": "H0", "grid": 64},
        {"kind": "commutator_study", "hamiltonian": "H0", "deltas": [0.1], "grid": 32},
        {"kind": "counterexample", "hamiltonian": "H0", "ks": [1, 2], "samples": 256},
        {"kind": "rotation_commutator", "profile": "quad", "times": [0.1]},
    ],
}


def check_reproducibility(cfg: dict, elapsed: float | None = None,
                          level: str = "quick") -> Check:
    from .scenario import run_scenario

    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp) / "scenario.json"
        src.write_text(json.dumps(REPRO_SCENARIO, indent=2))
        outs = []
        for i in range(2):
            out = Path(tmp) / f"run{i}"
            code = run_scenario(src, out, {"serial": True})
            outs.append((code, {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}))
    same = outs[0][1] == outs[1][1] and len(outs[0][1]) == len(REPRO_SCENARIO["tasks"])
    codes = [o[0] for o in outs]
    budget_ok = True if elapsed is None or level != "quick" else elapsed < 300.0
    measured = f"identical={same}, exit {codes}"
    if elapsed is not None:
        measured += f", suite {elapsed:.0f}s"
    return Check(12, "reproducibility", "serial reruns byte-identical; quick suite budget",
                 measured, "identical, exit 0, < 300 s", same and codes == [0, 0] and budget_ok)


CHECKS: dict[int, Callable[[dict], Check]] = {
    1: check_quadrature,
    2: check_homomorphism,
    3: check_scaling,
    4: check_limit,
    5: check_counterexample,
    6: check_genfun,
    7: check_mollify,
    8: check_hamilton_jacobi,
    9: check_conjugated_genfun,
    10: check_rotations,
    11: check_alternate_liouville,
}


def run_check(cid: int, level: str = "quick") -> Check:
    cfg = LEVELS[level]
    t0 = time.perf_counter()
    try:
        if cid == 12:
            c = check_reproducibility(cfg, None, level)
        else:
            c = CHECKS[cid](cfg)
    except HamcalError as e:
        c = Check(cid, f"check {cid}", "", f"error: {e}", "", False)
    c.seconds = time.perf_counter() - t0
    return c


# ------------------------------------------------------------- side tables

def algebra_variants_table(samples: int = 16, steps: int = 64) -> list[dict]:
    """Flow-match residuals of the shipped and the literal algebra formulas.

    The inverse uses a generator whose time dependence does not commute with
    its flow (otherwise both inverse formulas agree).
    """
    Ft = fx.field(fx.TWISTED)
    F = fx.field(fx.HOMOMORPHISM_PAIRS_2D[1][0])
    G = fx.field(fx.HOMOMORPHISM_PAIRS_2D[1][1])
    pts = quasi_random_points(SupportBox.centered(1, 1.0), samples, 5)
    saved = hamflow.STEPS_PER_UNIT
    hamflow.STEPS_PER_UNIT = steps
    try:
        target_inv = flow(Ft, 1, 0, pts)
        target_comp = flow(F, 0, 1, flow(G, 0, 1, pts))
        rows = []
        for literal in (False, True):
            inv = flow(inverse_hamiltonian(Ft, literal), 0, 1, pts)
            comp = flow(compose_hamiltonian(F, G, literal), 0, 1, pts)
            rows.append({"variant": "literal" if literal else "oracle",
                         "inverse_residual": float(np.max(np.linalg.norm(inv - target_inv, axis=-1))),
                         "compose_residual": float(np.max(np.linalg.norm(comp - target_comp, axis=-1)))})
    finally:
        hamflow.STEPS_PER_UNIT = saved
    return rows


def run_suite(level: str = "quick", out_dir: str | Path | None = None, only=None,
              echo: Callable[[str], None] | None = print) -> tuple[int, list[Check]]:
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    ids = sorted(only) if only else list(range(1, 13))
    start = time.perf_counter()
    rows = []
    for cid in ids:
        if cid == 12:
            t0 = time.perf_counter()
            c = check_reproducibility(LEVELS[level], time.perf_counter() - start, level)
            c.seconds = time.perf_counter() - t0
            if c.passed and level == "quick":
                total = time.perf_counter() - start
                c.passed = total < 300.0
                c.measured = c.measured.rsplit(",", 1)[0] + f", suite {total:.0f}s"
        else:
            c = run_check(cid, level)
        rows.append(c)
        if echo:
            echo(c.line())
    # the side table is slow (nested flows), so only full-suite runs print it
    variants = algebra_variants_table() if only is None else []
    if echo:
        echo("conventions: " + ", ".join(f"{k}={v}" for k, v in conventions.table().items()))
        for v in variants:
            echo(f"algebra variant {v['variant']:<8} inverse residual {v['inverse_residual']:.2e} "
                 f"compose residual {v['compose_residual']:.2e}")
    failed = [c.cid for c in rows if not c.passed]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = {"level": level, "checks": [asdict(c) for c in rows],
                  "conventions": conventions.table(), "algebra_variants": variants,
                  "failed": failed, "seconds": time.perf_counter() - start}
        (out / "verify_report.json").write_text(json.dumps(report, indent=2, default=_jsonable))
        (out / "verify_report.txt").write_text("\n".join(c.line() for c in rows) + "\n")
    return (1 if failed else 0), rows


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)
