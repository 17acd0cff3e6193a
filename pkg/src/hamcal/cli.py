"""Command line entry point: ``python3 -m hamcal <command>``.

Exit codes: 0 success, 1 numerical failure or failed verdict, 2 usage,
schema or parse error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import conventions, hamflow
from .errors import HamcalError
from .exprlang import ParseError


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _knobs(p: argparse.ArgumentParser):
    p.add_argument("--grid", type=int, help="spatial grid resolution")
    p.add_argument("--steps", type=int, help="RK4 steps per unit time")
    p.add_argument("--tol", type=_positive_float, help="solver / check tolerance")
    p.add_argument("--seed", type=int, help="seed of the quasi-random sample points")
    p.add_argument("--serial", action="store_true", help="disable all parallelism")
    p.add_argument("--paper-literal", dest="literal_variants", action="store_true",
                   help="use the literal inverse/composition generator formulas")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hamcal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a JSON scenario file")
    p.add_argument("--scenario", required=True, metavar="PATH")
    p.add_argument("--out", required=True, metavar="DIR")
    _knobs(p)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--level", choices=["quick", "full"], default="quick")
    p.add_argument("--out", metavar="DIR", help="write verify_report.{json,txt} here")
    p.add_argument("--only", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated check ids")
    p.add_argument("--serial", action="store_true")

    p = sub.add_parser("calabi", help="Calabi invariant of an expression Hamiltonian")
    p.add_argument("--expr", required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--radius", type=float, default=1.0)
    _knobs(p)

    p = sub.add_parser("flow", help="flow a point under an expression Hamiltonian")
    p.add_argument("--expr", required=True)
    p.add_argument("--point", type=_floats, required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=1.0)
    _knobs(p)

    p = sub.add_parser("genfun", help="apply Psi(S) (or its inverse) to a point")
    p.add_argument("--expr", required=True)
    p.add_argument("--point", type=_floats, required=True)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--inverse", action="store_true")
    _knobs(p)

    p = sub.add_parser("rotation", help="fibered rotation: Calabi, singular study, angle check")
    p.add_argument("--profile", required=True, help="expression in r")
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--unbounded", action="store_true", help="profile is singular at r = 0")
    p.add_argument("--eps", type=_floats, default=[0.2, 0.1, 0.05, 0.025])
    _knobs(p)
    return ap


def _print(obj):
    print(json.dumps(obj, indent=2, default=lambda o: o.tolist() if isinstance(o, np.ndarray)
                     else (o.item() if hasattr(o, "item") else str(o))))


def _apply_knobs(args):
    if getattr(args, "steps", None):
        hamflow.STEPS_PER_UNIT = args.steps
    if getattr(args, "literal_variants", False):
        conventions.INVERSE_VARIANT = conventions.COMPOSE_VARIANT = "literal"


def _cmd_calabi(args) -> int:
    from .calabi import calabi_eq1
    from .hamflow import HamiltonianField

    H = HamiltonianField.from_expression(args.expr, args.n, args.radius)
    r = calabi_eq1(H, args.grid or (256 if args.n == 1 else 16))
    _print({"value": r.value, "error_estimate": r.error_estimate, **r.meta})
    return 0


def _cmd_flow(args) -> int:
    from .hamflow import HamiltonianField, flow

    n = len(args.point) // 2
    if len(args.point) != 2 * n or n == 0:
        raise ValueError("--point needs an even number of coordinates")
    H = HamiltonianField.from_expression(args.expr, n, args.radius)
    _print({"t": args.t, "start": args.point,
            "end": flow(H, 0.0, args.t, np.asarray(args.point)).tolist()})
    return 0


def _cmd_genfun(args) -> int:
    from .genfun import GeneratingFunction, admissibility_check, psi_apply, psi_inverse_apply

    n = len(args.point) // 2
    if len(args.point) != 2 * n or n == 0:
        raise ValueError("--point needs an even number of coordinates")
    S = GeneratingFunction.from_expression(args.expr, n, args.radius)
    kw = {"tol": args.tol} if args.tol else {}
    fn = psi_inverse_apply if args.inverse else psi_apply
    out = fn(S, np.asarray(args.point), **kw)
    adm = admissibility_check(S, 64 if n == 1 else 32)
    _print({"point": args.point, "image": out.tolist(), "inverse": args.inverse,
            "admissible": adm.passed, "min_slope": adm.min_slope})
    return 0


def _cmd_rotation(args) -> int:
    from .rotations import (
        AngularProfile,
        FiberedRotation,
        angle_bound_diagnostic,
        rotation_calabi_smooth,
        singular_profile_study,
    )

    prof = AngularProfile.from_expression(args.profile, args.R, bounded=not args.unbounded)
    diag = angle_bound_diagnostic(FiberedRotation(prof))
    out = {"profile": prof.name, "angle_obstructed": diag.obstructed,
           "angle_estimates": diag.estimates}
    if args.unbounded:
        st = singular_profile_study(prof, args.eps)
        out["singular_study"] = st.rows
    else:
        out["calabi"] = rotation_calabi_smooth(prof).value
    _print(out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            from .scenario import run_scenario

            overrides = {"grid": args.grid, "steps": args.steps, "tol": args.tol,
                         "seed": args.seed, "serial": args.serial,
                         "literal_variants": args.literal_variants}
            return run_scenario(args.scenario, args.out, overrides,
                                echo=lambda s: print(s, file=sys.stderr))
        if args.command == "verify":
            from .verify import run_suite

            code, _ = run_suite(args.level, args.out, args.only)
            return code
        _apply_knobs(args)
        return {"calabi": _cmd_calabi, "flow": _cmd_flow, "genfun": _cmd_genfun,
                "rotation": _cmd_rotation}[args.command](args)
    except (ParseError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except HamcalError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
