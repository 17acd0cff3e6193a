"""Named fixtures shared by the verification suite, the CLI and the tests."""
from __future__ import annotations

import math

from .genfun import GeneratingFunction
from .hamflow import HamiltonianField
from .rotations import AngularProfile

H0 = "max(0, 1-q1^2-p1^2)^3"
H0_CALABI = math.pi / 4

# (F, G) pairs on R^2, all supported in the unit box
HOMOMORPHISM_PAIRS_2D = [
    (H0, H0),
    ("bump(sqrt(q1^2+p1^2))", "0.5*(1+t)*bump(sqrt((q1-0.3)^2+p1^2)/0.6)"),
    ("bump(sqrt((q1+0.5)^2+p1^2)/0.4)", "0.7*bump(sqrt((q1-0.5)^2+p1^2)/0.4)"),
    ("(1+0.5*sin(3*t))*max(0, 1-q1^2-p1^2)^3", "bump(sqrt(q1^2+(p1-0.2)^2)/0.7)*q1"),
    ("cos(t)*max(0, 1-q1^2-p1^2)^3+0.3*t*bump(sqrt(q1^2+p1^2)/0.5)",
     "-0.4*bump(sqrt((q1-0.2)^2+(p1+0.2)^2)/0.7)"),
]

# time dependence that does not commute with the flow, so the two inverse
# generator formulas give different maps
TWISTED = "max(0, 1-q1^2-p1^2)^3 + t*bump(sqrt(q1^2+(p1-0.2)^2)/0.7)*q1"

BUMP_4D = "bump(sqrt(q1^2+p1^2+q2^2+p2^2))"
HOMOMORPHISM_PAIR_4D = (BUMP_4D, "0.5*(1+t)*bump(sqrt((q1-0.2)^2+p1^2+q2^2+p2^2)/0.7)")

# admissible generating functions on R^1 x R^1; the last one is only C^1
GENFUN_SMOOTH = "0.05*bump(sqrt(x1^2+eta1^2))"
GENFUN_WAVY = "0.1*sin(2*x1)*bump(sqrt(x1^2+eta1^2))*cos(eta1)"
GENFUN_C1 = "0.08*max(0, 1-x1^2-eta1^2)^2"
# mixed second derivative reaches 1.5 but x + S_eta and eta + S_x stay increasing
GENFUN_STIFF = "0.0714*bump(x1+eta1)*bump((x1-eta1)/4)"
GENFUN_STIFF_RADIUS = 2.5

# amplitudes keep t * S0 admissible (mixed Hessian below 0.8) for t <= 0.3
HJ_SEEDS = [
    "0.2*bump(sqrt(x1^2+eta1^2))",
    "0.25*bump(sqrt(x1^2+eta1^2))*sin(x1+eta1)",
    "0.25*bump(sqrt((x1-0.2)^2+eta1^2))*x1",
]
HJ_RADIUS = 1.2

PROFILE_QUADRATIC = "max(0, 1-r^2)"
PROFILE_BUMP = "bump(r)"
PROFILE_SHIFTED = "bump((r-0.5)/0.3)"
PROFILE_LOG = "-log(r)*bump(r)"
ROTATION_CALABI_QUADRATIC = math.pi / 12


def h0(scale: float = 1.0) -> HamiltonianField:
    src = H0 if scale == 1.0 else f"{scale!r}*{H0}"
    return HamiltonianField.from_expression(src, 1, 1.0, name="H0" if scale == 1.0 else None)


def field(src: str, n: int = 1, radius: float = 1.0) -> HamiltonianField:
    return HamiltonianField.from_expression(src, n, radius)


def genfun(src: str, radius: float = 1.0) -> GeneratingFunction:
    return GeneratingFunction.from_expression(src, 1, radius)


def stiff_genfun() -> GeneratingFunction:
    return GeneratingFunction.from_expression(GENFUN_STIFF, 1, GENFUN_STIFF_RADIUS)


def linear_path(src: str, radius: float = HJ_RADIUS):
    """t -> t * S0 as a family of generating functions."""
    S0 = genfun(src, radius)

    def path(t: float) -> GeneratingFunction:
        return GeneratingFunction(lambda z: t * S0.func(z), 1, S0.support, f"{t:g}*({src})")

    path.seed = S0
    return path


def profile(name: str) -> AngularProfile:
    table = {
        "quadratic": (PROFILE_QUADRATIC, 1.0, {}),
        "bump": (PROFILE_BUMP, 1.0, {}),
        "shifted": (PROFILE_SHIFTED, 0.8, {}),
        "log": (PROFILE_LOG, 1.0, {"bounded": False}),
    }
    src, R, flags = table[name]
    return AngularProfile.from_expression(src, R, **flags)
