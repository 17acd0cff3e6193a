"""Fibered rotations (r, theta) -> (r, theta + rho(r)) of the plane."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, quad
from scipy.interpolate import CubicSpline

from . import conventions
from .calabi import CalabiResult, extended_calabi_of_map
from .errors import AdmissibilityError, FlowMatchError
from .exprlang import Expression, parse
from .geom import LiouvilleFlow, SupportBox, cartesian_to_polar, fd_jacobian, polar_to_cartesian, \
    quasi_random_points
from .hamflow import (
    HamiltonianField,
    IsotopyTrace,
    MapRep,
    commutator_map,
    flow,
    flow_match_residual,
    hamiltonian_from_isotopy,
)


# ------------------------------------------------------------------ profiles

@dataclass
class AngularProfile:
    """Radial angle function rho on (0, inf), zero beyond ``R``."""

    func: Callable
    R: float
    integrable_near_zero: bool = True
    r_rho_to_zero: bool = True
    bounded: bool = True
    name: str = "rho"

    @classmethod
    def from_expression(cls, source: str | Expression, R: float, **flags) -> "AngularProfile":
        expr = parse(source) if isinstance(source, str) else source
        extra = expr.free_vars - {"r"}
        if extra:
            raise ValueError(f"angular profile may only use r, found {', '.join(sorted(extra))}")
        fn = expr._fn
        return cls(lambda r: fn({"r": r}), float(R), name=expr.source, **flags)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = (r > 0) & (r <= self.R) if not self.bounded else (r <= self.R)
        safe = np.where(inside, r, 0.5 * self.R)
        with np.errstate(all="ignore"):
            vals = np.broadcast_to(np.asarray(self.func(safe), dtype=float), r.shape)
        out = np.where(inside, vals, 0.0)
        return out if out.ndim else float(out)

    def check_support(self, samples: int = 200) -> float:
        r = np.linspace(self.R, 3 * self.R, samples)
        return float(np.max(np.abs(self(r))))

    def smoothed(self, eps: float) -> "AngularProfile":
        """rho times a smooth step vanishing on [0, eps], equal to 1 on [2 eps, inf)."""
        base = self

        def f(r):
            return base(r) * smooth_step(np.asarray(r) / eps)

        return AngularProfile(f, self.R, True, True, True, f"{self.name}*cut({eps:g})")

    def scaled(self, a: float) -> "AngularProfile":
        base = self
        return AngularProfile(lambda r: a * base(r), self.R, self.integrable_near_zero,
                              self.r_rho_to_zero, self.bounded, f"{a:g}*{self.name}")


def zero_profile(R: float = 1.0) -> AngularProfile:
    return AngularProfile(lambda r: np.zeros_like(np.asarray(r, dtype=float)), R, name="0")


def smooth_step(s) -> np.ndarray:
    """0 for s <= 1, 1 for s >= 2, C-infinity in between."""
    s = np.asarray(s, dtype=float)

    def f(u):
        pos = u > 0
        return np.where(pos, np.exp(-1.0 / np.where(pos, u, 1.0)), 0.0)

    a, b = f(s - 1.0), f(2.0 - s)
    return a / (a + b)


# ------------------------------------------------------------------ maps

@dataclass
class FiberedRotation:
    profile: AngularProfile

    def __call__(self, x):
        return rotation_apply(self, x)

    def as_map(self) -> MapRep:
        prof = self.profile
        return MapRep("closed-form", lambda x: _rotate(x, prof, 1.0),
                      lambda x: _rotate(x, prof, -1.0), 1,
                      SupportBox.centered(1, prof.R), label=f"rot[{prof.name}]",
                      extra={"profile": prof})


def _rotate(x, angle_of_r, sign: float):
    x = np.asarray(x, dtype=float)
    r, th = cartesian_to_polar(x)
    return polar_to_cartesian(r, th + sign * angle_of_r(r))


def rotation_apply(phi: FiberedRotation, point) -> np.ndarray:
    """Polar formula; the origin is fixed and points beyond R do not move."""
    return _rotate(point, phi.profile, 1.0)


def rotation_commutator_map(profile: AngularProfile, t: float) -> MapRep:
    """Closed form of [mu_t, phi]: (r, theta) -> (r, theta - rho(r) + rho(e^{-t/2} r))."""
    s = math.exp(-0.5 * t)

    def angle(r):
        return profile(s * np.asarray(r)) - profile(r)

    R = profile.R / s
    return MapRep("closed-form", lambda x: _rotate(x, angle, 1.0), lambda x: _rotate(x, angle, -1.0),
                  1, SupportBox.centered(1, R), label=f"[mu_{t}, rot[{profile.name}]]",
                  extra={"profile": profile, "t": t})


def composed_commutator(profile: AngularProfile, t: float,
                        lflow: LiouvilleFlow | None = None) -> MapRep:
    return commutator_map(lflow or LiouvilleFlow(), t, FiberedRotation(profile).as_map())


def rotation_isotopy(profile: AngularProfile, delta: float, steps: int = 8) -> IsotopyTrace:
    """Closed-form commutator isotopy t -> [mu_t, phi] on [0, delta]."""
    R = profile.R * math.exp(0.5 * delta)
    return IsotopyTrace(np.linspace(0.0, delta, steps + 1),
                        lambda t: rotation_commutator_map(profile, t),
                        SupportBox.centered(1, R), 1, label=f"[mu_t, rot[{profile.name}]]")


def jacobian_determinant_defect(m: MapRep | Callable, points, h: float = 1e-6) -> float:
    J = fd_jacobian(m, points, h)
    return float(np.max(np.abs(np.linalg.det(J) - 1.0)))


# ------------------------------------------------------- Hamiltonians

def _radial_quad(f, a, b):
    if b <= a:
        return 0.0
    val, _ = quad(f, a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
    return val


def commutator_hamiltonian_literal(profile: AngularProfile, t: float, r) -> np.ndarray:
    """r rho(e^{-t/2} r) - 1/2 int_0^r rho(e^{-t/2} s) ds, by adaptive quadrature."""
    if not profile.integrable_near_zero:
        raise AdmissibilityError(f"profile {profile.name!r} is not integrable near 0")
    s = math.exp(-0.5 * t)
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(rr)
    for i, ri in enumerate(rr):
        integral = _radial_quad(lambda u: float(profile(s * u)), 0.0, ri)
        out[i] = ri * float(profile(s * ri)) - 0.5 * integral
    return out if np.ndim(r) else float(out[0])


def commutator_hamiltonian_radial(profile: AngularProfile, t: float, r) -> np.ndarray:
    """Closed-form radial generator of the commutator isotopy under the
    module conventions:  (1/2) r^2 rho(e^{-t/2} r) + int_r^inf s rho(e^{-t/2} s) ds."""
    s = math.exp(-0.5 * t)
    sign = conventions.ROTATION_SIGN
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    top = profile.R / s
    out = np.empty_like(rr)
    for i, ri in enumerate(rr):
        tail = _radial_quad(lambda u: u * float(profile(s * u)), ri, top)
        out[i] = sign * (0.5 * ri * ri * float(profile(s * ri)) + tail)
    return out if np.ndim(r) else float(out[0])


def commutator_hamiltonian_recovered(profile: AngularProfile, t_grid, grid: int = 256,
                                     h_t: float = 1e-4, report: dict | None = None):
    """Generator of the closed-form commutator isotopy recovered on a 2-D grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    trace = rotation_isotopy(profile, float(t_grid[-1]), len(t_grid) - 1)
    trace.times = t_grid
    return hamiltonian_from_isotopy(trace, grid=grid, h_t=h_t, report=report)


def theta_variation(H: HamiltonianField, t: float, radii, angles: int = 64) -> float:
    """Largest spread of H over circles of the given radii."""
    th = np.linspace(0.0, 2 * np.pi, angles, endpoint=False)
    worst = 0.0
    for r in np.atleast_1d(radii):
        vals = H(t, polar_to_cartesian(np.full_like(th, r), th))
        worst = max(worst, float(np.ptp(vals)))
    return worst


def rotation_flow_match(profile: AngularProfile, H: HamiltonianField, t_grid,
                        samples: int = 256, seed: int = 0) -> float:
    """C0 gap between the flow of H from 0 and the closed-form commutators."""
    box = SupportBox.centered(1, profile.R * math.exp(0.5 * float(t_grid[-1])))
    return flow_match_residual(H, lambda t: rotation_commutator_map(profile, t),
                               [float(t) for t in t_grid[1:]], box, samples, seed)


# ------------------------------------------------------------- Calabi

def rotation_generator(profile: AngularProfile, nodes: int = 2001) -> Callable:
    """h with h'(r) = -s r rho(r), h(R) = 0, as a spline in r."""
    r = np.linspace(0.0, profile.R, nodes)
    integrand = r * profile(r)
    cum = cumulative_simpson(integrand, x=r, initial=0.0)
    tail = cum[-1] - cum  # int_r^R u rho(u) du
    h = conventions.ROTATION_SIGN * tail
    spline = CubicSpline(r, h)

    def hfun(rr):
        rr = np.asarray(rr, dtype=float)
        return np.where(rr < profile.R, spline(np.minimum(rr, profile.R)), 0.0)

    return hfun


def rotation_hamiltonian(profile: AngularProfile, nodes: int = 2001) -> HamiltonianField:
    h = rotation_generator(profile, nodes)
    return HamiltonianField(lambda t, x: h(np.hypot(x[..., 0], x[..., 1])), 1,
                            SupportBox.centered(1, profile.R), (0.0, 1.0), True,
                            f"h[{profile.name}]")


def rotation_calabi_smooth(profile: AngularProfile, check_flow: bool = True,
                           samples: int = 256, tol: float = 1e-3) -> CalabiResult:
    """2 pi int_0^R h(r) r dr for the autonomous generator of the rotation.

    With ``check_flow`` the generator is flowed for time 1 and compared with
    the rotation itself; a mismatch raises :class:`FlowMatchError`.
    """
    if not profile.bounded:
        raise AdmissibilityError("rotation_calabi_smooth needs a bounded smooth profile")
    h = rotation_generator(profile)
    value = 2 * math.pi * _radial_quad(lambda r: float(h(r)) * r, 0.0, profile.R)
    coarse = rotation_generator(profile, 1001)
    coarse_value = 2 * math.pi * _radial_quad(lambda r: float(coarse(r)) * r, 0.0, profile.R)
    meta = {"profile": profile.name}
    if check_flow:
        H = rotation_hamiltonian(profile)
        pts = quasi_random_points(H.support, samples, 0)
        gap = float(np.max(np.linalg.norm(
            flow(H, 0.0, 1.0, pts, steps=64) - rotation_apply(FiberedRotation(profile), pts), axis=-1)))
        meta["flow_check"] = gap
        if gap > tol:
            raise FlowMatchError(f"flow of the rotation generator misses the rotation by {gap:.3g}")
    return CalabiResult(value, "eq1-radial", abs(value - coarse_value), meta)


def rotation_extended_calabi(profile: AngularProfile, grid: int = 64, h_t: float = 1e-3) -> CalabiResult:
    """Extended Calabi through the generic commutator-recovery pipeline."""
    return extended_calabi_of_map(FiberedRotation(profile).as_map(), grid=grid, h_t=h_t)


# ------------------------------------------------------ singular profiles

def graded_radii(R: float, count: int = 4001, power: float = 3.0) -> np.ndarray:
    """Radii clustered near 0: R * s^power for uniform s."""
    return R * np.linspace(0.0, 1.0, count) ** power


def radial_recovery(trace_or_profile, t: float, radii: np.ndarray, h_t: float = 1e-5) -> np.ndarray:
    """Generator of a fibered-rotation isotopy along a ray, from the map alone.

    The angular velocity w(r) is read off the isotopy at (r, 0) and
    h_t(r) = s * int_r^inf u w(u) du is integrated on the radial grid.
    """
    trace = trace_or_profile
    pts = np.stack([radii, np.zeros_like(radii)], -1)
    V = trace.velocity(t, pts, h_t)
    w = np.where(radii > 0, V[:, 1] / np.where(radii > 0, radii, 1.0), 0.0)
    integrand = radii * w
    cum = cumulative_simpson(integrand, x=radii, initial=0.0)
    return conventions.RECOVERY_SIGN * (cum[-1] - cum)


@dataclass
class SingularStudy:
    eps: list
    map_distance: list
    hamiltonian_gaps: list
    extended: list
    extended_gaps: list
    rows: list = field(default_factory=list)


def singular_profile_study(profile: AngularProfile, eps_list, delta: float = 0.2,
                           t_samples: int = 3, radial_nodes: int = 4001,
                           samples: int = 2048) -> SingularStudy:
    """Smoothing sequence rho_k = rho * cut(r / eps_k) for a singular profile.

    Reports the C0 distance of each smoothed rotation to the singular one,
    sup gaps of successive commutator Hamiltonians on [0, delta] x radial grid,
    and extended Calabi values with their successive relative gaps.
    """
    if not (profile.integrable_near_zero and profile.r_rho_to_zero):
        raise AdmissibilityError("singular study needs rho integrable near 0 and r rho -> 0")
    eps_list = sorted(eps_list, reverse=True)
    box_R = profile.R * math.exp(0.5 * delta)
    radii = graded_radii(box_R, radial_nodes)
    times = np.linspace(0.0, delta, t_samples)
    base = FiberedRotation(profile)
    rng = np.random.default_rng(0)
    rr = profile.R * np.sqrt(rng.uniform(0, 1, samples))
    rr = np.concatenate([rr, np.geomspace(1e-8, profile.R, 400)])
    th = rng.uniform(0, 2 * np.pi, rr.size)
    pts = polar_to_cartesian(rr, th)
    ref = rotation_apply(base, pts)
    dists, fields, ext = [], [], []
    for eps in eps_list:
        pk = profile.smoothed(eps)
        dists.append(float(np.max(np.linalg.norm(rotation_apply(FiberedRotation(pk), pts) - ref, axis=-1))))
        trace = rotation_isotopy(pk, delta)
        Hk = np.stack([radial_recovery(trace, float(t), radii) for t in times])
        fields.append(Hk)
        # extended Calabi: (1/2) * 2 pi int H(0, r) r dr
        ext.append(float(math.pi * cumulative_simpson(Hk[0] * radii, x=radii)[-1]))
    hgaps = [float(np.max(np.abs(a - b))) for a, b in zip(fields, fields[1:])]
    egaps = [abs(a - b) / max(abs(b), 1e-300) for a, b in zip(ext, ext[1:])]
    rows = []
    for i, eps in enumerate(eps_list):
        rows.append({"k": i, "eps": eps, "map_distance": dists[i],
                     "hamiltonian_gap": hgaps[i - 1] if i else float("nan"),
                     "extended_calabi": ext[i],
                     "extended_gap": egaps[i - 1] if i else float("nan")})
    return SingularStudy(list(eps_list), dists, hgaps, ext, egaps, rows)


# ------------------------------------------------------ angle diagnostic

@dataclass
class AngleDiagnostic:
    radii: list
    estimates: list
    obstructed: bool


def angle_bound_diagnostic(m: MapRep | FiberedRotation, levels: int = 14, per_level: int = 64,
                           R: float | None = None) -> AngleDiagnostic:
    """sup |angle| at radii R 2^-j, j = 1..levels.

    For fibered rotations the angle is rho(r) itself; for other maps the
    wrapped angular displacement about the origin is used.  The map is flagged
    when the last estimate exceeds pi and the last three estimates increase.
    """
    if isinstance(m, FiberedRotation):
        m = m.as_map()
    profile = m.extra.get("profile")
    R = R or (profile.R if profile is not None else (m.support.radius if m.support else 1.0))
    radii = [R * 2.0 ** -j for j in range(1, levels + 1)]
    th = np.linspace(0.0, 2 * np.pi, per_level, endpoint=False)
    est = []
    for r in radii:
        if profile is not None and m.kind == "closed-form" and "t" not in m.extra:
            est.append(float(abs(profile(r))))
            continue
        pts = polar_to_cartesian(np.full_like(th, r), th)
        img = m(pts)
        d = np.angle(np.exp(1j * (np.arctan2(img[:, 1], img[:, 0]) - th)))
        est.append(float(np.max(np.abs(d))))
    tail = est[-3:]
    obstructed = bool(est[-1] > math.pi and all(a < b for a, b in zip(tail, tail[1:])))
    return AngleDiagnostic(radii, est, obstructed)
