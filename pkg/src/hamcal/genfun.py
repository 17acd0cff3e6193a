"""Generating functions in the global chart of R^{2n} x R^{2n}.

The chart sends ((x, y), (xi, eta)) to base (x, eta) and fiber
(y - eta, xi - x).  A generating function S(x, eta) then corresponds to the
map (x, y) -> (xi, eta) with

    xi = x + dS/deta(x, eta),    y = eta + dS/dx(x, eta).

Points of S's domain are arrays ordered (x1..xn, eta1..etan); phase points
are ordered (q1..qn, p1..pn) as everywhere else.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline, RegularGridInterpolator
from scipy.signal import fftconvolve

from . import conventions
from .errors import AdmissibilityError, ConvergenceError, SupportError
from .exprlang import Expression, bump, parse
from .geom import SupportBox, anchored_potentials, quasi_random_points
from .hamflow import HamiltonianField, MapRep, flow

SOLVE_TOL = 1e-12
SOLVE_BUDGET = 200
FIXED_POINT_BOUND = 0.9
GRAD_H = 1e-5


# --------------------------------------------------------------------- chart

def chart_forward(z, w) -> tuple[np.ndarray, np.ndarray]:
    """((x, y), (xi, eta)) -> (base (x, eta), fiber (y - eta, xi - x))."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if z.shape != w.shape:
        raise ValueError("dimension mismatch between the two phase points")
    n = z.shape[-1] // 2
    x, y = z[..., :n], z[..., n:]
    xi, eta = w[..., :n], w[..., n:]
    return np.concatenate([x, eta], -1), np.concatenate([y - eta, xi - x], -1)


def chart_backward(base, fiber) -> tuple[np.ndarray, np.ndarray]:
    base = np.asarray(base, dtype=float)
    fiber = np.asarray(fiber, dtype=float)
    if base.shape != fiber.shape:
        raise ValueError("dimension mismatch between base and fiber")
    n = base.shape[-1] // 2
    x, eta = base[..., :n], base[..., n:]
    u, v = fiber[..., :n], fiber[..., n:]
    return np.concatenate([x, u + eta], -1), np.concatenate([v + x, eta], -1)


# -------------------------------------------------------- generating functions

def _part_slice(part, n):
    if part is None:
        return slice(None)
    if part == "x":
        return slice(0, n)
    if part == "eta":
        return slice(n, 2 * n)
    raise ValueError(f"unknown gradient part {part!r}")


class GeneratingFunction:
    """Compactly supported C^1 function S(x, eta) with gradient access."""

    def __init__(self, func: Callable, n: int, support: SupportBox, name: str = ""):
        self.func = func
        self.n = n
        self.support = support
        self.name = name
        self._hessian_bound = None
        self._grad_bound = None

    @classmethod
    def from_expression(cls, source: str | Expression, n: int, support: SupportBox | float,
                        name: str = "") -> "GeneratingFunction":
        expr = parse(source) if isinstance(source, str) else source
        if not isinstance(support, SupportBox):
            support = SupportBox.centered(n, support)
        allowed = {f"x{i + 1}" for i in range(n)} | {f"eta{i + 1}" for i in range(n)} | {"t"}
        unknown = expr.free_vars - allowed
        if unknown:
            raise ValueError(f"unknown variable(s) in generating function: {', '.join(sorted(unknown))}")
        fn = expr._fn

        def func(z):
            env = {"t": 0.0}
            for i in range(n):
                env[f"x{i + 1}"] = z[..., i]
                env[f"eta{i + 1}"] = z[..., n + i]
            return fn(env)

        return cls(func, n, support, name or expr.source)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        inside = self.support.contains(z)
        with np.errstate(all="ignore"):
            vals = np.broadcast_to(np.asarray(self.func(z), dtype=float), z.shape[:-1])
        return np.where(inside, vals, 0.0)

    def gradient(self, z, h: float = GRAD_H, part: str | None = None) -> np.ndarray:
        """(dS/dx1..dS/dxn, dS/deta1..dS/detan) by central differences.

        ``part`` = 'x' or 'eta' returns only that half.
        """
        z = np.asarray(z, dtype=float)
        m = z.shape[-1]
        eye = np.eye(m)[_part_slice(part, m // 2)] * h
        k = eye.shape[0]
        shifted = np.concatenate([z[..., None, :] + eye, z[..., None, :] - eye], axis=-2)
        vals = self(shifted)
        return (vals[..., :k] - vals[..., k:]) / (2 * h)

    def _scan_grid(self, per_axis: int | None = None) -> np.ndarray:
        per_axis = per_axis or (161 if self.n == 1 else 17)
        lo, hi = self.support.bounds(True)
        axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2 * self.n)

    def hessian_bound(self) -> float:
        """Largest norm of the mixed block d^2S/dx deta on a scan grid."""
        if self._hessian_bound is None:
            pts = self._scan_grid()
            n = self.n
            h = 1e-4
            worst = 0.0
            mixed = np.zeros(pts.shape[:-1] + (n, n))
            for j in range(n):
                e = np.zeros(2 * n)
                e[n + j] = h
                gp = self.gradient(pts + e, part="x")
                gm = self.gradient(pts - e, part="x")
                mixed[..., :, j] = (gp - gm) / (2 * h)
            worst = float(np.max(np.linalg.norm(mixed, ord=2, axis=(-2, -1)))) if n > 1 \
                else float(np.max(np.abs(mixed)))
            self._hessian_bound = worst
        return self._hessian_bound

    def gradient_bound(self) -> float:
        if self._grad_bound is None:
            self._grad_bound = float(np.max(np.abs(self.gradient(self._scan_grid()))))
        return self._grad_bound

    def phase_support(self) -> SupportBox:
        """Box in phase space outside which Psi(S) is the identity."""
        return SupportBox(self.support.center,
                          self.support.padded_radius + self.gradient_bound(),
                          self.support.padding)

    def __repr__(self):
        return f"GeneratingFunction({self.name!r}, n={self.n})"


class GridGenFun(GeneratingFunction):
    """S sampled on a node grid.

    Values are interpolated multilinearly.  Gradients come from stored slopes
    when given, otherwise from centered differences of the values; they are
    interpolated with ``interpolation`` ('linear' or 'cubic').
    """

    def __init__(self, axes: list, values: np.ndarray, support: SupportBox,
                 slopes: np.ndarray | None = None, interpolation: str = "linear",
                 name: str = "grid"):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.values = np.asarray(values, dtype=float)
        n = len(axes) // 2
        if slopes is None:
            spacing = [a[1] - a[0] for a in self.axes]
            slopes = np.stack(np.gradient(self.values, *spacing), axis=-1)
        self.slopes = np.asarray(slopes, dtype=float)
        self.interpolation = interpolation
        self._value_interp = RegularGridInterpolator(self.axes, self.values, method="linear",
                                                     bounds_error=False, fill_value=0.0)
        self._slope_interp = [self._make_interp(self.slopes[..., i]) for i in range(2 * n)]
        super().__init__(self._value, n, support, name)

    def _make_interp(self, arr):
        if self.interpolation == "cubic" and len(self.axes) == 2:
            return RectBivariateSpline(self.axes[0], self.axes[1], arr, kx=3, ky=3)
        method = "cubic" if self.interpolation == "cubic" else "linear"
        return RegularGridInterpolator(self.axes, arr, method=method,
                                       bounds_error=False, fill_value=0.0)

    def _value(self, z):
        return self._value_interp(z.reshape(-1, z.shape[-1])).reshape(z.shape[:-1])

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        inside = self._in_grid(z)
        return np.where(inside, self._value(z), 0.0)

    def _in_grid(self, z):
        inside = np.ones(z.shape[:-1], dtype=bool)
        for i, a in enumerate(self.axes):
            inside &= (z[..., i] >= a[0]) & (z[..., i] <= a[-1])
        return inside

    def gradient(self, z, h: float = GRAD_H, part: str | None = None) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        flat = z.reshape(-1, z.shape[-1])
        inside = self._in_grid(flat)
        interps = self._slope_interp[_part_slice(part, self.n)]
        out = np.zeros((flat.shape[0], len(interps)))
        if inside.any():
            sub = flat[inside]
            cols = []
            for f in interps:
                if isinstance(f, RectBivariateSpline):
                    cols.append(f.ev(sub[:, 0], sub[:, 1]))
                else:
                    cols.append(f(sub))
            out[inside] = np.stack(cols, axis=-1)
        return out.reshape(z.shape[:-1] + (len(interps),))

    def node_points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), -1)

    def hessian_bound(self) -> float:
        if self._hessian_bound is None:
            n = self.n
            spacing = [a[1] - a[0] for a in self.axes]
            worst = 0.0
            for i in range(n):
                for j in range(n):
                    d = np.gradient(self.slopes[..., i], spacing[n + j], axis=n + j)
                    worst = max(worst, float(np.max(np.abs(d))))
            self._hessian_bound = worst * n
        return self._hessian_bound

    def gradient_bound(self) -> float:
        if self._grad_bound is None:
            self._grad_bound = float(np.max(np.abs(self.slopes)))
        return self._grad_bound


def sample_on_grid(S: GeneratingFunction, axes: list) -> GridGenFun:
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    return GridGenFun(axes, S(pts), S.support, name=f"grid({S.name})")


# -------------------------------------------------------------------- solves

def _solve_coordinatewise(S: GeneratingFunction, fixed: np.ndarray, target: np.ndarray,
                          unknown_is_eta: bool, tol: float, budget: int,
                          method: str = "auto") -> np.ndarray:
    """Solve u + dS/d(other)(.) = target for u, where u is eta (or x).

    For eta: u = eta, the map is eta -> eta + dS/dx(fixed_x, eta).
    For x:   u = x,   the map is x -> x + dS/deta(x, fixed_eta).
    """
    n = S.n

    def assemble(u):
        return np.concatenate([fixed, u], -1) if unknown_is_eta else np.concatenate([u, fixed], -1)

    def slope(u):
        return S.gradient(assemble(u), part="x" if unknown_is_eta else "eta")

    u = target.copy()
    if method not in ("auto", "fixed", "bisect"):
        raise ValueError(f"unknown solve method {method!r}")
    if method == "fixed" or (method == "auto" and S.hessian_bound() < FIXED_POINT_BOUND):
        step = 0.0
        for _ in range(budget):
            new = target - slope(u)
            step = np.max(np.abs(new - u)) if u.size else 0.0
            u = new
            if not np.isfinite(step):
                break
            if step < tol:
                return u
        if method == "fixed":
            raise ConvergenceError(f"fixed-point solve for {S.name!r} did not converge "
                                   f"(last step {step:.3g})")
        u = target.copy()
    # per-coordinate monotone bisection, swept Gauss-Seidel style
    M = S.gradient_bound() * 1.05 + 1e-9
    for sweep in range(budget):
        prev = u.copy()
        for i in range(n):
            lo = target[..., i] - M
            hi = target[..., i] + M
            while True:
                mid = 0.5 * (lo + hi)
                trial = u.copy()
                trial[..., i] = mid
                g = mid + slope(trial)[..., i] - target[..., i]
                hi = np.where(g > 0, mid, hi)
                lo = np.where(g > 0, lo, mid)
                if np.max(hi - lo) < tol:
                    break
            u[..., i] = 0.5 * (lo + hi)
        if n == 1 or np.max(np.abs(u - prev)) < tol:
            break
    else:
        raise ConvergenceError(f"coordinatewise bisection for {S.name!r} did not settle")
    resid = np.max(np.abs(u + slope(u) - target)) if u.size else 0.0
    if resid > 1e3 * tol + 1e-9:
        raise AdmissibilityError(f"monotone solve left residual {resid:.3g}; "
                                 f"{S.name!r} is not admissible here")
    return u


def psi_apply(S: GeneratingFunction, z, tol: float = SOLVE_TOL,
              budget: int = SOLVE_BUDGET, method: str = "auto") -> np.ndarray:
    """(x, y) -> (xi, eta) for the map generated by S."""
    z = np.asarray(z, dtype=float)
    n = S.n
    x, y = z[..., :n], z[..., n:]
    eta = _solve_coordinatewise(S, x, y, True, tol, budget, method)
    xi = x + S.gradient(np.concatenate([x, eta], -1), part="eta")
    return np.concatenate([xi, eta], -1)


def psi_inverse_apply(S: GeneratingFunction, w, tol: float = SOLVE_TOL,
                      budget: int = SOLVE_BUDGET, method: str = "auto") -> np.ndarray:
    """(xi, eta) -> (x, y), solving xi = x + dS/deta(x, eta) for x first."""
    w = np.asarray(w, dtype=float)
    n = S.n
    xi, eta = w[..., :n], w[..., n:]
    x = _solve_coordinatewise(S, eta, xi, False, tol, budget, method)
    y = eta + S.gradient(np.concatenate([x, eta], -1), part="x")
    return np.concatenate([x, y], -1)


def genfun_map(S: GeneratingFunction) -> MapRep:
    return MapRep("genfun", lambda z: psi_apply(S, z), lambda w: psi_inverse_apply(S, w),
                  S.n, S.phase_support(), label=f"Psi({S.name})", extra={"S": S})


# ----------------------------------------------------------- admissibility

@dataclass
class AdmissibilityReport:
    passed: bool
    min_slope: float
    worst_location: tuple
    verdicts: dict = field(default_factory=dict)


def admissibility_check(S: GeneratingFunction, grid: int = 32) -> AdmissibilityReport:
    """Check x_i -> x_i + dS/deta_i and eta_i -> eta_i + dS/dx_i are strictly
    increasing along every grid line (native grid for grid-backed S)."""
    n = S.n
    if isinstance(S, GridGenFun):
        axes = S.axes
        pts = S.node_points()
        g = S.slopes
    else:
        if grid < 32:
            raise ValueError("admissibility scan needs at least 32 points per axis")
        lo, hi = S.support.bounds(True)
        axes = [np.linspace(a, b, grid + 1) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
        g = S.gradient(pts)
    verdicts = {}
    worst, where = math.inf, ()
    for i in range(n):
        for label, axis, comp in ((f"x{i + 1}", i, n + i), (f"eta{i + 1}", n + i, i)):
            vals = pts[..., axis] + g[..., comp]
            h = axes[axis][1] - axes[axis][0]
            slopes = np.diff(vals, axis=axis) / h
            k = int(np.argmin(slopes))
            smin = float(slopes.ravel()[k])
            verdicts[label] = {"increasing": bool(smin > 0), "min_slope": smin}
            if smin < worst:
                idx = np.unravel_index(k, slopes.shape)
                worst, where = smin, tuple(float(axes[d][idx[d]]) for d in range(2 * n))
    return AdmissibilityReport(all(v["increasing"] for v in verdicts.values()),
                               worst, where, verdicts)


# -------------------------------------------------------------- mollifiers

@dataclass(frozen=True)
class MollifierKernel:
    """chi_k(z) = k^{2n} chi(k z) with chi a normalized radial bump in the unit ball."""

    k: int
    n: int = 1
    profile: Callable = bump

    def weights(self, spacing) -> np.ndarray:
        """Discrete kernel on the grid offsets, normalised to unit mass."""
        m = 2 * self.n
        radius = 1.0 / self.k
        half = [int(math.floor(radius / h)) for h in np.broadcast_to(spacing, (m,))]
        offs = [np.arange(-c, c + 1) * h for c, h in zip(half, np.broadcast_to(spacing, (m,)))]
        mesh = np.meshgrid(*offs, indexing="ij")
        rad = np.sqrt(sum(a * a for a in mesh)) * self.k
        w = self.profile(rad)
        return w / w.sum()

    def continuous_mass(self, resolution: int = 64) -> float:
        """Integral of the unnormalised profile over the unit ball, for checks."""
        from .geom import integrate
        box = (np.full(2 * self.n, -1.0), np.full(2 * self.n, 1.0))
        return integrate(lambda z: self.profile(np.sqrt(np.sum(z * z, -1))), box,
                         resolution, "simpson", boundary_tol=None)


def mollify(S: GeneratingFunction, kernel: MollifierKernel | int, spacing: float | None = None,
            min_nodes_per_radius: int = 4) -> GridGenFun:
    """Discrete convolution of S with chi_k on a uniform node grid.

    The grid covers the support box enlarged by 1/k; the spacing must resolve
    the kernel radius with at least ``min_nodes_per_radius`` nodes.
    """
    if isinstance(kernel, int):
        kernel = MollifierKernel(kernel, S.n)
    radius = 1.0 / kernel.k
    if isinstance(S, GridGenFun):
        base_axes = S.axes
        spacing = base_axes[0][1] - base_axes[0][0]
        pad = int(math.ceil(radius / spacing)) + 1
        axes = [np.concatenate([a[0] - spacing * np.arange(pad, 0, -1), a,
                                a[-1] + spacing * np.arange(1, pad + 1)]) for a in base_axes]
        vals = np.pad(S.values, pad)
    else:
        spacing = spacing or radius / (2 * min_nodes_per_radius)
        lo, hi = S.support.bounds(True)
        lo, hi = lo - radius - spacing, hi + radius + spacing
        count = int(math.ceil((hi[0] - lo[0]) / spacing))
        axes = [np.linspace(a, a + count * spacing, count + 1) for a in lo]
        vals = S(np.stack(np.meshgrid(*axes, indexing="ij"), -1))
    if radius / spacing < min_nodes_per_radius:
        raise SupportError(f"grid spacing {spacing:.3g} too coarse for kernel radius {radius:.3g}")
    w = kernel.weights(spacing)
    smooth = fftconvolve(vals, w, mode="same")
    box = SupportBox(S.support.center, S.support.padded_radius + radius, 0.0)
    return GridGenFun(axes, smooth, box, name=f"mollify_{kernel.k}({S.name})")


def c1_distance(a: GeneratingFunction, b: GeneratingFunction, axes: list | None = None) -> float:
    """sup |a - b| + sup |grad a - grad b| on a node grid (a's grid if it has one)."""
    if axes is None:
        if isinstance(a, GridGenFun):
            axes = a.axes
        else:
            lo, hi = a.support.bounds(True)
            axes = [np.linspace(l, h, 129) for l, h in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    spacing = [ax[1] - ax[0] for ax in axes]

    def sampled(S):
        if isinstance(S, GridGenFun) and S.axes is axes:
            return S.values, S.slopes
        v = S(pts)
        return v, np.stack(np.gradient(v, *spacing), -1)

    va, ga = sampled(a)
    vb, gb = sampled(b)
    return float(np.max(np.abs(va - vb)) + np.max(np.abs(ga - gb)))


# ------------------------------------------------------ Liouville conjugation

def liouville_conjugated_genfun(S: GeneratingFunction, t: float) -> GeneratingFunction:
    """e^t S(e^{-t/2} x, e^{-t/2} eta): generates mu_t o Psi(S) o mu_t^{-1}."""
    a, s = math.exp(t), math.exp(-0.5 * t)
    box = SupportBox(tuple(np.asarray(S.support.center) / s), S.support.radius / s,
                     S.support.padding)
    return GeneratingFunction(lambda z: a * S(s * z), S.n, box, f"conj_{t}({S.name})")


# ------------------------------------------------------- Hamilton-Jacobi

def hamilton_jacobi_hamiltonian(S_path: Callable[[float], GeneratingFunction], t: float, w,
                                dt: float = 1e-3, sign: int | None = None) -> np.ndarray:
    """sign * dS_t/dt(x, w_p) with (x, y) = Psi(S_t)^{-1}(w)."""
    sign = conventions.HJ_SIGN if sign is None else sign
    w = np.asarray(w, dtype=float)
    S = S_path(t)
    n = S.n
    x = psi_inverse_apply(S, w)[..., :n]
    base = np.concatenate([x, w[..., n:]], -1)
    lo = max(t - dt, 0.0)
    dS = (S_path(t + dt)(base) - S_path(lo)(base)) / (t + dt - lo)
    return sign * dS


def hj_field(S_path: Callable[[float], GeneratingFunction], interval=(0.0, 1.0),
             dt: float = 1e-3, sign: int | None = None) -> HamiltonianField:
    S0 = S_path(interval[0])
    S1 = S_path(interval[1])
    R = max(S0.phase_support().radius, S1.phase_support().radius)
    support = SupportBox(S0.support.center, R, S0.support.padding)
    return HamiltonianField(lambda t, w: hamilton_jacobi_hamiltonian(S_path, t, w, dt, sign),
                            S0.n, support, interval, False, "HJ")


def hj_flow_residual(S_path, times, samples: int = 200, seed: int = 0,
                     sign: int | None = None, dt: float = 1e-3,
                     steps_per_unit: int = 100) -> float:
    """C0 gap between the flow of the HJ field and t -> Psi(S_t) at ``times``."""
    H = hj_field(S_path, (0.0, float(times[-1])), dt, sign)
    pts = quasi_random_points(H.support, samples, seed)
    start = psi_apply(S_path(0.0), pts)
    worst, prev, y = 0.0, 0.0, start
    for t in times:
        y = flow(H, prev, float(t), y, steps=max(1, math.ceil(steps_per_unit * (t - prev))))
        prev = float(t)
        ref = psi_apply(S_path(float(t)), pts)
        worst = max(worst, float(np.max(np.linalg.norm(y - ref, axis=-1))))
    return worst


def resolve_hj_sign(S_path, t_probe: float = 0.1, samples: int = 64, seed: int = 0) -> dict:
    """Flow the HJ field with both signs up to ``t_probe`` and keep the one
    reproducing the path."""
    res = {s: hj_flow_residual(S_path, [t_probe], samples, seed, sign=s) for s in (1, -1)}
    best = min(res, key=res.get)
    return {"sign": best, "residual_plus": res[1], "residual_minus": res[-1]}


# ------------------------------------------------------- map -> S (section)

def genfun_from_map(phi: MapRep, grid: int = 64, box: SupportBox | None = None,
                    tol: float = 1e-13, budget: int = SOLVE_BUDGET,
                    interpolation: str = "cubic") -> tuple[GridGenFun, float]:
    """Generating function of a near-identity symplectic map, with exactness residual.

    For each base node (x, eta) the slice equation eta = p(phi(x, y)) is solved
    for y; the fiber (y - eta, xi - x) is the 1-form s = dS.  Since S vanishes
    on the lower faces of the box, integrating s_i along axis i from that face
    must give the same potential for every i; the exactness residual is the
    largest disagreement, i.e. the largest loop integral of s around
    rectangles anchored on the boundary.
    """
    box = box or phi.support
    if box is None:
        raise SupportError("genfun_from_map needs a support box")
    n = phi.n
    lo, hi = box.bounds(True)
    axes = [np.linspace(a, b, grid + 1) for a, b in zip(lo, hi)]
    base = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    x, eta = base[..., :n], base[..., n:]
    y = eta.copy()
    eye = np.eye(n) * 1e-6
    err = np.inf
    for _ in range(budget):
        img = phi(np.concatenate([x, y], -1))
        gap = img[..., n:] - eta
        err = float(np.max(np.abs(gap)))
        if not np.isfinite(err) or err > 1e6:
            raise ConvergenceError("slice solve diverged; map too far from the identity")
        if err < tol:
            break
        # Newton step with a finite-difference Jacobian of y -> p(phi(x, y))
        cols = []
        for j in range(n):
            yp = np.concatenate([x, y + eye[j]], -1)
            ym = np.concatenate([x, y - eye[j]], -1)
            cols.append((phi(yp)[..., n:] - phi(ym)[..., n:]) / 2e-6)
        J = np.stack(cols, -1)
        step = np.linalg.solve(J, gap[..., None])[..., 0]
        y = y - np.clip(step, -0.5, 0.5)
    else:
        raise ConvergenceError(f"slice solve stalled at {err:.3g}")
    img = phi(np.concatenate([x, y], -1))
    s = np.concatenate([y - eta, img[..., :n] - x], -1)
    spacing = [a[1] - a[0] for a in axes]
    values, residual = anchored_potentials(s, spacing)
    S = GridGenFun(axes, values, box, slopes=s, interpolation=interpolation,
                   name=f"S[{phi.label}]")
    return S, residual


# ------------------------------------------------------------------ probes

def continuity_probe(S_ref: GeneratingFunction, family, samples: int = 400,
                     seed: int = 0) -> list[tuple[float, float]]:
    """(C1 distance to S_ref, C0 distance of Psi maps) for each member of ``family``."""
    box = S_ref.phase_support()
    pts = quasi_random_points(box, samples, seed)
    ref = psi_apply(S_ref, pts)
    out = []
    for S in family:
        d1 = c1_distance(S, S_ref)
        d0 = float(np.max(np.linalg.norm(psi_apply(S, pts) - ref, axis=-1)))
        out.append((d1, d0))
    return out
