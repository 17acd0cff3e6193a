"""Hamiltonian fields, their flows, and maps built from them.

Everything is vectorised over a leading batch of points: a point array has
shape ``(..., 2n)`` and a field returns shape ``(...)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline, RegularGridInterpolator

from . import conventions
from .errors import ClosednessError, ResolutionError, SupportError
from .exprlang import DomainError, Expression, parse
from .geom import (
    LiouvilleFlow,
    SupportBox,
    anchored_potentials,
    quasi_random_points,
)

H_FD = 1e-4
STEPS_PER_UNIT = 32


def steps_for(t0: float, t1: float, per_unit: int | None = None) -> int:
    per_unit = per_unit or STEPS_PER_UNIT
    return max(1, math.ceil(abs(t1 - t0) * per_unit - 1e-9))


def phase_bindings(x: np.ndarray, n: int, t: float, radius: bool = True) -> dict:
    env = {"t": t}
    for i in range(n):
        env[f"q{i + 1}"] = env[f"x{i + 1}"] = x[..., i]
        env[f"p{i + 1}"] = x[..., n + i]
    if radius:
        env["r"] = np.sqrt(np.sum(x * x, axis=-1))
    return env


class HamiltonianField:
    """Time-dependent scalar field H(t, x) with a declared compact support.

    ``func(t, x)`` receives a scalar time and an ``(m, 2n)`` array of points
    that lie inside the padded support box; outside the box the field is 0.
    """

    def __init__(self, func: Callable, n: int, support: SupportBox,
                 time_interval=(0.0, 1.0), autonomous: bool = False, name: str = ""):
        self.func = func
        self.n = n
        self.support = support
        self.time_interval = tuple(time_interval)
        self.autonomous = autonomous
        self.name = name

    @classmethod
    def from_expression(cls, source: str | Expression, n: int, support: SupportBox | float,
                        time_interval=(0.0, 1.0), name: str = "") -> "HamiltonianField":
        expr = parse(source) if isinstance(source, str) else source
        if not isinstance(support, SupportBox):
            support = SupportBox.centered(n, support)
        allowed = {"t", "r"} | {f"{c}{i + 1}" for c in "qpx" for i in range(n)}
        unknown = expr.free_vars - allowed
        if unknown:
            raise ValueError(f"unknown variable(s) in Hamiltonian: {', '.join(sorted(unknown))}")

        wants_r = "r" in expr.free_vars

        def func(t, x):
            return expr._fn(phase_bindings(x, n, t, wants_r))

        return cls(func, n, support, time_interval, "t" not in expr.free_vars,
                   name or expr.source)

    def __call__(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        return self._eval_flat(float(t), x.reshape(-1, x.shape[-1])).reshape(batch)

    def _eval_flat(self, t: float, flat: np.ndarray) -> np.ndarray:
        c = self.support.center
        r = self.support.padded_radius
        inside = np.abs(flat[:, 0] - c[0]) <= r
        for i in range(1, flat.shape[1]):
            inside &= np.abs(flat[:, i] - c[i]) <= r
        count = int(np.count_nonzero(inside))
        if not count:
            return np.zeros(flat.shape[0])
        if 2 * count >= flat.shape[0]:
            # mostly inside: evaluate everywhere and mask, unless the
            # expression has a domain error somewhere outside the box
            try:
                with np.errstate(all="ignore"):
                    vals = np.broadcast_to(np.asarray(self.func(t, flat), dtype=float),
                                           (flat.shape[0],))
                vals = np.where(inside, vals, 0.0)
                if not np.all(np.isfinite(vals)):
                    raise DomainError(f"non-finite value in field {self.name!r}")
                return vals
            except DomainError:
                if count == flat.shape[0]:
                    raise
        out = np.zeros(flat.shape[0])
        sub = np.asfortranarray(flat[inside])
        with np.errstate(all="ignore"):
            vals = self.func(t, sub)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (count,))
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"non-finite value in field {self.name!r}")
        out[inside] = vals
        return out

    def gradient(self, t: float, x, h: float = H_FD) -> np.ndarray:
        """Central-difference gradient, all shifted points in one call."""
        x = np.asarray(x, dtype=float)
        batch, m = x.shape[:-1], x.shape[-1]
        X = x.reshape(-1, m)
        k = X.shape[0]
        # component-major layout: A[component, shift, point]
        A = np.empty((m, 2 * m, k))
        A[:] = X.T[:, None, :]
        for i in range(m):
            A[i, i] += h
            A[i, m + i] -= h
        vals = self._eval_flat(float(t), A.reshape(m, -1).T).reshape(2 * m, k)
        g = (vals[:m] - vals[m:]) / (2 * h)
        return g.T.reshape(batch + (m,))

    def scaled(self, a: float) -> "HamiltonianField":
        f = self.func
        return HamiltonianField(lambda t, x: a * f(t, x), self.n, self.support,
                                self.time_interval, self.autonomous, f"{a}*({self.name})")

    def with_support(self, support: SupportBox) -> "HamiltonianField":
        return HamiltonianField(self.func, self.n, support, self.time_interval,
                                self.autonomous, self.name)

    def check_support(self, t_samples=(0.0, 0.5, 1.0), tol: float = 1e-10) -> float:
        """Largest |H| and |grad H| on the padded box faces; raises above ``tol``."""
        pts = self.support.boundary_samples()
        worst = 0.0
        for t in t_samples:
            worst = max(worst, float(np.max(np.abs(self(t, pts)))),
                        float(np.max(np.abs(self.gradient(t, pts)))))
        if worst > tol:
            raise SupportError(f"field {self.name!r} is {worst:.3g} on its support boundary")
        return worst

    def __repr__(self):
        return f"HamiltonianField({self.name!r}, n={self.n})"


def zero_field(n: int, radius: float = 1.0) -> HamiltonianField:
    return HamiltonianField(lambda t, x: np.zeros(x.shape[0]), n,
                            SupportBox.centered(n, radius), autonomous=True, name="0")


# ------------------------------------------------------------------ flows

def vector_field(H: HamiltonianField, t: float, x, h_fd: float = H_FD) -> np.ndarray:
    g = H.gradient(t, x, h_fd)
    n = H.n
    s = conventions.HAMILTONIAN_SIGN
    return s * np.concatenate([g[..., n:], -g[..., :n]], axis=-1)


def _rk4(H: HamiltonianField, t0: float, t1: float, x: np.ndarray, steps: int) -> np.ndarray:
    dt = (t1 - t0) / steps
    y = np.array(x, dtype=float, copy=True)
    t = t0
    for _ in range(steps):
        k1 = vector_field(H, t, y)
        k2 = vector_field(H, t + dt / 2, y + dt / 2 * k1)
        k3 = vector_field(H, t + dt / 2, y + dt / 2 * k2)
        k4 = vector_field(H, t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (_ + 1) * dt
    return y


def flow(H: HamiltonianField, t0: float, t1: float, x, steps: int | None = None,
         check: bool = False, tol: float = 1e-8) -> np.ndarray:
    """Fixed-step classical RK4 from t0 to t1 (t1 < t0 integrates backwards).

    With ``check`` the run is repeated at twice the step count and a
    :class:`ResolutionError` is raised when the two disagree beyond ``tol``.
    """
    x = np.asarray(x, dtype=float)
    if t1 == t0:
        return x.copy()
    steps = steps or steps_for(t0, t1)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    y = _rk4(H, t0, t1, x, steps)
    if check:
        y2 = _rk4(H, t0, t1, x, 2 * steps)
        gap = float(np.max(np.abs(y2 - y))) if y.size else 0.0
        if gap > tol:
            raise ResolutionError(f"step halving changed the flow by {gap:.3g} > {tol:.3g}")
    return y


# ------------------------------------------------------------------ maps

@dataclass
class MapRep:
    """A phase-space map with its inverse.

    ``kind`` is one of closed-form, flow, genfun, composition, liouville.
    ``generator`` is set when a Hamiltonian on [0, 1] generating the map is known.
    """

    kind: str
    forward: Callable
    backward: Callable
    n: int
    support: SupportBox | None = None
    generator: HamiltonianField | None = None
    label: str = ""
    parts: tuple = ()
    extra: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.forward(np.asarray(x, dtype=float))

    def apply(self, x):
        return self.forward(np.asarray(x, dtype=float))

    def inverse(self, x):
        return self.backward(np.asarray(x, dtype=float))

    @property
    def inv(self) -> "MapRep":
        return MapRep(self.kind, self.backward, self.forward, self.n, self.support,
                      None, f"inv({self.label})", extra=dict(self.extra, inverted=True))

    def power(self, m: int, budget: int = 10_000) -> "MapRep":
        if m < 0:
            return self.inv.power(-m, budget)
        if m > budget:
            raise ResolutionError(f"iterate count {m} exceeds budget {budget}")
        fwd, bwd = self.forward, self.backward

        def f(x):
            for _ in range(m):
                x = fwd(x)
            return x

        def b(x):
            for _ in range(m):
                x = bwd(x)
            return x

        gen = iterate_hamiltonian(self.generator, m) if self.generator is not None else None
        return MapRep("composition", f, b, self.n, self.support, gen, f"{self.label}^{m}")


def identity_map(n: int) -> MapRep:
    return MapRep("closed-form", lambda x: np.array(x, copy=True),
                  lambda x: np.array(x, copy=True), n, None, label="id")


def closed_form(forward, backward, n: int, support: SupportBox | None = None,
                label: str = "") -> MapRep:
    return MapRep("closed-form", forward, backward, n, support, label=label)


def flow_map(H: HamiltonianField, t1: float = 1.0, t0: float = 0.0,
             steps: int | None = None) -> MapRep:
    steps = steps or steps_for(t0, t1)
    gen = H if (t0, t1) == (0.0, 1.0) else None
    return MapRep("flow", lambda x: flow(H, t0, t1, x, steps),
                  lambda x: flow(H, t1, t0, x, steps), H.n, H.support, gen,
                  f"flow[{H.name}]({t0}->{t1})", extra={"H": H, "t0": t0, "t1": t1})


def liouville_map(lflow: LiouvilleFlow, t: float) -> MapRep:
    return MapRep("liouville", lambda x: lflow.apply(t, x), lambda x: lflow.apply(-t, x),
                  lflow.n, None, label=f"mu_{t}", extra={"flow": lflow, "t": t})


def compose_maps(*maps: MapRep) -> MapRep:
    """compose_maps(f, g, h)(x) = f(g(h(x)))."""
    seq = list(maps)

    def f(x):
        for m in reversed(seq):
            x = m.forward(x)
        return x

    def b(x):
        for m in seq:
            x = m.backward(x)
        return x

    boxes = [m.support for m in seq if m.support is not None]
    box = None
    for bx in boxes:
        box = bx if box is None else box.union(bx)
    return MapRep("composition", f, b, seq[0].n, box,
                  label=" o ".join(m.label for m in seq), parts=tuple(seq))


def commutator_map(lflow: LiouvilleFlow, t: float, phi: MapRep) -> MapRep:
    """[mu_t, phi] = mu_t o phi o mu_t^{-1} o phi^{-1}."""
    m = compose_maps(liouville_map(lflow, t), phi, liouville_map(lflow, -t), phi.inv)
    if phi.support is not None:
        m.support = phi.support.union(phi.support.liouville_image(lflow, t))
    m.label = f"[mu_{t}, {phi.label}]"
    return m


# ---------------------------------------------------------------- isotopies

@dataclass
class IsotopyTrace:
    """Time-sampled family of maps on [0, delta] sharing one support box.

    ``map_at`` gives the map at any time in the interval; ``velocity`` may be
    supplied when the family admits a cheaper derivative than the generic
    central difference.
    """

    times: np.ndarray
    map_at: Callable[[float], MapRep]
    support: SupportBox
    n: int
    velocity_fn: Callable | None = None
    label: str = ""

    @property
    def delta(self) -> float:
        return float(self.times[-1])

    @property
    def maps(self) -> list:
        return [self.map_at(float(t)) for t in self.times]

    def velocity(self, t: float, x, h: float = 1e-3) -> np.ndarray:
        """d/ds phi^s((phi^t)^{-1} x) at s = t."""
        if self.velocity_fn is not None:
            return self.velocity_fn(t, x, h)
        x = np.asarray(x, dtype=float)
        y = self.map_at(t).inverse(x)
        if t - h < self.times[0] - 1e-15:
            f1 = self.map_at(t + h)(y)
            f2 = self.map_at(t + 2 * h)(y)
            return (-3 * x + 4 * f1 - f2) / (2 * h)
        return (self.map_at(t + h)(y) - self.map_at(t - h)(y)) / (2 * h)


def trace_from_family(map_at: Callable[[float], MapRep], delta: float, support: SupportBox,
                      n: int, samples: int = 8, label: str = "") -> IsotopyTrace:
    return IsotopyTrace(np.linspace(0.0, delta, samples + 1), map_at, support, n, label=label)


def commutator_isotopy(phi: MapRep, delta: float, lflow: LiouvilleFlow | None = None,
                       steps: int = 8, working_box: SupportBox | None = None) -> IsotopyTrace:
    """Trace of t -> [mu_t, phi] on [0, delta]."""
    lflow = lflow or LiouvilleFlow((0.0,) * (2 * phi.n))
    if phi.support is None:
        raise SupportError("commutator isotopy needs a map with a declared support")
    box = phi.support.union(phi.support.liouville_image(lflow, delta))
    if working_box is not None and not working_box.covers(box):
        raise SupportError(f"mu_delta moves the support of {phi.label} out of the working box")

    def velocity(t, x, h):
        # [mu_s, phi](z') with z' = phi^{-1}([mu_t,phi]^{-1} x) = mu_t phi^{-1} mu_{-t} x
        x = np.asarray(x, dtype=float)
        z = lflow.apply(t, phi.inverse(lflow.apply(-t, x)))
        if t - h < 0:
            ss = (t, t + h, t + 2 * h)
            coef = (-3.0, 4.0, -1.0)
        else:
            ss = (t + h, t - h)
            coef = (1.0, -1.0)
        stacked = np.stack([lflow.apply(-s, z) for s in ss])
        images = phi(stacked)
        out = sum(c * lflow.apply(s, img) for c, s, img in zip(coef, ss, images))
        return out / (2 * h)

    return IsotopyTrace(np.linspace(0.0, delta, steps + 1),
                        lambda t: commutator_map(lflow, t, phi), box, phi.n,
                        velocity, f"[mu_t, {phi.label}]")


def c0_distance(f: MapRep | Callable, g: MapRep | Callable, box: SupportBox,
                samples: int = 1024, seed: int = 0, extra_points=None) -> float:
    """Sup of |f(x) - g(x)| over seeded quasi-random points of the padded box."""
    pts = quasi_random_points(box, samples, seed)
    if extra_points is not None:
        pts = np.concatenate([pts, np.asarray(extra_points, dtype=float)])
    d = np.linalg.norm(np.asarray(f(pts)) - np.asarray(g(pts)), axis=-1)
    return float(np.max(d))


# ------------------------------------------------------- Hamiltonian algebra

def inverse_hamiltonian(F: HamiltonianField, literal: bool | None = None) -> HamiltonianField:
    """Generator of (phi_F^t)^{-1}."""
    if literal is None:
        literal = conventions.INVERSE_VARIANT == "literal"

    def func(t, x):
        y = flow(F, t, 0.0, x) if literal else flow(F, 0.0, t, x)
        return -F(t, y)

    return HamiltonianField(func, F.n, F.support, F.time_interval, False, f"inv({F.name})")


def compose_hamiltonian(F: HamiltonianField, G: HamiltonianField,
                        literal: bool | None = None) -> HamiltonianField:
    """Generator of phi_F^t o phi_G^t."""
    if literal is None:
        literal = conventions.COMPOSE_VARIANT == "literal"

    def func(t, x):
        y = flow(F, 0.0, t, x) if literal else flow(F, t, 0.0, x)
        return F(t, x) + G(t, y)

    box = F.support.union(G.support)
    return HamiltonianField(func, F.n, box, F.time_interval, False, f"({F.name})#({G.name})")


def conjugate_hamiltonian(F: HamiltonianField, f: MapRep,
                          support: SupportBox | None = None) -> HamiltonianField:
    """Generator of f^{-1} o phi_F^t o f for symplectic f."""
    return HamiltonianField(lambda t, x: F(t, f(x)), F.n, support or F.support,
                            F.time_interval, F.autonomous, f"({F.name})o{f.label}")


def iterate_hamiltonian(H: HamiltonianField, m: int) -> HamiltonianField:
    """Generator on [0, 1] of the m-th iterate of the time-one map of H."""
    if m == 1:
        return H
    if H.autonomous:
        out = H.scaled(float(m))
        out.name = f"{m}*({H.name})"
        return out

    def func(t, x):
        s = m * t
        s = s - math.floor(s) if s < m else 1.0
        return m * H.func(s, x)

    return HamiltonianField(func, H.n, H.support, H.time_interval, False, f"iter{m}({H.name})")


def flow_match_residual(H: HamiltonianField, target: Callable[[float], MapRep | Callable],
                        times, box: SupportBox, samples: int = 256, seed: int = 0,
                        t0: float = 0.0) -> float:
    """max over times of the C0 gap between the flow of H from t0 and target(t)."""
    pts = quasi_random_points(box, samples, seed)
    worst = 0.0
    prev_t, y = t0, pts
    for t in times:
        y = flow(H, prev_t, t, y)
        prev_t = t
        ref = target(t)(pts)
        worst = max(worst, float(np.max(np.linalg.norm(y - ref, axis=-1))))
    return worst


# --------------------------------------------------------------- recovery

@dataclass
class RecoveredSlice:
    axes: list
    values: np.ndarray
    closedness: float
    endpoint_defect: float


def _node_axes(box: SupportBox, grid: int) -> list:
    lo, hi = box.bounds(True)
    return [np.linspace(a, b, grid + 1) for a, b in zip(lo, hi)]


def recover_slice(trace: IsotopyTrace, t: float, grid: int = 64, h_t: float = 1e-3,
                  box: SupportBox | None = None) -> RecoveredSlice:
    """Generator at time ``t`` of an isotopy, by line integration of iota_V omega."""
    box = box or trace.support
    n = trace.n
    axes = _node_axes(box, grid)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    V = trace.velocity(t, pts, h_t)
    s = conventions.RECOVERY_SIGN
    # iota_V omega = sum V_q dp - V_p dq
    form = s * np.concatenate([-V[..., n:], V[..., :n]], axis=-1)
    spacing = [a[1] - a[0] for a in axes]
    H, residual = anchored_potentials(form, spacing)
    endpoint = float(np.max(np.abs(H[-1])))
    return RecoveredSlice(axes, H, residual, endpoint)


class GridHamiltonian(HamiltonianField):
    """Field interpolated from slices on a node grid (cubic in space and time)."""

    def __init__(self, axes: list, times: Sequence[float], slices: Sequence[np.ndarray],
                 support: SupportBox, name: str = "recovered"):
        self.axes = axes
        self.times = np.asarray(times, dtype=float)
        self.slices = [np.asarray(v) for v in slices]
        m = len(axes)
        if m == 2:
            self._interp = [RectBivariateSpline(axes[0], axes[1], v, kx=3, ky=3)
                            for v in self.slices]
        else:
            self._interp = [RegularGridInterpolator(axes, v, method="cubic",
                                                    bounds_error=False, fill_value=0.0)
                            for v in self.slices]
        super().__init__(self._eval, m // 2, support,
                         (float(self.times[0]), float(self.times[-1])),
                         len(self.slices) == 1, name)

    def _spatial(self, k: int, x: np.ndarray) -> np.ndarray:
        f = self._interp[k]
        if isinstance(f, RectBivariateSpline):
            return f.ev(x[:, 0], x[:, 1])
        return f(x)

    def _eval(self, t: float, x: np.ndarray) -> np.ndarray:
        if len(self.slices) == 1:
            return self._spatial(0, x)
        t = min(max(t, self.times[0]), self.times[-1])
        vals = np.stack([self._spatial(k, x) for k in range(len(self.slices))])
        if len(self.times) < 3:
            return np.array([np.interp(t, self.times, vals[:, j]) for j in range(vals.shape[1])])
        return CubicSpline(self.times, vals, axis=0)(t)

    def slice_values(self, k: int = 0) -> np.ndarray:
        return self.slices[k]


# absolute residual below which the field counts as exactly recovered (rounding level)
CLOSEDNESS_FLOOR = 1e-9


def hamiltonian_from_isotopy(trace: IsotopyTrace, grid: int = 64, h_t: float = 1e-3,
                             tol: float | None = 0.05, times=None,
                             report: dict | None = None) -> GridHamiltonian:
    """Recover the generator of an isotopy on a node grid over its support box.

    The closedness residual (largest anchored loop integral of iota_V omega)
    is compared with ``tol`` relative to the size of the recovered field; it
    converges like grid^-2 for Hamiltonian isotopies and stays O(1) for
    non-Hamiltonian ones.  Details go into ``report``.
    """
    times = trace.times if times is None else np.asarray(times, dtype=float)
    slices, worst, endpoint, axes, scale = [], 0.0, 0.0, None, 0.0
    for t in times:
        sl = recover_slice(trace, float(t), grid, h_t)
        slices.append(sl.values)
        axes = sl.axes
        worst = max(worst, sl.closedness)
        endpoint = max(endpoint, sl.endpoint_defect)
        scale = max(scale, float(np.max(np.abs(sl.values))))
    relative = worst / scale if scale > 0 else 0.0
    if report is not None:
        report.update(closedness=worst, relative_closedness=relative,
                      endpoint_defect=endpoint, grid=grid)
    if tol is not None and worst > CLOSEDNESS_FLOOR and relative > tol:
        raise ClosednessError(f"closedness residual {worst:.3g} is {relative:.3g} of the "
                              f"field size (limit {tol:.3g})")
    return GridHamiltonian(axes, times, slices, trace.support, f"H[{trace.label}]")
