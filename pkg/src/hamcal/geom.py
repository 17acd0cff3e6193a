"""Phase-space geometry on R^{2n} with omega = sum dq_i ^ dp_i.

Points are arrays whose last axis has length 2n, ordered (q1..qn, p1..pn).
The volume form is the top power of omega taken literally, i.e. the
Lebesgue measure dq1 dp1 ... dqn dpn (no 1/n! factor).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.stats import qmc

from .errors import SupportError

DEFAULT_PADDING = 0.1


def half_dim(x) -> int:
    m = np.shape(x)[-1]
    if m % 2 or m == 0:
        raise ValueError(f"phase-space vectors need even positive length, got {m}")
    return m // 2


def omega_matrix(n: int) -> np.ndarray:
    """Matrix of omega: omega(u, v) = u @ J @ v."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def omega(u, v, n: int | None = None) -> float | np.ndarray:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1]:
        raise ValueError("dimension mismatch between tangent vectors")
    k = half_dim(u)
    if n is not None and n != k:
        raise ValueError(f"expected vectors of length {2 * n}, got {2 * k}")
    out = np.sum(u[..., :k] * v[..., k:] - u[..., k:] * v[..., :k], axis=-1)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LiouvilleFlow:
    """mu_t(x) = center + e^{t/2} (x - center); mu_t^* omega = e^t omega."""

    center: tuple = (0.0, 0.0)

    @classmethod
    def about(cls, center) -> "LiouvilleFlow":
        return cls(tuple(float(c) for c in np.ravel(center)))

    @property
    def n(self) -> int:
        return len(self.center) // 2

    def apply(self, t: float, x) -> np.ndarray:
        c = np.asarray(self.center)
        return c + np.exp(0.5 * t) * (np.asarray(x, dtype=float) - c)

    def __call__(self, t, x):
        return self.apply(t, x)


def liouville_apply(f: LiouvilleFlow, t: float, x) -> np.ndarray:
    return f.apply(t, x)


@dataclass(frozen=True)
class SupportBox:
    """Sup-norm ball ``|x - center|_inf <= radius`` plus relative padding."""

    center: tuple
    radius: float
    padding: float = DEFAULT_PADDING

    @classmethod
    def centered(cls, n: int, radius: float, padding: float = DEFAULT_PADDING):
        return cls((0.0,) * (2 * n), float(radius), padding)

    @property
    def n(self) -> int:
        return len(self.center) // 2

    @property
    def padded_radius(self) -> float:
        return self.radius * (1.0 + self.padding)

    def bounds(self, padded: bool = True) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        r = self.padded_radius if padded else self.radius
        return c - r, c + r

    def contains(self, x, padded: bool = True) -> np.ndarray:
        c = np.asarray(self.center)
        r = self.padded_radius if padded else self.radius
        return np.max(np.abs(np.asarray(x) - c), axis=-1) <= r

    def union(self, other: "SupportBox") -> "SupportBox":
        lo1, hi1 = self.bounds(False)
        lo2, hi2 = other.bounds(False)
        lo, hi = np.minimum(lo1, lo2), np.maximum(hi1, hi2)
        c = 0.5 * (lo + hi)
        return SupportBox(tuple(c), float(np.max(0.5 * (hi - lo))), max(self.padding, other.padding))

    def liouville_image(self, flow: LiouvilleFlow, t: float) -> "SupportBox":
        """Box containing mu_t of this box."""
        c = flow.apply(t, np.asarray(self.center))
        return SupportBox(tuple(c), self.radius * np.exp(0.5 * t), self.padding)

    def covers(self, other: "SupportBox") -> bool:
        lo1, hi1 = self.bounds(True)
        lo2, hi2 = other.bounds(False)
        return bool(np.all(lo1 <= lo2 + 1e-12) and np.all(hi2 <= hi1 + 1e-12))

    def boundary_samples(self, per_face: int = 64, seed: int = 0) -> np.ndarray:
        """Points on the faces of the padded box."""
        rng = np.random.default_rng(seed)
        lo, hi = self.bounds(True)
        m = len(lo)
        pts = []
        for axis in range(m):
            for side in (lo[axis], hi[axis]):
                p = rng.uniform(lo, hi, size=(per_face, m))
                p[:, axis] = side
                pts.append(p)
        return np.concatenate(pts)


def require_inside(box: SupportBox, working: SupportBox | None, what: str = "support"):
    if working is not None and not working.covers(box):
        raise SupportError(f"{what} radius {box.radius:.4g} escapes the working box")


# --------------------------------------------------------------- quadrature

@dataclass
class Grid:
    """Uniform tensor grid over a box; ``axes[i]`` are the nodes on axis i."""

    axes: list
    weights: list = field(default_factory=list)

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def spacing(self):
        return [a[1] - a[0] for a in self.axes]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)


def _rule_1d(lo: float, hi: float, n: int, rule: str):
    if n < 8:
        raise ValueError("grid resolution must be at least 8 per axis")
    if rule == "midpoint":
        h = (hi - lo) / n
        x = lo + h * (np.arange(n) + 0.5)
        w = np.full(n, h)
    elif rule == "simpson":
        if n % 2:
            n += 1
        x = np.linspace(lo, hi, n + 1)
        h = (hi - lo) / n
        w = np.full(n + 1, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h / 3.0
    elif rule == "trapezoid":
        x = np.linspace(lo, hi, n + 1)
        h = (hi - lo) / n
        w = np.full(n + 1, h)
        w[0] = w[-1] = h / 2
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return x, w


def quadrature_grid(box: SupportBox | tuple, resolution: int, rule: str = "simpson") -> Grid:
    """Tensor grid; ``box`` is a SupportBox (padded bounds) or (lo, hi) arrays."""
    lo, hi = box.bounds(True) if isinstance(box, SupportBox) else box
    axes, weights = [], []
    for a, b in zip(np.atleast_1d(lo), np.atleast_1d(hi)):
        x, w = _rule_1d(float(a), float(b), resolution, rule)
        axes.append(x)
        weights.append(w)
    return Grid(axes, weights)


def integrate_values(values: np.ndarray, grid: Grid) -> float:
    """Contract sampled values against the tensor weights."""
    out = values
    for w in reversed(grid.weights):
        out = out @ w
    return float(out)


def integrate(field, box: SupportBox | tuple, resolution: int = 64, rule: str = "simpson",
              boundary_tol: float | None = 1e-8) -> float:
    """Integrate ``field`` (callable on (..., 2n) points, or sampled array) over ``box``.

    With ``boundary_tol`` set, a field that does not vanish on the box
    boundary raises :class:`SupportError`.
    """
    grid = quadrature_grid(box, resolution, rule)
    vals = field(grid.points()) if callable(field) else np.asarray(field, dtype=float)
    if vals.shape != grid.shape:
        raise ValueError(f"sampled field has shape {vals.shape}, grid is {grid.shape}")
    if boundary_tol is not None:
        edge = max(_max_on_boundary(vals), 0.0)
        scale = max(float(np.max(np.abs(vals))), 1e-300)
        if edge > boundary_tol * max(scale, 1.0):
            raise SupportError(f"field is {edge:.3g} on the box boundary; support box too small")
    return integrate_values(vals, grid)


def _max_on_boundary(vals: np.ndarray) -> float:
    m = 0.0
    for ax in range(vals.ndim):
        for idx in (0, -1):
            m = max(m, float(np.max(np.abs(np.take(vals, idx, axis=ax)))))
    return m


# --------------------------------------------------------------- polar / misc

def polar_to_cartesian(r, theta) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def cartesian_to_polar(x) -> tuple:
    """Inverse of :func:`polar_to_cartesian`; the angle at the origin is 0."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    theta = np.where(r > 0, np.arctan2(x[..., 1], x[..., 0]), 0.0)
    if np.ndim(r) == 0:
        return float(r), float(theta)
    return r, theta


def quasi_random_points(box: SupportBox, count: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in the padded box; deterministic given seed."""
    lo, hi = box.bounds(True)
    sampler = qmc.Halton(d=len(lo), scramble=True, seed=seed)
    return qmc.scale(sampler.random(count), lo, hi)


def fd_jacobian(fmap, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of a map on (..., m) arrays; returns (..., m, m)."""
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    eye = np.eye(m) * h
    shifted = np.concatenate([x[..., None, :] + eye, x[..., None, :] - eye], axis=-2)
    vals = fmap(shifted)
    cols = (vals[..., :m, :] - vals[..., m:, :]) / (2 * h)
    return np.swapaxes(cols, -1, -2)


def symplectic_defect(fmap, x, h: float = 1e-5, factor: float = 1.0) -> float:
    """max |J^T Omega J - factor * Omega| over sample points."""
    J = fd_jacobian(fmap, x, h)
    Om = omega_matrix(half_dim(x))
    lhs = np.swapaxes(J, -1, -2) @ Om @ J
    return float(np.max(np.abs(lhs - factor * Om)))


def loop_residual(form: np.ndarray, spacing) -> float:
    """Largest plaquette loop integral of a sampled 1-form on a tensor grid.

    ``form[..., i]`` is the coefficient of dx_i.  Edges use the trapezoid rule;
    for an exact form the result is at discretisation level.
    """
    m = form.shape[-1]
    worst = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            fi, fj = form[..., i], form[..., j]
            hi, hj = spacing[i], spacing[j]
            # edges along i at j and j+1; along j at i and i+1
            ei = 0.5 * hi * (fi + np.roll(fi, -1, axis=i))
            ej = 0.5 * hj * (fj + np.roll(fj, -1, axis=j))
            loop = ei - np.roll(ei, -1, axis=j) + np.roll(ej, -1, axis=i) - ej
            sl = [slice(None)] * form.ndim
            sl[i] = slice(0, -1)
            sl[j] = slice(0, -1)
            worst = max(worst, float(np.max(np.abs(loop[tuple(sl[:-1])]))))
    return worst


def anchored_potentials(form: np.ndarray, spacing) -> tuple[np.ndarray, float]:
    """Potential of a sampled 1-form vanishing on the lower box faces.

    Integrating ``form[..., i]`` along axis i from the lower face gives one
    candidate potential per axis; for an exact form they agree.  Returns the
    first candidate and the largest disagreement, which equals the largest
    loop integral around rectangles anchored on the boundary.
    """
    m = form.shape[-1]
    pots = [cumulative_simpson(form[..., i], dx=spacing[i], axis=i, initial=0.0) for i in range(m)]
    gap = max((float(np.max(np.abs(pots[i] - pots[j])))
               for i in range(m) for j in range(i + 1, m)), default=0.0)
    return pots[0], gap
