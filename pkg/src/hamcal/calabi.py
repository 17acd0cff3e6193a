"""Calabi invariant: the space-time integral, Liouville scaling, the
commutator formula, the extended invariant and its C0 counterexample."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .geom import LiouvilleFlow, SupportBox, integrate_values, quadrature_grid
from .hamflow import (
    HamiltonianField,
    MapRep,
    RecoveredSlice,
    c0_distance,
    commutator_isotopy,
    compose_hamiltonian,
    identity_map,
    inverse_hamiltonian,
    iterate_hamiltonian,
    recover_slice,
)
from .errors import SupportError


@dataclass
class CalabiResult:
    value: float
    method: str
    error_estimate: float = 0.0
    meta: dict = field(default_factory=dict)

    def __float__(self):
        return self.value


def _simpson_nodes(t0: float, t1: float, count: int):
    count = max(3, count | 1)
    ts = np.linspace(t0, t1, count)
    w = np.full(count, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return ts, w * (t1 - t0) / (3 * (count - 1))


def _space_integral(H: HamiltonianField, t: float, resolution: int, rule: str,
                    check_boundary: bool) -> float:
    grid = quadrature_grid(H.support, resolution, rule)
    vals = H(t, grid.points())
    if check_boundary:
        edge = 0.0
        for ax in range(vals.ndim):
            for idx in (0, -1):
                edge = max(edge, float(np.max(np.abs(np.take(vals, idx, axis=ax)))))
        if edge > 1e-8 * max(1.0, float(np.max(np.abs(vals)))):
            raise SupportError(f"{H.name!r} does not vanish on its support box boundary")
    return integrate_values(vals, grid)


def _eq1_value(H: HamiltonianField, resolution: int, rule: str, t_nodes: int,
               check_boundary: bool) -> float:
    t0, t1 = H.time_interval
    if H.autonomous:
        return (t1 - t0) * _space_integral(H, t0, resolution, rule, check_boundary)
    ts, w = _simpson_nodes(t0, t1, t_nodes)
    return float(sum(wk * _space_integral(H, float(t), resolution, rule, check_boundary)
                     for t, wk in zip(ts, w)))


def calabi_eq1(H: HamiltonianField, resolution: int = 128, rule: str = "simpson",
               t_nodes: int = 9, check_boundary: bool = True) -> CalabiResult:
    """Integral of H over [t0, t1] x R^{2n}; tensor rule in space, Simpson in time.

    ``error_estimate`` is the change from half the resolution.
    """
    fine = _eq1_value(H, resolution, rule, t_nodes, check_boundary)
    coarse = _eq1_value(H, max(8, resolution // 2), rule, t_nodes, check_boundary)
    return CalabiResult(fine, "eq1-quadrature", abs(fine - coarse),
                        {"resolution": resolution, "rule": rule, "t_nodes": t_nodes})


def homomorphism_check(F: HamiltonianField, G: HamiltonianField, resolution: int = 128,
                       t_nodes: int = 9, rule: str = "simpson") -> dict:
    cf = calabi_eq1(F, resolution, rule, t_nodes)
    cg = calabi_eq1(G, resolution, rule, t_nodes)
    cfg = calabi_eq1(compose_hamiltonian(F, G), resolution, rule, t_nodes)
    cinv = calabi_eq1(inverse_hamiltonian(F), resolution, rule, t_nodes)
    scale = max(abs(cf.value), abs(cg.value), 1e-300)
    comp = abs(cfg.value - cf.value - cg.value)
    inv = abs(cinv.value + cf.value)
    return {
        "cal_F": cf.value, "cal_G": cg.value, "cal_FG": cfg.value, "cal_invF": cinv.value,
        "composition_defect": comp, "composition_rel": comp / scale,
        "inverse_defect": inv, "inverse_rel": inv / max(abs(cf.value), 1e-300),
        "error_estimate": max(cf.error_estimate, cg.error_estimate, cfg.error_estimate),
    }


def liouville_conjugated_hamiltonian(H: HamiltonianField, delta: float,
                                     lflow: LiouvilleFlow | None = None) -> HamiltonianField:
    """e^delta H(t, mu_delta^{-1} x): generator of mu_delta o phi_H^t o mu_delta^{-1}."""
    lflow = lflow or LiouvilleFlow((0.0,) * (2 * H.n))
    scale = math.exp(delta)

    def func(t, x):
        return scale * H(t, lflow.apply(-delta, x))

    return HamiltonianField(func, H.n, H.support.liouville_image(lflow, delta),
                            H.time_interval, H.autonomous, f"conj_{delta}({H.name})")


def commutator_calabi(H: HamiltonianField, delta: float, lflow: LiouvilleFlow | None = None,
                      resolution: int = 128, t_nodes: int = 9, base: float | None = None,
                      rule: str = "simpson") -> dict:
    """Cal([mu_delta, phi_H^1]) directly and through the scaling law."""
    d = H.n
    if base is None:
        base = calabi_eq1(H, resolution, rule, t_nodes).value
    law = (math.exp((d + 1) * delta) - 1.0) * base
    if delta == 0:
        return {"delta": 0.0, "cal_direct": 0.0, "cal_law": 0.0, "gap": 0.0, "rel_gap": 0.0}
    K = compose_hamiltonian(liouville_conjugated_hamiltonian(H, delta, lflow),
                            inverse_hamiltonian(H))
    direct = calabi_eq1(K, resolution, rule, t_nodes)
    gap = abs(direct.value - law)
    return {"delta": delta, "cal_direct": direct.value, "cal_law": law, "gap": gap,
            "rel_gap": gap / max(abs(law), 1e-300), "error_estimate": direct.error_estimate}


def extended_calabi(slice_: RecoveredSlice | tuple, n: int) -> CalabiResult:
    """(1/(n+1)) * integral of the t = 0 slice of the commutator generator."""
    if isinstance(slice_, RecoveredSlice):
        axes, values = slice_.axes, slice_.values
    else:
        axes, values = slice_
    N = len(axes[0]) - 1
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])
    grid = quadrature_grid((lo, hi), N, "simpson" if N % 2 == 0 else "trapezoid")
    if grid.shape != values.shape:
        grid = quadrature_grid((lo, hi), N, "trapezoid")
    return CalabiResult(integrate_values(values, grid) / (n + 1), "extended",
                        meta={"grid": N})


def extended_calabi_of_map(phi: MapRep, lflow: LiouvilleFlow | None = None,
                           grid: int = 64, h_t: float = 1e-3,
                           box: SupportBox | None = None) -> CalabiResult:
    """Extended Calabi from the recovered t = 0 generator of [mu_t, phi].

    ``box`` supplies a support for maps that do not declare one.
    """
    if phi.support is None:
        if box is None:
            raise SupportError(f"{phi.label or 'map'} has no declared support; pass a box")
        phi = replace(phi, support=box)
    trace = commutator_isotopy(phi, 0.0, lflow, steps=1)
    fine_slice = recover_slice(trace, 0.0, grid, h_t)
    coarse_slice = recover_slice(trace, 0.0, grid // 2, h_t)
    fine = extended_calabi(fine_slice, phi.n)
    coarse = extended_calabi(coarse_slice, phi.n)
    fine.error_estimate = abs(fine.value - coarse.value)
    fine.meta.update(closedness=fine_slice.closedness, endpoint_defect=fine_slice.endpoint_defect)
    return fine


def _window_mean(phi, lflow, delta, grid, t_nodes, h_t):
    d = phi.n
    trace = commutator_isotopy(phi, delta, lflow, steps=1)
    ts, w = _simpson_nodes(0.0, delta, t_nodes)
    total = 0.0
    worst = 0.0
    for t, wk in zip(ts, w):
        sl = recover_slice(trace, float(t), grid, h_t)
        worst = max(worst, sl.closedness)
        total += wk * extended_calabi(sl, d).value * (d + 1)
    return total / (math.exp((d + 1) * delta) - 1.0), worst


def richardson(values, ratio: float = 2.0, orders=(2, 4)) -> float:
    """Richardson table for values at step sizes h, h/ratio, h/ratio^2, ..."""
    col = list(values)
    for p in orders[: len(col) - 1]:
        f = ratio ** p
        col = [(f * col[i + 1] - col[i]) / (f - 1) for i in range(len(col) - 1)]
    return float(col[-1])


def extended_calabi_limit(phi: MapRep, lflow: LiouvilleFlow | None = None,
                          deltas=(0.2, 0.1, 0.05), grid: int = 64, t_nodes: int = 5,
                          h_t: float = 1e-3, serial: bool = True) -> dict:
    """Windowed means over [0, delta] of the commutator generator, extrapolated to delta -> 0.

    For each delta the mean (1/(e^{(d+1)delta} - 1)) int_0^delta int H dvol dt
    is formed from recovered slices; the sequence is Richardson-extrapolated.
    """
    def one(dl):
        return _window_mean(phi, lflow, dl, grid, t_nodes, h_t)

    if serial:
        results = [one(dl) for dl in deltas]
    else:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(one, deltas))
    means = [r[0] for r in results]
    slice_value = extended_calabi_of_map(phi, lflow, grid, h_t)
    return {
        "deltas": list(deltas),
        "window_means": means,
        "extrapolated": richardson(means),
        "slice_value": slice_value.value,
        "slice_error_estimate": slice_value.error_estimate,
        "closedness": max(r[1] for r in results),
    }


def homothety_conjugate(phi: MapRep, k: float) -> MapRep:
    """x -> phi(k x) / k, i.e. h_k^{-1} o phi o h_k for the homothety h_k."""
    support = None
    if phi.support is not None:
        c = np.asarray(phi.support.center) / k
        support = SupportBox(tuple(c), phi.support.radius / k, phi.support.padding)
    gen = None
    if phi.generator is not None:
        gen = liouville_conjugated_hamiltonian(phi.generator, -2.0 * math.log(k))
    return MapRep("composition", lambda x: phi(k * x) / k, lambda x: phi.inverse(k * x) / k,
                  phi.n, support, gen, f"h_{k}^-1 o {phi.label} o h_{k}")


def counterexample_sequence(phi: MapRep, k: int, budget: int = 10_000) -> MapRep:
    """h_k^{-1} o phi^(k^4) o h_k.

    Conjugating by the homothety divides the invariant by k^4 in dimension
    two, so k^4 iterates keep it fixed while the displacement shrinks like 1/k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return phi
    m = k ** 4
    if phi.kind == "flow" and phi.extra.get("H") is not None and phi.extra["H"].autonomous:
        H = phi.extra["H"]
        # iterates of an autonomous time-one map are longer flows
        from .hamflow import flow_map
        it = flow_map(H, t1=float(m) * (phi.extra["t1"] - phi.extra["t0"]))
        it.generator = iterate_hamiltonian(H, m)
        if m > budget:
            raise ValueError(f"iterate count {m} exceeds budget {budget}")
    else:
        it = phi.power(m, budget)
    return homothety_conjugate(it, float(k))


def counterexample_report(phi: MapRep, ks=(1, 2, 3), resolution: int = 128,
                          samples: int = 1024, seed: int = 0) -> dict:
    cal, dist = [], []
    for k in ks:
        pk = counterexample_sequence(phi, k)
        cal.append(calabi_eq1(pk.generator, resolution).value)
        dist.append(c0_distance(pk, identity_map(phi.n), phi.support, samples, seed))
    return {"k": list(ks), "cal": cal, "c0_to_id": dist}


def alternate_liouville_invariance(phi: MapRep, center, grid: int = 64,
                                   h_t: float = 1e-3) -> dict:
    """Extended Calabi with the Liouville flow about 0 and about ``center``."""
    n = phi.n
    base = extended_calabi_of_map(phi, LiouvilleFlow((0.0,) * (2 * n)), grid, h_t)
    alt = extended_calabi_of_map(phi, LiouvilleFlow.about(center), grid, h_t)
    gap = abs(base.value - alt.value)
    return {"center": list(np.ravel(center)), "cal_center0": base.value, "cal_alt": alt.value,
            "gap": gap, "rel_gap": gap / max(abs(base.value), 1e-300)}


__all__ = [
    "CalabiResult", "calabi_eq1", "homomorphism_check", "liouville_conjugated_hamiltonian",
    "commutator_calabi", "extended_calabi", "extended_calabi_of_map", "extended_calabi_limit",
    "richardson", "counterexample_sequence", "counterexample_report", "homothety_conjugate",
    "alternate_liouville_invariance",
]
