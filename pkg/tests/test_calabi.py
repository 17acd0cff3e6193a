import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamcal import fixtures
from hamcal.calabi import (
    alternate_liouville_invariance,
    calabi_eq1,
    commutator_calabi,
    counterexample_report,
    counterexample_sequence,
    extended_calabi,
    extended_calabi_of_map,
    homomorphism_check,
    homothety_conjugate,
    liouville_conjugated_hamiltonian,
    richardson,
)
from hamcal.errors import SupportError
from hamcal.geom import LiouvilleFlow, SupportBox
from hamcal.hamflow import c0_distance, flow_map, identity_map, zero_field


@pytest.fixture(scope="module")
def h0():
    return fixtures.h0()


def test_zero_field_has_zero_invariant():
    assert calabi_eq1(zero_field(1)).value == 0.0


def test_h0_value(h0):
    r = calabi_eq1(h0, 256)
    assert r.value == pytest.approx(fixtures.H0_CALABI, rel=1e-6)
    assert r.error_estimate < 1e-4


@given(st.floats(-3, 3, allow_nan=False))
def test_linearity(a):
    H = fixtures.h0(a) if a != 0 else zero_field(1)
    assert calabi_eq1(H, 64).value == pytest.approx(a * calabi_eq1(fixtures.h0(), 64).value,
                                                    abs=1e-12)


def test_boundary_check_rejects_leaking_support():
    H = fixtures.field("q1^2+1")
    with pytest.raises(SupportError):
        calabi_eq1(H, 32)


def test_homomorphism_self_pair(h0):
    r = homomorphism_check(h0, h0, 128)
    assert r["cal_FG"] == pytest.approx(math.pi / 2, rel=1e-2)
    assert r["inverse_rel"] < 1e-2


def test_homomorphism_disjoint_pair():
    F, G = (fixtures.field(s) for s in fixtures.HOMOMORPHISM_PAIRS_2D[2])
    r = homomorphism_check(F, G, 128)
    assert r["composition_rel"] < 1e-2
    assert r["cal_FG"] == pytest.approx(r["cal_F"] + r["cal_G"], rel=1e-2)


@pytest.mark.parametrize("delta", [0.0, 0.1, -0.2, 0.3])
def test_liouville_scaling_h0(h0, delta):
    K = liouville_conjugated_hamiltonian(h0, delta)
    assert calabi_eq1(K, 128).value == pytest.approx(math.exp(2 * delta) * math.pi / 4, rel=1e-4)
    assert K.support.radius == pytest.approx(h0.support.radius * math.exp(delta / 2))


def test_liouville_conjugate_generates_conjugated_map(h0):
    lf = LiouvilleFlow((0.0, 0.0))
    delta = 0.1
    K = liouville_conjugated_hamiltonian(h0, delta, lf)
    phi = flow_map(h0, steps=128)
    target = lambda x: lf.apply(delta, phi(lf.apply(-delta, x)))
    assert c0_distance(flow_map(K, steps=128), target, K.support, 64) < 1e-6


def test_commutator_zero_delta(h0):
    assert commutator_calabi(h0, 0.0)["cal_direct"] == 0.0


def test_commutator_law_value(h0):
    r = commutator_calabi(h0, 0.1, resolution=128)
    assert r["cal_law"] == pytest.approx((math.exp(0.2) - 1) * math.pi / 4, rel=1e-3)
    assert r["cal_law"] == pytest.approx(0.17389, abs=1e-5)
    assert r["rel_gap"] < 1e-2


def test_commutator_gap_shrinks_with_resolution(h0):
    gaps = [commutator_calabi(h0, 0.1, resolution=N)["gap"] for N in (16, 64)]
    assert gaps[1] < gaps[0]


def test_richardson_cancels_even_orders():
    hs = [0.4, 0.2, 0.1]
    vals = [1.0 + 3 * h ** 2 - 2 * h ** 4 for h in hs]
    assert richardson(vals) == pytest.approx(1.0, abs=1e-13)


def test_extended_calabi_zero_slice():
    axes = [np.linspace(-1, 1, 17)] * 2
    assert extended_calabi((axes, np.zeros((17, 17))), 1).value == 0.0


def test_extended_calabi_constant_slice():
    axes = [np.linspace(-1, 1, 17)] * 2
    assert extended_calabi((axes, np.ones((17, 17))), 1).value == pytest.approx(2.0)


def test_extended_calabi_needs_support():
    with pytest.raises(SupportError):
        extended_calabi_of_map(identity_map(1))


def test_extended_calabi_of_identity_vanishes():
    r = extended_calabi_of_map(identity_map(1), box=SupportBox((0.0, 0.0), 1.0), grid=32)
    assert abs(r.value) < 1e-12


def test_extended_calabi_of_h0_flow(h0):
    r = extended_calabi_of_map(flow_map(h0), grid=64)
    assert r.value == pytest.approx(math.pi / 4, rel=2e-2)


def test_counterexample_first_member_is_phi(h0):
    phi = flow_map(h0)
    assert counterexample_sequence(phi, 1) is phi
    with pytest.raises(ValueError):
        counterexample_sequence(phi, 0)


def test_counterexample_invariant_constant_distance_decreasing(h0):
    rep = counterexample_report(flow_map(h0), (1, 2, 3), resolution=64, samples=256)
    assert np.ptp(rep["cal"]) < 1e-10
    assert rep["cal"][0] == pytest.approx(math.pi / 4, rel=1e-3)
    d = rep["c0_to_id"]
    assert d[0] > d[1] > d[2]


def test_counterexample_generator_flows_to_member(h0):
    # the member flows H0 for 16 units at the default step density; its own
    # RK4 error (about 6e-5) dominates the comparison
    pk = counterexample_sequence(flow_map(h0), 2)
    assert c0_distance(flow_map(pk.generator, steps=1024), pk, pk.support, 64) < 2e-4


def test_homothety_conjugate_support(h0):
    m = homothety_conjugate(flow_map(h0), 2.0)
    assert m.support.radius == pytest.approx(0.5)
    x = np.array([[0.1, -0.2]])
    assert np.allclose(m.inverse(m(x)), x, atol=1e-8)


def test_alternate_center_at_origin_is_identical(h0):
    r = alternate_liouville_invariance(flow_map(h0), (0.0, 0.0), grid=32)
    assert r["gap"] == 0.0


def test_alternate_center_identity_map():
    phi = identity_map(1)
    phi.support = SupportBox((0.0, 0.0), 1.0)
    r = alternate_liouville_invariance(phi, (0.3, -0.2), grid=32)
    assert abs(r["cal_center0"]) < 1e-12 and abs(r["cal_alt"]) < 1e-12
