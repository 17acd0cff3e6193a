import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamcal import fixtures
from hamcal.calabi import calabi_eq1
from hamcal.errors import AdmissibilityError
from hamcal.geom import SupportBox, cartesian_to_polar, polar_to_cartesian, quasi_random_points
from hamcal.hamflow import identity_map
from hamcal.rotations import (
    AngularProfile,
    FiberedRotation,
    angle_bound_diagnostic,
    commutator_hamiltonian_literal,
    commutator_hamiltonian_radial,
    commutator_hamiltonian_recovered,
    composed_commutator,
    jacobian_determinant_defect,
    rotation_apply,
    rotation_calabi_smooth,
    rotation_commutator_map,
    rotation_extended_calabi,
    rotation_flow_match,
    rotation_hamiltonian,
    singular_profile_study,
    smooth_step,
    theta_variation,
    zero_profile,
)

PROFILES = ["quadratic", "bump", "shifted", "log"]
T_GRID = np.linspace(0.0, 0.1, 5)


def band_profile():
    # equal to 1 on [0.2, 0.8], zero near 0 and beyond 0.9
    return AngularProfile(lambda r: smooth_step(r / 0.1) * smooth_step((1.0 - r) / 0.1), 1.0,
                          name="band")


@pytest.fixture(scope="module")
def recovered_bump():
    report = {}
    H = commutator_hamiltonian_recovered(fixtures.profile("bump"), T_GRID, grid=256,
                                         report=report)
    return H, report


# ------------------------------------------------------------------ maps

def test_profile_vanishes_beyond_R():
    for name in PROFILES:
        assert fixtures.profile(name).check_support() == 0.0


def test_log_profile_finite_away_from_zero():
    r = np.geomspace(1e-12, 1.0, 200)
    assert np.all(np.isfinite(fixtures.profile("log")(r)))


def test_zero_profile_is_identity():
    pts = quasi_random_points(SupportBox.centered(1, 1.0), 64, 0)
    assert np.allclose(rotation_apply(FiberedRotation(zero_profile()), pts), pts, atol=1e-15)


def test_direct_formula_example():
    prof = AngularProfile.from_expression("2*max(0, 1-r)", 1.0)
    out = rotation_apply(FiberedRotation(prof), np.array([0.5, 0.0]))
    assert np.allclose(out, [0.5 * math.cos(1.0), 0.5 * math.sin(1.0)], atol=1e-15)


@given(st.floats(0.01, 2.0), st.floats(-math.pi, math.pi))
def test_radius_preserved(r, th):
    rot = FiberedRotation(fixtures.profile("bump"))
    r2, _ = cartesian_to_polar(rot(polar_to_cartesian(r, th)))
    assert abs(float(r2) - r) < 1e-12


@pytest.mark.parametrize("name", ["quadratic", "bump", "log"])
def test_area_preserving(name):
    rng = np.random.default_rng(1)
    rr = rng.uniform(0.05, 1.2, 100)
    pts = polar_to_cartesian(rr, rng.uniform(0, 2 * np.pi, 100))
    assert jacobian_determinant_defect(FiberedRotation(fixtures.profile(name)), pts) < 1e-6


# ------------------------------------------------------------ commutators

def test_commutator_at_zero_is_identity():
    pts = quasi_random_points(SupportBox.centered(1, 1.2), 64, 0)
    m = rotation_commutator_map(fixtures.profile("bump"), 0.0)
    assert np.allclose(m(pts), pts, atol=1e-15)


@pytest.mark.parametrize("t", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("name", PROFILES)
def test_closed_form_commutator_matches_composition(name, t):
    p = fixtures.profile(name)
    pts = quasi_random_points(SupportBox.centered(1, 1.3), 256, 4)
    a = rotation_commutator_map(p, t)(pts)
    b = composed_commutator(p, t)(pts)
    assert np.max(np.abs(a - b)) < 1e-10


def test_commutator_identity_on_constant_band():
    rng = np.random.default_rng(2)
    pts = polar_to_cartesian(rng.uniform(0.25, 0.75, 200), rng.uniform(0, 2 * np.pi, 200))
    assert np.allclose(rotation_commutator_map(band_profile(), 0.1)(pts), pts, atol=1e-14)


# ---------------------------------------------------------- Hamiltonians

def test_literal_zero_profile():
    assert commutator_hamiltonian_literal(zero_profile(), 0.1, 0.5) == 0.0


def test_literal_log_profile_finite_and_converging():
    r = np.array([1e-6, 1e-3, 0.2, 0.6])
    vals = commutator_hamiltonian_literal(fixtures.profile("log"), 0.1, r)
    assert np.all(np.isfinite(vals))
    near = commutator_hamiltonian_literal(fixtures.profile("log"), 0.1, np.geomspace(1e-3, 1e-9, 4))
    assert np.all(np.diff(np.abs(near)) < 0)


def test_literal_rejects_nonintegrable():
    prof = AngularProfile.from_expression("1/r^2", 1.0, integrable_near_zero=False, bounded=False)
    with pytest.raises(AdmissibilityError):
        commutator_hamiltonian_literal(prof, 0.1, 0.5)


def test_recovered_zero_profile():
    H = commutator_hamiltonian_recovered(zero_profile(), [0.0, 0.05], grid=32)
    pts = quasi_random_points(H.support, 50, 0)
    assert np.max(np.abs(H(0.0, pts))) < 1e-10


def test_recovered_theta_independent(recovered_bump):
    H, _ = recovered_bump
    assert theta_variation(H, 0.05, np.linspace(0.1, 1.0, 10)) < 1e-6


def test_recovered_flow_match(recovered_bump):
    H, _ = recovered_bump
    assert rotation_flow_match(fixtures.profile("bump"), H, T_GRID, samples=128) < 1e-4


def test_radial_formula_matches_recovery_literal_does_not(recovered_bump):
    H, _ = recovered_bump
    p = fixtures.profile("bump")
    r = np.linspace(0.05, 0.95, 10)
    rec = H(0.05, np.stack([r, np.zeros_like(r)], -1))
    radial = commutator_hamiltonian_radial(p, 0.05, r)
    literal = commutator_hamiltonian_literal(p, 0.05, r)
    assert np.max(np.abs(rec - radial)) < 1e-4
    assert np.max(np.abs(rec - literal)) > 1e-2


# ---------------------------------------------------------------- Calabi

def test_calabi_zero_profile():
    assert rotation_calabi_smooth(zero_profile()).value == 0.0


def test_calabi_quadratic_profile():
    r = rotation_calabi_smooth(fixtures.profile("quadratic"))
    assert abs(r.value) == pytest.approx(fixtures.ROTATION_CALABI_QUADRATIC, rel=1e-8)
    assert r.meta["flow_check"] < 1e-3


@pytest.mark.parametrize("name", ["quadratic", "bump"])
def test_calabi_matches_space_time_quadrature(name):
    p = fixtures.profile(name)
    a = rotation_calabi_smooth(p, check_flow=False).value
    b = calabi_eq1(rotation_hamiltonian(p), 256, check_boundary=False).value
    assert b == pytest.approx(a, rel=1e-2)


def test_calabi_rejects_unbounded():
    with pytest.raises(AdmissibilityError):
        rotation_calabi_smooth(fixtures.profile("log"))


def test_extended_matches_smooth():
    p = fixtures.profile("quadratic")
    ext = rotation_extended_calabi(p, grid=64).value
    assert ext == pytest.approx(rotation_calabi_smooth(p, check_flow=False).value, rel=2e-2)


# ------------------------------------------------------- singular study

def test_singular_study_log_profile():
    st_ = singular_profile_study(fixtures.profile("log"), [0.2, 0.1, 0.05, 0.025],
                                 radial_nodes=2001, samples=512)
    assert all(b < a for a, b in zip(st_.map_distance, st_.map_distance[1:]))
    assert all(b < a for a, b in zip(st_.hamiltonian_gaps, st_.hamiltonian_gaps[1:]))
    assert st_.extended_gaps[-1] < 2e-2
    assert len(st_.rows) == 4


def test_singular_study_already_smooth():
    # the shifted bump vanishes on [0, 0.2], so cutoffs below 0.1 change nothing
    st_ = singular_profile_study(fixtures.profile("shifted"), [0.1, 0.05, 0.025],
                                 radial_nodes=2001, samples=256)
    assert max(st_.map_distance) < 1e-14
    assert max(st_.hamiltonian_gaps) < 1e-12
    assert max(st_.extended_gaps) < 1e-12


# ----------------------------------------------------- angle diagnostic

def test_angle_bounded_profile_not_flagged():
    d = angle_bound_diagnostic(FiberedRotation(fixtures.profile("bump")))
    assert not d.obstructed
    assert max(d.estimates) <= 1.0


def test_angle_log_profile_flagged():
    d = angle_bound_diagnostic(FiberedRotation(fixtures.profile("log")))
    assert d.obstructed
    assert d.estimates[-1] > math.pi


def test_angle_identity_map():
    d = angle_bound_diagnostic(identity_map(1))
    assert max(d.estimates) < 1e-12
    assert not d.obstructed
