"""Sign and direction conventions, kept in one table.

Every module reads its signs from here, so a report can print exactly which
conventions a run used and a mutation test can flip one entry.

HAMILTONIAN_SIGN
    X_H = s * (dH/dp, -dH/dq).  s = +1 is iota_{X_H} omega = dH with
    omega = sum dq ^ dp; H = (q^2 + p^2)/2 then turns clockwise.
RECOVERY_SIGN
    A velocity field V is turned into dH = s * iota_V omega.
HJ_SIGN
    H(t, w) = s * dS_t/dt(x, w_p) for the isotopy t -> Psi(S_t).  Fixed by
    flowing the field and comparing with Psi(S_t); see ``genfun.resolve_hj_sign``.
ROTATION_SIGN
    The autonomous generator h of (r, theta) -> (r, theta + rho(r)) has
    h'(r) = -s * r * rho(r).
INVERSE_VARIANT / COMPOSE_VARIANT
    "oracle": -F(t, phi_F^t x) and F + G(t, (phi_F^t)^{-1} x), which the
    flow-composition oracle confirms.  "literal": -F(t, (phi_F^t)^{-1} x)
    and F + G(t, phi_F^t x), kept for side-by-side comparison.
"""

HAMILTONIAN_SIGN = 1
RECOVERY_SIGN = 1
HJ_SIGN = 1
ROTATION_SIGN = 1
INVERSE_VARIANT = "oracle"
COMPOSE_VARIANT = "oracle"


def table() -> dict:
    return {
        "hamiltonian_sign": HAMILTONIAN_SIGN,
        "hamiltonian_vector_field": "X_H = (dH/dp, -dH/dq)" if HAMILTONIAN_SIGN > 0
        else "X_H = (-dH/dp, dH/dq)",
        "recovery_sign": RECOVERY_SIGN,
        "hamilton_jacobi_sign": HJ_SIGN,
        "rotation_generator_sign": ROTATION_SIGN,
        "inverse_generator": INVERSE_VARIANT,
        "composition_generator": COMPOSE_VARIANT,
        "volume_form": "omega^n as dq1 dp1 ... dqn dpn (no factorial)",
        "liouville_flow": "mu_t(x) = c + exp(t/2) (x - c)",
    }
