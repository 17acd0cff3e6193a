"""Calabi invariants, Liouville commutators and generating functions on R^{2n}."""
from . import conventions
from .calabi import (
    alternate_liouville_invariance,
    calabi_eq1,
    commutator_calabi,
    counterexample_report,
    extended_calabi_limit,
    extended_calabi_of_map,
    homomorphism_check,
)
from .errors import HamcalError
from .exprlang import evaluate, parse
from .genfun import GeneratingFunction, genfun_from_map, mollify, psi_apply, psi_inverse_apply
from .geom import LiouvilleFlow, SupportBox
from .hamflow import HamiltonianField, MapRep, flow, flow_map, hamiltonian_from_isotopy
from .rotations import AngularProfile, FiberedRotation

__version__ = "0.1.0"

__all__ = [
    "conventions", "alternate_liouville_invariance", "calabi_eq1", "commutator_calabi",
    "counterexample_report", "extended_calabi_limit", "extended_calabi_of_map",
    "homomorphism_check", "HamcalError", "evaluate", "parse", "GeneratingFunction",
    "genfun_from_map", "mollify", "psi_apply", "psi_inverse_apply", "LiouvilleFlow",
    "SupportBox", "HamiltonianField", "MapRep", "flow", "flow_map", "hamiltonian_from_isotopy",
    "AngularProfile", "FiberedRotation",
]
