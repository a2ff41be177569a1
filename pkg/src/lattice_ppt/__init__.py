"""Exact PPT distinguishability of lattice maximally entangled states."""

from .lattice import LatticeIndex, StateSet, family, parse_set, sign, sign_matrix
from .ppt import AlphaResult, alpha, beta_prime, build_tableau, reduced_costs, verify_certificate

__all__ = [
    "AlphaResult",
    "LatticeIndex",
    "StateSet",
    "alpha",
    "beta_prime",
    "build_tableau",
    "family",
    "parse_set",
    "reduced_costs",
    "sign",
    "sign_matrix",
    "verify_certificate",
]
__version__ = "0.1.0"
