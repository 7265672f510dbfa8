"""Finite algebras A'(T) built from Turing machines, their congruences and
subdirectly irreducible members, and a library of congruence formulas."""

from .algebra_core import (
    FiniteAlgebra,
    Operation,
    Partition,
    congruence_generated,
    monolith,
    principal_congruence,
    quotient,
)
from .aprime import build_aprime
from .formulas import Semantics, build_library, dpsc_check
from .si_catalog import build_sequential, build_small_si, theta_phi_quotient
from .tm_core import Configuration, TuringMachine, machine, parse_tm

__version__ = "0.1.0"

__all__ = [
    "Configuration", "FiniteAlgebra", "Operation", "Partition", "Semantics", "TuringMachine",
    "build_aprime", "build_library", "build_sequential", "build_small_si", "congruence_generated",
    "dpsc_check", "machine", "monolith", "parse_tm", "principal_congruence", "quotient",
    "theta_phi_quotient",
]
