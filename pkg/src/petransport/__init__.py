"""Transport equations on a star of circles with intermittent damping."""

__version__ = "0.1.0"

from .coeff import build_beta, build_theta, epsilon, phi_k_set, theta_at, theta_kstep
from .net import Length, Network, Tag, check_hypotheses, enumerate_lattice, l1_norm, lattice_value, length, validate_network
from .signals import StepSignal, integrate, make_random_pe, make_single_circle_escape, make_two_circle_pe_escape, verify_pe
from .solver import InitialData, TraceField, bump, check_compatibility, poly

__all__ = [
    "InitialData",
    "Length",
    "Network",
    "StepSignal",
    "Tag",
    "TraceField",
    "build_beta",
    "build_theta",
    "bump",
    "check_compatibility",
    "check_hypotheses",
    "enumerate_lattice",
    "epsilon",
    "integrate",
    "l1_norm",
    "lattice_value",
    "length",
    "make_random_pe",
    "make_single_circle_escape",
    "make_two_circle_pe_escape",
    "phi_k_set",
    "poly",
    "theta_at",
    "theta_kstep",
    "validate_network",
    "verify_pe",
]
