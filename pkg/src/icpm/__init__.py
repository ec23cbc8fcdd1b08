"""Orbital stabilization of underactuated systems with impulsive control on a Poincare section."""
__version__ = "0.1.0"

from .dynamics import MechanicalSystem, dynamics_terms, forward_accel, total_energy
from .estimator import ICPMController
from .hybrid_sim import SectionSpec, integrate_to_section, simulate_closed_loop
from .lqr import LqrProblem, certify, dare_solve, stabilizability_check
from .models import build_model, cart_pendulum, tiptoebot
from .poincare import find_fixed_point, linearize, poincare_map
from .reduction import build_reduced, orbit_distance, orbit_from_anchor, orbit_from_energy
from .vhc import VhcSpec, linear_vhc, vhc_controller

__all__ = [
    "MechanicalSystem",
    "dynamics_terms",
    "forward_accel",
    "total_energy",
    "ICPMController",
    "SectionSpec",
    "integrate_to_section",
    "simulate_closed_loop",
    "LqrProblem",
    "certify",
    "dare_solve",
    "stabilizability_check",
    "build_model",
    "cart_pendulum",
    "tiptoebot",
    "find_fixed_point",
    "linearize",
    "poincare_map",
    "build_reduced",
    "orbit_distance",
    "orbit_from_anchor",
    "orbit_from_energy",
    "VhcSpec",
    "linear_vhc",
    "vhc_controller",
]
