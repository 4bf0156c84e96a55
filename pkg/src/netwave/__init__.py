"""Switched delay difference equations, transport systems and damped wave networks.

Submodules
----------
ratlattice
    Exact delay lattice: kernels, class keys, membership tests.
coefficients
    Coefficient matrices of the explicit solution formula.
diffeq
    Solvers, Lyapunov estimates and adversarial initial data.
spectral
    Joint-spectral growth rates and the switched stability verdict.
transport
    Transport systems through their boundary difference equation.
wavenet
    Wave networks, traveling-wave decomposition and energy accounting.
cli
    Command-line front end (``netwave`` or ``python -m netwave``).
"""

from .ratlattice import DelayVector, class_key, class_members, integer_kernel, membership_V, membership_W
from .signals import GaussianRational, SwitchingSignal
from .coefficients import CoefficientTable, theta, xi, xi_hat, xi_pathsum, xi_reverse
from .diffeq import InitialCondition, evaluate_direct, evaluate_representation, lyapunov_theta, simulate
from .spectral import mu_estimate, mu_hs_estimate, rho_hs, stability_verdict_delays
from .transport import TransportSystem, solve_transport, simulate_transport
from .wavenet import (DampingSet, DampingSignal, Network, WaveState, build_M, build_R, classify,
                      dalembert_forward, dalembert_inverse, periodic_witness, simulate_wave,
                      stability_verdict_wave)

__version__ = "0.1.0"

__all__ = [
    "DelayVector", "class_key", "class_members", "integer_kernel", "membership_V", "membership_W",
    "GaussianRational", "SwitchingSignal",
    "CoefficientTable", "theta", "xi", "xi_hat", "xi_pathsum", "xi_reverse",
    "InitialCondition", "evaluate_direct", "evaluate_representation", "lyapunov_theta", "simulate",
    "mu_estimate", "mu_hs_estimate", "rho_hs", "stability_verdict_delays",
    "TransportSystem", "solve_transport", "simulate_transport",
    "DampingSet", "DampingSignal", "Network", "WaveState", "build_M", "build_R", "classify",
    "dalembert_forward", "dalembert_inverse", "periodic_witness", "simulate_wave",
    "stability_verdict_wave",
]
