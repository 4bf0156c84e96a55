"""Scalar delay equation u(t) = a u(t - 1): simulated decay against the exponent estimates."""

import math
from fractions import Fraction

import numpy as np

from netwave.diffeq import InitialCondition, lyapunov_theta, simulate
from netwave.ratlattice import DelayVector
from netwave.signals import SwitchingSignal
from netwave.spectral import stability_verdict_delays

L1 = DelayVector([[1]], ["1"])

for a in (0.5, 0.9, 1.0, 1.2):
    A = SwitchingSignal.constant([[[a]]])
    traj = simulate(InitialCondition.constant([1.0], 1), A, L1, 12, Fraction(1, 4))
    theta = lyapunov_theta([A], L1, L1, 60).value
    verdict = stability_verdict_delays(L1, [np.array([[[a]]])])
    print(f"a = {a:3.1f}  |u(12)| = {traj.norms()[-1]:.3e}  "
          f"theta exponent {theta:+.4f}  exact ln|a| {math.log(a):+.4f}  "
          f"verdict {verdict.status} (mu {verdict.mu.value:.4f})")
