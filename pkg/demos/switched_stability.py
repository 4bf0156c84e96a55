"""Two delays (1 and 2) switching between two coefficient pairs.

Each pair alone is stable; the verdict covers arbitrary switching and is
checked against simulated exponents of random switching signals.
"""

from fractions import Fraction

import numpy as np

from netwave.diffeq import lyapunov_theta
from netwave.ratlattice import DelayVector
from netwave.signals import SwitchingSignal
from netwave.spectral import rho_hs, stability_verdict_delays

L12 = DelayVector([[1], [2]], ["1"])
family = [np.array([[[0.3]], [[0.2]]]), np.array([[[-0.25]], [[0.3]]])]

for k, A in enumerate(family):
    print(f"pair {k}: autonomous spectral bound rho = {rho_hs(L12, A, 256):.4f}")

verdict = stability_verdict_delays(L12, family, x_max=12)
print(f"switched family: mu = {verdict.mu.value:.4f} +/- {verdict.margin:.4f}, "
      f"status {verdict.status}, exponent by bisection {verdict.lyapunov:+.4f}")

rng = np.random.default_rng(0)
worst = -np.inf
for _ in range(10):
    bps = sorted({Fraction(int(x), 4) for x in rng.integers(0, 120, size=8)})
    vals = [family[int(rng.integers(0, 2))] for _ in range(len(bps) + 1)]
    worst = max(worst, lyapunov_theta([SwitchingSignal(bps, vals)], L12, L12, 30).value)
print(f"largest exponent seen over 10 random switching signals: {worst:+.4f}")
