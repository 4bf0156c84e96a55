"""Damped waves on a star (a tree) decay; on a triangle a trapped oscillation survives."""

from fractions import Fraction

import numpy as np

from netwave.transport import grid_counts
from netwave.wavenet import (DampingSet, DampingSignal, Network, WaveState, decay_rate_fit,
                             periodic_witness, simulate_wave, stability_verdict_wave)

h = Fraction(1, 64)
star = Network({"c": "interior", "u": "undamped", "d1": "damped", "d2": "damped"},
               [("c", "u"), ("c", "d1"), ("d2", "c")], [1, 1, 1])
triangle = Network({"a": "interior", "b": "interior", "c": "interior", "u": "undamped",
                    "d": "damped"},
                   [("a", "b"), ("b", "c"), ("c", "a"), ("u", "a"), ("b", "d")], [1] * 5)

# smooth bump in every edge of the star, damping switching in [1/2, 2]
counts = grid_counts(star.lengths, h)
x = [np.arange(K + 1) / K for K in counts]
du = [np.where((s > 0.2) & (s < 0.8), np.sin(np.pi * (s - 0.2) / 0.6) ** 6, 0.0) for s in x]
state = WaveState.from_potentials(star, h, {}, du, [np.zeros(K + 1) for K in counts])
eta = DampingSignal.random(2, 20, h, 0.5, 2.0, 20, seed=1)
tr = simulate_wave(state, None, eta, 20)
fit = decay_rate_fit(tr.times, tr.energy)
verdict = stability_verdict_wave(star, DampingSet(box=[[0.5, 2], [0.5, 2]]))
print(f"star: verdict stable={verdict.stable}; energy {tr.energy[0]:.4f} -> {tr.energy[-1]:.3e}, "
      f"fitted rate {fit['rate']:.3f}")

verdict = stability_verdict_wave(triangle, DampingSet(box=[[0.5, 2]]))
w = periodic_witness(triangle, step=h)
tr = simulate_wave(w.state, w.network, DampingSignal.random(1, 20, h, 0.5, 2.0, 20, seed=1), 20)
print(f"triangle: verdict stable={verdict.stable} ({', '.join(verdict.reasons)}); "
      f"witness on {w.path.kind} path keeps energy {tr.energy[0]:.4f}, spread {np.ptp(tr.energy):.1e}")
