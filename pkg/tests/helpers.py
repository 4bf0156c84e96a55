"""Shared builders for random instances."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from netwave.signals import SwitchingSignal, exact_array
from netwave.wavenet import Network


def rand_fraction(rng, lo=-3, hi=3, den=4) -> Fraction:
    return Fraction(int(rng.integers(lo, hi + 1)), int(rng.integers(1, den + 1)))


def exact_tuple(rng, N, d):
    return exact_array([[[rand_fraction(rng) for _ in range(d)] for _ in range(d)]
                        for _ in range(N)])


def exact_signal(rng, N, d, t_lo, t_hi, n_breaks=3) -> SwitchingSignal:
    """Exact rational signal with breakpoints scattered in ``[t_lo, t_hi]``."""
    span = t_hi - t_lo
    bps = sorted({t_lo + span * Fraction(int(rng.integers(0, 97)), 96) for _ in range(n_breaks)})
    return SwitchingSignal(bps, [exact_tuple(rng, N, d) for _ in range(len(bps) + 1)], exact=True)


def float_signal(rng, N, d, t_lo, t_hi, n_breaks=4, scale=0.4) -> SwitchingSignal:
    span = t_hi - t_lo
    bps = sorted({t_lo + span * Fraction(int(rng.integers(0, 257)), 256) for _ in range(n_breaks)})
    vals = [scale * (rng.normal(size=(N, d, d)) + 1j * rng.normal(size=(N, d, d)))
            for _ in range(len(bps) + 1)]
    return SwitchingSignal(bps, vals)


LENGTH_CHOICES = (Fraction(1), Fraction(1, 2), Fraction(3, 2), Fraction(2))


def random_network(rng, max_edges=8) -> Network:
    """Connected network with at least one damped and one undamped leaf."""
    while True:
        k = int(rng.integers(1, 5))
        core_edges = []
        for v in range(1, k):
            core_edges.append((int(rng.integers(0, v)), v))
        extra = int(rng.integers(0, 3))
        for _ in range(extra):
            a, b = sorted(int(x) for x in rng.choice(k, size=2, replace=False)) if k >= 2 else (0, 0)
            if a != b and (a, b) not in core_edges and (b, a) not in core_edges:
                core_edges.append((a, b))
        deg = [0] * k
        for a, b in core_edges:
            deg[a] += 1
            deg[b] += 1
        leaves = []
        for v in range(k):
            need = max(0, 2 - deg[v])
            leaves += [v] * need
        while len(leaves) < 2:
            leaves.append(int(rng.integers(0, k)))
        for _ in range(int(rng.integers(0, 3))):
            leaves.append(int(rng.integers(0, k)))
        if len(core_edges) + len(leaves) <= max_edges:
            break
    roles = {f"c{v}": "interior" for v in range(k)}
    edges = [(f"c{a}", f"c{b}") for a, b in core_edges]
    for i, v in enumerate(leaves):
        name = f"x{i}"
        roles[name] = "damped" if i == 0 else "undamped" if i == 1 else \
            ("damped" if rng.random() < 0.5 else "undamped")
        edges.append((f"c{v}", name))
    edges = [e if rng.random() < 0.5 else (e[1], e[0]) for e in edges]
    lengths = [LENGTH_CHOICES[int(rng.integers(0, len(LENGTH_CHOICES)))] for _ in edges]
    return Network(roles, edges, lengths)


def star_network(lengths=(1, 1, 1)) -> Network:
    return Network({"c": "interior", "u": "undamped", "d1": "damped", "d2": "damped"},
                   [("c", "u"), ("c", "d1"), ("d2", "c")], list(lengths))


def triangle_network(lengths=(1, 1, 1, 1, 1)) -> Network:
    return Network({"a": "interior", "b": "interior", "c": "interior", "u": "undamped",
                    "d": "damped"},
                   [("a", "b"), ("b", "c"), ("c", "a"), ("u", "a"), ("b", "d")], list(lengths))


def two_undamped_network(lengths=(1, 1, 1)) -> Network:
    return Network({"c": "interior", "u1": "undamped", "u2": "undamped", "d": "damped"},
                   [("u1", "c"), ("c", "u2"), ("c", "d")], list(lengths))


def single_edge_network(length=1) -> Network:
    return Network({"u": "undamped", "d": "damped"}, [("u", "d")], [length])


def bump(K: int) -> np.ndarray:
    """Smooth bump ``sin^6`` supported in the middle of ``[0, 1]`` on ``K`` cells."""
    x = np.arange(K + 1) / K
    return np.where((x > 0.2) & (x < 0.8), np.sin(np.pi * (x - 0.2) / 0.6) ** 6, 0.0)
