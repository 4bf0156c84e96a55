"""Coupled transport equations on intervals, solved along characteristics.

Each component ``u_i`` moves at unit speed on ``[0, L_i]``; the values
entering at ``x = 0`` are ``M(t)`` applied to the values leaving at
``x = L_i``.  Writing ``v_i(t) = u_i(t, 0)`` turns the system into the
difference equation ``v(t) = sum_i M(t) P_i v(t - L_i)`` with
``P_i = e_i e_i^T``, and the field is recovered as ``u_i(t, x) = v_i(t - x)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .ratlattice import as_fraction
from .signals import SwitchingSignal, matrix_tuple

__all__ = [
    "TransportSystem",
    "TransportSolution",
    "to_difference",
    "grid_counts",
    "solve_transport",
    "simulate_transport",
    "invariance_residual",
    "y_projection_check",
    "trapezoid",
]


def trapezoid(samples: np.ndarray, step: float, axis: int = -1) -> np.ndarray:
    """Composite trapezoid rule on uniform samples including both endpoints."""
    s = np.asarray(samples)
    first = np.take(s, 0, axis=axis)
    last = np.take(s, -1, axis=axis)
    return step * (s.sum(axis=axis) - 0.5 * (first + last))


def to_difference(M) -> SwitchingSignal:
    """Split ``M`` column by column into ``A_i = M P_i``.

    Accepts a square matrix, a constant signal or a signal whose values
    hold a single square matrix.
    """
    if isinstance(M, SwitchingSignal):
        sig = M
    else:
        sig = SwitchingSignal.constant([np.asarray(M)])
    if sig.N != 1:
        raise ValueError("transmission signal must carry one square matrix")

    def split(v: np.ndarray) -> np.ndarray:
        m = v[0]
        n = m.shape[0]
        out = np.zeros((n, n, n), dtype=m.dtype)
        if m.dtype == object:
            out[...] = Fraction(0)
        for i in range(n):
            out[i, :, i] = m[:, i]
        return out

    return sig.map_values(split)


@dataclass
class TransportSystem:
    """Lengths and transmission signal of a transport network.

    ``M`` may be a constant square matrix, a SwitchingSignal of one-matrix
    tuples, or any callable mapping a rational time to a square matrix.
    """

    lengths: tuple
    M: object

    def __post_init__(self):
        self.lengths = tuple(as_fraction(x) for x in self.lengths)
        if any(x <= 0 for x in self.lengths):
            raise ValueError("lengths must be positive")
        if not isinstance(self.M, SwitchingSignal) and not callable(self.M):
            m = np.asarray(self.M, dtype=complex)
            if m.shape != (self.N, self.N):
                raise ValueError(f"transmission matrix must be {self.N}x{self.N}")
            self.M = SwitchingSignal.constant([m])

    @property
    def N(self) -> int:
        return len(self.lengths)

    def matrix(self, t) -> np.ndarray:
        if isinstance(self.M, SwitchingSignal):
            return self.M(t)[0]
        return np.asarray(self.M(t))

    def breakpoints(self) -> tuple:
        if isinstance(self.M, SwitchingSignal):
            return self.M.breakpoints
        return getattr(self.M, "breakpoints", ())


def grid_counts(lengths: Sequence[Fraction], step) -> list[int]:
    """Number of grid cells per length, refusing steps that do not divide."""
    step = as_fraction(step)
    counts = []
    for L in lengths:
        q = L / step
        if q.denominator != 1:
            raise ValueError(f"grid step {step} does not divide length {L}")
        counts.append(int(q))
    return counts


def _profile_samples(u0, lengths, counts, step) -> list[np.ndarray]:
    out = []
    for i, (L, K) in enumerate(zip(lengths, counts)):
        p = u0[i]
        if callable(p):
            xs = [k * step for k in range(K + 1)]
            arr = np.array([complex(p(x)) for x in xs])
        else:
            arr = np.asarray(p, dtype=complex)
            if arr.shape != (K + 1,):
                raise ValueError(f"profile {i} needs {K + 1} samples on the grid")
        out.append(arr)
    return out


class TransportSolution:
    """Boundary trace of a transport system on a uniform time grid.

    ``trace[i, offset + k]`` holds ``v_i(k h)``; negative ``k`` down to
    ``-K_i`` come from the initial profile, ``v_i(-k h) = u_{i,0}(k h)``.
    """

    def __init__(self, system: TransportSystem, step: Fraction, counts: list[int],
                 trace: np.ndarray, offset: int, profiles: list[np.ndarray], steps: int,
                 matrices: list[np.ndarray]):
        self.system = system
        self.step = step
        self.counts = counts
        self.trace = trace
        self.offset = offset
        self.profiles = profiles
        self.steps = steps
        self.matrices = matrices

    @property
    def times(self) -> list[Fraction]:
        return [k * self.step for k in range(self.steps + 1)]

    def _index(self, t) -> int:
        q = as_fraction(t) / self.step
        if q.denominator != 1:
            raise ValueError("time is not on the grid")
        k = int(q)
        if not 0 <= k <= self.steps:
            raise ValueError("time outside the simulated range")
        return k

    def field(self, t) -> list[np.ndarray]:
        """Samples ``u_i(t, x_k)`` at ``x_k = k h`` for every component."""
        k = self._index(t)
        if k == 0:
            return [p.copy() for p in self.profiles]
        out = []
        for i, K in enumerate(self.counts):
            idx = self.offset + k - np.arange(K + 1)
            out.append(self.trace[i, idx].copy())
        return out

    def window(self, k: int) -> list[np.ndarray]:
        """Trace samples behind the field at step ``k`` (no special case at 0)."""
        return [self.trace[i, self.offset + k - np.arange(K + 1)]
                for i, K in enumerate(self.counts)]

    def outflow(self, k: int) -> np.ndarray:
        """``w_i = u_i(t, L_i)`` at step ``k``."""
        return np.array([self.trace[i, self.offset + k - K] for i, K in enumerate(self.counts)])

    def inflow(self, k: int) -> np.ndarray:
        return self.trace[:, self.offset + k].copy()

    def value(self, i: int, t, x) -> complex:
        """Field value at an arbitrary rational point, exact evaluation."""
        t, x = as_fraction(t), as_fraction(x)
        L = self.system.lengths[i]
        if not 0 <= x <= L:
            raise ValueError("x outside the edge")
        s = t - x
        if t == 0 or s < 0:
            return _interp_profile(self.profiles[i], self.step, x - t)
        q = s / self.step
        if q.denominator == 1 and int(q) <= self.steps:
            return complex(self.trace[i, self.offset + int(q)])
        return complex(self._pointwise(s)[i])

    def _pointwise(self, s: Fraction) -> np.ndarray:
        from .diffeq import DirectSolver

        lengths = self.system.lengths
        lmax = max(lengths)
        profiles, step = self.profiles, self.step

        class _History:
            d = len(lengths)

            def __init__(self):
                self.lmax = lmax

            def __call__(self, r):
                vals = np.zeros(len(lengths), dtype=complex)
                for i, L in enumerate(lengths):
                    if -L <= r < 0:
                        vals[i] = _interp_profile(profiles[i], step, -r)
                return vals

        A = _CallableSignal(self.system)
        return DirectSolver(_History(), A, lengths)(s)

    def write_csv(self, path: str, times: Sequence | None = None) -> None:
        times = self.times if times is None else times
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["edge", "t", "x", "re", "im"])
            for t in times:
                for i, vals in enumerate(self.field(t)):
                    for k, z in enumerate(vals):
                        w.writerow([i + 1, repr(float(t)), repr(float(k * self.step)),
                                    repr(float(z.real)), repr(float(z.imag))])


class _CallableSignal:
    """Adapter giving ``A_i(t) = M(t) P_i`` for the pointwise solver."""

    def __init__(self, system: TransportSystem):
        self.system = system
        self.N = system.N
        self.d = system.N

    def __call__(self, t):
        m = np.asarray(self.system.matrix(t), dtype=complex)
        out = np.zeros((self.N, self.N, self.N), dtype=complex)
        for i in range(self.N):
            out[i, :, i] = m[:, i]
        return out


def _interp_profile(samples: np.ndarray, step: Fraction, x: Fraction) -> complex:
    q = x / step
    k = int(q)
    if q.denominator == 1:
        return complex(samples[k])
    frac = float(q - k)
    return complex((1 - frac) * samples[k] + frac * samples[min(k + 1, len(samples) - 1)])


def solve_transport(u0: Sequence, system: TransportSystem, horizon, step,
                    matrix_at_step: Callable[[int], np.ndarray] | None = None) -> TransportSolution:
    """Advance the boundary trace up to ``horizon`` with time step ``step``.

    Parameters
    ----------
    u0 : sequence
        Per component either samples on ``x_k = k * step`` (``K_i + 1``
        values) or a callable of a rational ``x``.
    system : TransportSystem
    horizon, step : rational
        ``step`` must divide every length and ``horizon``.
    matrix_at_step : callable, optional
        Override giving ``M`` at step ``k``; defaults to ``system.matrix``.
    """
    step = as_fraction(step)
    horizon = as_fraction(horizon)
    counts = grid_counts(system.lengths, step)
    nsteps = horizon / step
    if nsteps.denominator != 1 or nsteps < 0:
        raise ValueError("step must divide the horizon")
    nsteps = int(nsteps)
    profiles = _profile_samples(u0, system.lengths, counts, step)
    Kmax = max(counts)
    N = system.N
    trace = np.zeros((N, Kmax + nsteps + 1), dtype=complex)
    for i, K in enumerate(counts):
        # v_i(-k h) = u_{i,0}(k h) for k = 1..K_i; earlier times stay zero
        trace[i, Kmax - np.arange(1, K + 1)] = profiles[i][1:]
    cols = np.arange(N)
    back = np.array(counts)
    matrices = []
    for k in range(nsteps + 1):
        if matrix_at_step is not None:
            m = matrix_at_step(k)
        else:
            m = np.asarray(system.matrix(k * step), dtype=complex)
        matrices.append(m)
        w = trace[cols, Kmax + k - back]
        trace[:, Kmax + k] = m @ w
    return TransportSolution(system, step, counts, trace, Kmax, profiles, nsteps, matrices)


def simulate_transport(u0: Sequence, system: TransportSystem, t, step) -> list[np.ndarray]:
    """Field samples ``u_i(t, x_k)`` on the grid of step ``step``."""
    return solve_transport(u0, system, t, step).field(t)


def invariance_residual(R, solution: TransportSolution) -> dict:
    """Residuals of the invariance test for ``{sum_j R_ij int u_j = 0}``.

    ``algebraic`` is ``max_t |R (M(t) - I) w(t)|`` with ``w`` the outflow.
    ``integral`` is ``max_t |R int u(t) - R int u(0)|`` from quadrature of
    the field, and ``integral_boundary`` the same drift accumulated from
    the boundary terms, ``|int_0^t R (M - I) w|``.
    """
    R = np.atleast_2d(np.asarray(R, dtype=complex))
    if R.size == 0 or R.shape[0] == 0:
        return {"algebraic": 0.0, "integral": 0.0, "integral_boundary": 0.0}
    h = float(solution.step)
    eye = np.eye(solution.system.N)
    alg = []
    for k in range(solution.steps + 1):
        w = solution.outflow(k)
        alg.append(R @ ((solution.matrices[k] - eye) @ w))
    alg = np.array(alg)
    algebraic = float(np.abs(alg).max())
    cum = np.zeros_like(alg)
    if len(alg) > 1:
        cum[1:] = np.cumsum(0.5 * h * (alg[1:] + alg[:-1]), axis=0)
    integral_boundary = float(np.abs(cum).max())
    ints = []
    for k in range(solution.steps + 1):
        win = solution.window(k)
        ints.append(R @ np.array([trapezoid(wv, h) for wv in win]))
    ints = np.array(ints)
    integral = float(np.abs(ints - ints[0]).max())
    return {"algebraic": algebraic, "integral": integral, "integral_boundary": integral_boundary}


def y_projection_check(profiles: Sequence[np.ndarray], R, tol: float, step) -> bool:
    """True iff ``|sum_j R_ij int u_j| <= tol`` for every row, by trapezoid."""
    R = np.atleast_2d(np.asarray(R, dtype=complex))
    if R.shape[0] == 0 or R.size == 0:
        return True
    h = float(as_fraction(step))
    ints = np.array([trapezoid(np.asarray(p, dtype=complex), h) for p in profiles])
    return bool(np.all(np.abs(R @ ints) <= tol))
