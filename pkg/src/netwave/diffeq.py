"""Solutions of ``u(t) = sum_j A_j(t) u(t - L_j)`` and their growth rates.

Two evaluators are provided: the pointwise recursion, which walks back to
the initial interval, and the explicit formula built from the class
coefficients of :mod:`netwave.coefficients`.  On top of those sit a
Lyapunov-exponent estimator, a check of the polynomial-times-envelope
bound and the construction of initial conditions that excite a single
coefficient.
"""

from __future__ import annotations

import csv
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .coefficients import CoefficientTable
from .ratlattice import DelayVector, as_fraction, as_rational_vector
from .signals import SwitchingSignal, inf_norm

__all__ = [
    "InitialCondition",
    "Trajectory",
    "DirectSolver",
    "evaluate_direct",
    "evaluate_representation",
    "simulate",
    "lyapunov_theta",
    "LyapunovEstimate",
    "exponential_bound_check",
    "BoundCheck",
    "adversarial_witness",
    "lattice_levels",
]


class InitialCondition:
    """Piecewise-polynomial vector function on ``[-L_max, 0)``.

    Parameters
    ----------
    lmax : rational
        Length of the history interval.
    breakpoints : sequence of rationals
        Interior breakpoints, strictly increasing in ``(-lmax, 0)``.
    coefficients : sequence
        One entry per segment; each is a list of coefficient vectors
        ``[c0, c1, ...]`` so that the value is ``sum_k c_k * s**k`` in the
        global time variable ``s``.
    """

    def __init__(self, lmax, breakpoints: Sequence, coefficients: Sequence):
        self.lmax = as_fraction(lmax)
        if self.lmax <= 0:
            raise ValueError("history length must be positive")
        self.breakpoints = tuple(as_fraction(b) for b in breakpoints)
        if any(b <= -self.lmax or b >= 0 for b in self.breakpoints):
            raise ValueError("breakpoints must lie inside (-lmax, 0)")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(coefficients) != len(self.breakpoints) + 1:
            raise ValueError("need one coefficient list per segment")
        segs = []
        for seg in coefficients:
            if len(seg) == 0:
                raise ValueError("empty polynomial segment")
            segs.append([np.asarray(c) for c in seg])
        self.d = segs[0][0].shape[0]
        if any(c.shape != (self.d,) for seg in segs for c in seg):
            raise ValueError("coefficient vectors must share the dimension d")
        self.segments = segs

    @classmethod
    def constant(cls, value: Sequence, lmax) -> "InitialCondition":
        return cls(lmax, (), [[np.asarray(value)]])

    @classmethod
    def zero(cls, d: int, lmax) -> "InitialCondition":
        return cls.constant(np.zeros(d, dtype=complex), lmax)

    @classmethod
    def indicator(cls, lmax, start, stop, vector: Sequence) -> "InitialCondition":
        """``vector`` on ``[start, stop)`` and zero elsewhere."""
        lmax = as_fraction(lmax)
        start, stop = as_fraction(start), as_fraction(stop)
        if not (-lmax <= start < stop <= 0):
            raise ValueError("indicator support must lie inside [-lmax, 0)")
        vec = np.asarray(vector)
        zero = np.zeros_like(vec)
        bps, coeffs = [], []
        if start > -lmax:
            bps.append(start)
            coeffs.append([zero])
        coeffs.append([vec])
        if stop < 0:
            bps.append(stop)
            coeffs.append([zero])
        return cls(lmax, bps, coeffs)

    def __call__(self, s) -> np.ndarray:
        s = as_fraction(s)
        if not (-self.lmax <= s < 0):
            raise ValueError(f"time {s} outside the history interval")
        seg = self.segments[bisect_right(self.breakpoints, s)]
        if len(seg) == 1:
            return seg[0]
        acc = seg[-1]
        x = s if acc.dtype == object else float(s)
        for c in reversed(seg[:-1]):
            acc = acc * x + c
        return acc

    def linear_combination(self, alpha, other: "InitialCondition", beta) -> "InitialCondition":
        """``alpha * self + beta * other`` on a common refinement."""
        if other.lmax != self.lmax or other.d != self.d:
            raise ValueError("incompatible initial conditions")
        bps = sorted(set(self.breakpoints) | set(other.breakpoints))
        coeffs = []
        edges = [-self.lmax] + bps
        for left in edges:
            a = self.segments[bisect_right(self.breakpoints, left)]
            b = other.segments[bisect_right(other.breakpoints, left)]
            k = max(len(a), len(b))
            zero = np.zeros(self.d, dtype=complex)
            coeffs.append([alpha * (a[i] if i < len(a) else zero)
                           + beta * (b[i] if i < len(b) else zero) for i in range(k)])
        return InitialCondition(self.lmax, bps, coeffs)

    def sup_norm(self, step=None) -> float:
        """Max of the infinity norm over a grid of the history interval."""
        step = as_fraction(step) if step is not None else self.lmax / 256
        pts = _grid(-self.lmax, Fraction(0), step, include_stop=False)
        pts += [b for b in self.breakpoints]
        return max(float(np.max(np.abs(np.asarray(self(s), dtype=complex)))) for s in pts)


def _grid(start: Fraction, stop: Fraction, step: Fraction, include_stop=True) -> list[Fraction]:
    n = int((stop - start) / step)
    pts = [start + k * step for k in range(n + 1)]
    if pts and pts[-1] > stop:
        pts.pop()
    if not include_stop and pts and pts[-1] == stop:
        pts.pop()
    return pts


class DirectSolver:
    """Memoized pointwise evaluator of the solution."""

    def __init__(self, u0: InitialCondition, A: SwitchingSignal, L):
        self.u0 = u0
        self.A = A
        self.L = as_rational_vector(L)
        if len(self.L) != A.N:
            raise ValueError("signal and delays disagree on N")
        if u0.lmax < max(self.L):
            raise ValueError("initial condition is shorter than the largest delay")
        if u0.d != A.d:
            raise ValueError("initial condition and signal disagree on d")
        self._memo: dict[Fraction, np.ndarray] = {}

    def __call__(self, t) -> np.ndarray:
        t = as_fraction(t)
        if t < 0:
            return self.u0(t)
        # iterative evaluation keeps the Python stack shallow
        order = []
        stack = [t]
        seen = set()
        while stack:
            s = stack.pop()
            if s < 0 or s in self._memo or s in seen:
                continue
            seen.add(s)
            order.append(s)
            stack.extend(s - l for l in self.L)
        for s in sorted(order):
            At = self.A(s)
            acc = None
            for j, l in enumerate(self.L):
                r = s - l
                prev = self.u0(r) if r < 0 else self._memo[r]
                term = At[j] @ prev
                acc = term if acc is None else acc + term
            self._memo[s] = acc
        return self._memo[t]


def evaluate_direct(u0: InitialCondition, A: SwitchingSignal, L, t) -> np.ndarray:
    """Solution value at ``t`` by the recursion ``u(t) = sum_j A_j(t) u(t - L_j)``."""
    return DirectSolver(u0, A, L)(t)


def lattice_levels(L: Sequence[Fraction], upper: Fraction, lower: Fraction | None = None,
                   include_lower: bool = False) -> list[tuple[tuple[int, ...], Fraction]]:
    """Multi-indices ``n`` with ``L . n <= upper`` (and above ``lower``)."""
    N = len(L)
    out = []
    prefix = [0] * N

    def dfs(i: int, acc: Fraction) -> None:
        if i == N:
            if lower is None or acc > lower or (include_lower and acc == lower):
                out.append((tuple(prefix), acc))
            return
        k = 0
        while acc + k * L[i] <= upper:
            prefix[i] = k
            dfs(i + 1, acc + k * L[i])
            k += 1
        prefix[i] = 0

    dfs(0, Fraction(0))
    return out


def evaluate_representation(u0: InitialCondition, A: SwitchingSignal, L, Lambda: DelayVector,
                            t, table: CoefficientTable | None = None) -> np.ndarray:
    """Solution value at ``t >= 0`` from the class coefficients.

    ``u(t) = sum_[n] theta([n], t) @ u0(t - L . n)`` over the classes with
    ``t < L . n <= t + L_max``.
    """
    t = as_fraction(t)
    if t < 0:
        raise ValueError("the explicit formula is stated for t >= 0")
    if table is None:
        table = CoefficientTable(A, L, Lambda)
    Lv = table.L
    lmax = max(Lv)
    keys: dict[tuple[int, ...], Fraction] = {}
    for n, level in lattice_levels(Lv, t + lmax, lower=t):
        keys.setdefault(table.Lambda.key(n), level)
    acc = np.zeros(u0.d, dtype=complex if not table.exact else object)
    if table.exact:
        acc[:] = Fraction(0)
    for key in sorted(keys):
        level = keys[key]
        acc = acc + table.theta(key, t) @ u0(t - level)
    return acc


@dataclass
class Trajectory:
    """Sampled solution with provenance."""

    times: list
    values: np.ndarray
    method: str
    n_delays: int
    lmax: Fraction
    meta: dict = field(default_factory=dict)

    def norms(self) -> np.ndarray:
        return np.max(np.abs(np.asarray(self.values, dtype=complex)), axis=1)

    def window_norms(self) -> np.ndarray:
        """Discrete ``sup_{s in [t - L_max, t]} |u(s)|`` for every sample ``t``."""
        t = np.array([float(x) for x in self.times])
        pointwise = self.norms()
        out = np.empty_like(pointwise)
        lo = 0
        lm = float(self.lmax)
        for k in range(len(t)):
            while t[lo] < t[k] - lm - 1e-15:
                lo += 1
            out[k] = pointwise[lo:k + 1].max()
        return out

    def write_csv(self, path: str) -> None:
        vals = np.asarray(self.values, dtype=complex)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["time"]
            for i in range(vals.shape[1]):
                header += [f"re_u{i + 1}", f"im_u{i + 1}"]
            w.writerow(header)
            for t, row in zip(self.times, vals):
                line = [repr(float(t))]
                for z in row:
                    line += [repr(float(z.real)), repr(float(z.imag))]
                w.writerow(line)

    def metadata(self) -> dict:
        return {"method": self.method, "n_delays": self.n_delays,
                "lmax": str(self.lmax), "samples": len(self.times), **self.meta}

    def write_metadata(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def simulate(u0: InitialCondition, A: SwitchingSignal, L, horizon, step=None,
             method: str = "direct", Lambda: DelayVector | None = None) -> Trajectory:
    """Sample the solution on a uniform grid of ``[-L_max, horizon]``.

    The default step is ``L_min / 256``.
    """
    Lv = as_rational_vector(L)
    horizon = as_fraction(horizon)
    step = as_fraction(step) if step is not None else min(Lv) / 256
    lmax = max(Lv)
    times = _grid(-lmax, horizon, step)
    if method == "direct":
        solver = DirectSolver(u0, A, Lv)
        vals = [solver(s) for s in times]
    elif method == "representation":
        if Lambda is None:
            Lambda = L if isinstance(L, DelayVector) else DelayVector.from_rationals(Lv)
        table = CoefficientTable(A, Lv, Lambda)
        vals = [u0(s) if s < 0 else evaluate_representation(u0, A, Lv, Lambda, s, table)
                for s in times]
    else:
        raise ValueError(f"unknown method {method!r}")
    values = np.array([np.asarray(v, dtype=complex) for v in vals])
    return Trajectory(times, values, method, len(Lv), lmax,
                      {"horizon": str(horizon), "step": str(step),
                       "delays": [str(x) for x in Lv]})


@dataclass
class LyapunovEstimate:
    """Truncated limsup of ``ln|theta| / t``."""

    value: float
    window: tuple[Fraction, Fraction]
    samples: int
    truncated_sampling: bool


def _window_samples(level: Fraction, lmax: Fraction, Lv: Sequence[Fraction],
                    breakpoints: Sequence[Fraction], cap: int) -> tuple[list[Fraction], bool]:
    """Sample times in ``(level - lmax, level)`` hitting every constancy interval."""
    lo, hi = level - lmax, level
    cuts = {lo, hi}
    cuts.update(level - l for l in Lv if lo < level - l < hi)
    if breakpoints:
        bmin = min(breakpoints)
        for n, shift in lattice_levels(Lv, hi - bmin):
            for b in breakpoints:
                s = b + shift
                if lo < s < hi:
                    cuts.add(s)
    cuts = sorted(cuts)
    pts = []
    for a, b in zip(cuts, cuts[1:]):
        if a > lo:
            pts.append(a)
        pts.append((a + b) / 2)
    truncated = False
    if len(pts) > cap:
        idx = np.linspace(0, len(pts) - 1, cap).round().astype(int)
        pts = [pts[i] for i in sorted(set(idx.tolist()))]
        truncated = True
    return pts, truncated


def lyapunov_theta(signals: Iterable[SwitchingSignal], L, Lambda: DelayVector | None, horizon,
                   samples_per_window: int = 512) -> LyapunovEstimate:
    """Estimate the exponential type from the class coefficients.

    Takes the maximum of ``ln|theta([n], t)| / t`` over the classes with
    ``L . n`` in ``[horizon / 2, horizon]``, over the given signals and over
    sampled ``t`` in ``(L . n - L_max, L . n)``.  The sample set contains
    every point where some factor may switch plus the midpoints between
    them, which hits every constancy interval of a piecewise-constant
    signal; ``truncated_sampling`` reports when the per-window cap forced
    thinning.  Returns ``-inf`` when all sampled coefficients vanish.
    """
    Lv = as_rational_vector(L)
    horizon = as_fraction(horizon)
    lmax = max(Lv)
    if horizon < 3 * lmax:
        raise ValueError("horizon must be at least 3 * L_max")
    if Lambda is None:
        Lambda = L if isinstance(L, DelayVector) else DelayVector.from_rationals(Lv)
    best = -math.inf
    count = 0
    truncated = False
    for A in signals:
        table = CoefficientTable(A, Lv, Lambda)
        keys: dict[tuple[int, ...], Fraction] = {}
        for n, level in lattice_levels(Lv, horizon, lower=horizon / 2, include_lower=True):
            keys.setdefault(Lambda.key(n), level)
        for key in sorted(keys):
            level = keys[key]
            pts, cut = _window_samples(level, lmax, Lv, A.breakpoints, samples_per_window)
            truncated |= cut
            for t in pts:
                if t <= 0:
                    continue
                count += 1
                nrm = inf_norm(table.theta(key, t))
                if nrm > 0:
                    best = max(best, math.log(nrm) / float(t))
    return LyapunovEstimate(best, (horizon / 2, horizon), count, truncated)


@dataclass
class BoundCheck:
    ok: bool
    constant: float
    locus: tuple[int, float] | None = None


def exponential_bound_check(trajectories: Sequence[Trajectory], f: Callable[[float], float],
                            u0_norms: Sequence[float] | None = None,
                            rtol: float = 1e-9) -> BoundCheck:
    """Check ``|u_t| <= C (t + 1)^(N - 1) max_{[t - L_max, t]} f |u0|``.

    ``C`` is the smallest constant that makes the envelope hold on the
    first window ``t in [0, L_max]``; the check then scans every later
    sample.  Returns the first violating ``(trajectory index, time)``.
    """
    fitted = []
    prepared = []
    for k, tr in enumerate(trajectories):
        t = np.array([float(x) for x in tr.times])
        wn = tr.window_norms()
        lm = float(tr.lmax)
        fv = np.array([f(x) for x in t], dtype=float)
        if np.any(fv <= 0):
            raise ValueError("envelope must be positive")
        fwin = np.empty_like(fv)
        lo = 0
        for i in range(len(t)):
            while t[lo] < t[i] - lm - 1e-15:
                lo += 1
            fwin[i] = fv[lo:i + 1].max()
        if u0_norms is not None:
            u0n = u0_norms[k]
        else:
            u0n = float(tr.norms()[t < 0].max()) if np.any(t < 0) else 0.0
        env = (t + 1) ** (tr.n_delays - 1) * fwin * u0n
        prepared.append((t, wn, env))
        first = (t >= 0) & (t <= lm)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(env[first] > 0, wn[first] / env[first], 0.0)
        fitted.append(float(ratio.max()) if ratio.size else 0.0)
    C = max(fitted) if fitted else 0.0
    for k, (t, wn, env) in enumerate(prepared):
        later = t >= 0
        bad = later & (wn > C * env * (1 + rtol) + 1e-300)
        if np.any(bad):
            i = int(np.argmax(bad))
            return BoundCheck(False, C, (k, float(t[i])))
    return BoundCheck(True, C)


def adversarial_witness(A: SwitchingSignal, L, Lambda: DelayVector, key: Sequence[int], t0, delta,
                        table: CoefficientTable | None = None) -> InitialCondition:
    """Initial condition concentrated where it excites a single class.

    Returns ``u0(s) = 1_{(-delta, delta)}(s - t0 + L . n0) e_{j0}`` where
    ``j0`` maximizes the column norm of ``theta([n0], t0)``.  For times
    ``t0 + s`` with ``|s| < delta`` only the class ``[n0]`` contributes, so
    the solution equals ``theta([n0], t0 + s) e_{j0}``.
    """
    if table is None:
        table = CoefficientTable(A, L, Lambda)
    Lv = table.L
    lmax = max(Lv)
    t0, delta = as_fraction(t0), as_fraction(delta)
    key = tuple(int(k) for k in key)
    level = table.level(key)
    if not (level - lmax < t0 < level):
        raise ValueError("t0 must lie in (L . n0 - L_max, L . n0)")
    if delta <= 0:
        raise ValueError("delta must be positive")
    gaps = [2 * t0, level - t0, t0 - level + lmax]
    for _, lv in lattice_levels(Lv, level + lmax):
        if lv != level:
            gaps.append(abs(lv - level))
    if 2 * delta >= min(gaps):
        raise ValueError(f"delta too large: need 2*delta < {min(gaps)}")
    th = table.theta(key, t0)
    thc = np.abs(np.asarray(th, dtype=complex))
    col = thc.sum(axis=0)
    if not np.any(col > 0):
        raise ValueError("theta vanishes at this class and time; no witness")
    j0 = int(np.argmax(col))
    centre = t0 - level
    vec = np.zeros(table.d, dtype=complex)
    vec[j0] = 1
    return InitialCondition.indicator(lmax, centre - delta, centre + delta, vec)
