"""Joint-spectral quantities for switched delay equations.

The growth rate of ``u(t) = sum_j A_j(t) u(t - L_j)`` under arbitrary
switching inside a finite family is governed by products of family
elements indexed by the levels ``Lambda . n``: a switching signal picks one
family element per level, and ``G(x)`` sums the ordered products along all
monotone lattice paths that reach level ``x``.  The growth of
``sup |G(x)|`` gives ``mu``; taking phases on the torus instead of levels
gives the autonomous radius ``rho_hs`` and its switched version ``mu_hs``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .diffeq import lattice_levels
from .ratlattice import DelayVector, as_fraction
from .signals import SwitchingSignal, matrix_tuple

__all__ = [
    "CapExceeded",
    "LevelLattice",
    "MuEstimate",
    "StabilityVerdict",
    "level_dp",
    "brute_force_level_sum",
    "mu_estimate",
    "rho_hs",
    "mu_hs_estimate",
    "spectral_radius",
    "stability_verdict_delays",
    "signal_from_choices",
    "lyapunov_upper_bound",
    "lyapunov_bounds",
    "DEFAULT_CAP",
]

DEFAULT_CAP = 10 ** 6


class CapExceeded(RuntimeError):
    """Exhaustive search would exceed the configured number of assignments."""


class LevelLattice:
    """Levels ``Lambda . n`` (``n`` in ``N^N``) up to a bound.

    Levels are identified by their class key ``B.T n``; numeric values of
    the generators only order them.  ``entries`` is a list of
    ``(value, key)`` sorted by value and then key.
    """

    def __init__(self, Lambda: DelayVector, upper, strict: bool = False):
        upper = as_fraction(upper)
        self.Lambda = Lambda
        vals = Lambda.values
        found: dict[tuple[int, ...], Fraction] = {}
        for n, v in lattice_levels(vals, upper):
            if strict and v == upper:
                continue
            found.setdefault(Lambda.key(n), v)
        self.entries = sorted(((v, k) for k, v in found.items()))
        self.value = {k: v for v, k in self.entries}

    @property
    def keys(self) -> list[tuple[int, ...]]:
        return [k for _, k in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def _family_array(family) -> list[np.ndarray]:
    fam = [matrix_tuple(np.asarray(b) if not isinstance(b, np.ndarray) else b) for b in family]
    if not fam:
        raise ValueError("family must be nonempty")
    shape = fam[0].shape
    if any(b.shape != shape for b in fam):
        raise ValueError("family elements must share shape (N, d, d)")
    return fam


def _predecessors(keys: Sequence[tuple[int, ...]], B) -> dict:
    present = set(keys)
    pred = {}
    for k in keys:
        lst = []
        for j, row in enumerate(B):
            p = tuple(a - b for a, b in zip(k, row))
            if p in present:
                lst.append((j, p))
        pred[k] = lst
    return pred


def _dp(keys, pred, choice_of, d, dtype=complex) -> dict:
    """``G(k) = sum_j G(k - B_j) @ choice(k - B_j)[j]`` over keys in level order."""
    G = {}
    eye = np.eye(d, dtype=dtype)
    for k in keys:
        if not any(k):
            G[k] = eye
            continue
        acc = np.zeros((d, d), dtype=dtype)
        for j, p in pred[k]:
            acc = acc + G[p] @ choice_of(p)[j]
        G[k] = acc
    return G


def level_dp(choices: Mapping, Lambda: DelayVector, x) -> np.ndarray:
    """Sum of ordered products over all monotone paths reaching level ``x``.

    Parameters
    ----------
    choices : mapping from class key to matrix tuple
        Family element used at each level below ``x``.
    Lambda : DelayVector
        Numeric delays.
    x : tuple of int or rational
        Target level, given by its key or by its value.
    """
    if isinstance(x, tuple):
        key = tuple(int(v) for v in x)
        xval = Lambda.level(key)
    else:
        xval = as_fraction(x)
        key = None
    lat = LevelLattice(Lambda, xval)
    if key is None:
        hits = [k for v, k in lat.entries if v == xval]
        if len(hits) != 1:
            raise ValueError(f"{xval} is not a single level of the lattice")
        key = hits[0]
    if key not in lat.value:
        raise ValueError("target key is not a reachable level")
    keys = [k for v, k in lat.entries if v <= xval]
    missing = [k for v, k in lat.entries if v < xval and k not in choices]
    if missing:
        raise ValueError(f"choice map misses levels {missing[:3]}")
    first = next(iter(choices.values()), None)
    if first is None:
        d = 1
    else:
        d = np.asarray(first).shape[1]
    exact = first is not None and np.asarray(first).dtype == object
    pred = _predecessors(keys, Lambda.B)
    if exact:
        from .signals import identity_like, zeros_like
        G = {}
        for k in keys:
            if not any(k):
                G[k] = identity_like(d, True)
                continue
            acc = zeros_like(d, True)
            for j, p in pred[k]:
                acc = acc + G[p] @ np.asarray(choices[p])[j]
            G[k] = acc
        return G[key]
    G = _dp(keys, pred, lambda p: np.asarray(choices[p], dtype=complex), d)
    return G[key]


def brute_force_level_sum(choices: Mapping, Lambda: DelayVector, key: Sequence[int]) -> np.ndarray:
    """Direct enumeration of every path to every member of the class."""
    from .ratlattice import class_members
    key = tuple(key)
    first = np.asarray(next(iter(choices.values())))
    d = first.shape[1]
    exact = first.dtype == object
    from .signals import identity_like, zeros_like
    acc = zeros_like(d, exact)
    for n in class_members(key, Lambda):
        steps = [j for j in range(Lambda.N) for _ in range(n[j])]
        for v in set(itertools.permutations(steps)):
            prod = identity_like(d, exact)
            pos = [0] * Lambda.N
            for j in v:
                prod = prod @ np.asarray(choices[Lambda.key(pos)])[j]
                pos[j] += 1
            acc = acc + prod
    return acc


def _norm_inf(M: np.ndarray) -> float:
    return float(np.abs(M).sum(axis=-1).max(axis=-1)) if M.ndim == 2 else np.abs(M).sum(axis=-1).max(axis=-1)


def _tail_fit(xs: Sequence[float], sups: Sequence[float]) -> float | None:
    """``exp`` of the least-squares slope of ``ln sup`` against ``x``."""
    pts = [(x, math.log(s)) for x, s in zip(xs, sups) if s > 0 and x > 0]
    if len(pts) < 2:
        return None
    xv = np.array([p[0] for p in pts])
    yv = np.array([p[1] for p in pts])
    if np.ptp(xv) == 0:
        return None
    slope = np.polyfit(xv, yv, 1)[0]
    return float(math.exp(slope))


@dataclass
class MuEstimate:
    """Truncated estimate of a growth rate.

    Attributes
    ----------
    value : float
        Tail estimate: ``exp`` of the least-squares slope of ``ln sup|G|``
        over the tail window.  The fit removes the constant prefactor that
        biases ``sup|G(x)|^(1/x)`` at finite ``x``.
    lower : float
        Maximum over the tail window of ``sup|G(x)|^(1/x)``.  Under
        exhaustive search it is nondecreasing in the family; under sampled
        search it is a lower bound for the exhaustive value.
    margin : float
        ``|value - lower|``, the disagreement between the two truncations.
    values : dict
        Per level (or per path length) ``sup|G|^(1/x)``.
    """

    value: float
    lower: float
    margin: float
    values: dict
    sups: dict
    window: tuple
    exhaustive: bool
    seed: int | None = None
    assignments: int = 0

    def to_json(self) -> dict:
        return {
            "value": self.value, "lower": self.lower, "margin": self.margin,
            "window": [str(w) for w in self.window], "exhaustive": self.exhaustive,
            "seed": self.seed, "assignments": self.assignments,
            "levels": [{"level": str(k), "value": v} for k, v in self.values.items()],
        }


def _summarize(levels: Sequence, sups: Sequence[float], lo, hi, exhaustive, seed, count) -> MuEstimate:
    values = {}
    tail_x, tail_s, tail_v = [], [], []
    for x, s in zip(levels, sups):
        if x <= 0:
            continue
        v = s ** (1.0 / float(x)) if s > 0 else 0.0
        values[x] = v
        if lo <= x <= hi:
            tail_x.append(float(x))
            tail_s.append(s)
            tail_v.append(v)
    lower = max(tail_v) if tail_v else 0.0
    fit = _tail_fit(tail_x, tail_s)
    value = lower if fit is None else fit
    if lower == 0.0:
        value = 0.0
    return MuEstimate(value, lower, abs(value - lower), values,
                      dict(zip(levels, sups)), (lo, hi), exhaustive, seed, count)


def mu_estimate(Lambda: DelayVector, family, x_max, search: str = "exhaustive",
                samples: int = 200, cap: int = DEFAULT_CAP, seed: int = 0) -> MuEstimate:
    """Estimate ``mu`` from the level products up to ``x_max``.

    Parameters
    ----------
    Lambda : DelayVector
        Numeric delays.
    family : sequence of matrix tuples
        The finite family of admissible values.
    x_max : rational
        Largest level considered; the tail window is ``[x_max/2, x_max]``.
    search : {"exhaustive", "sampled"}
        Exhaustive enumerates every assignment of family elements to the
        levels below ``x_max`` and refuses when their number exceeds
        ``cap``.  Sampled draws ``samples`` random assignments and improves
        each by coordinate ascent; its per-level values are lower bounds.
    """
    x_max = as_fraction(x_max)
    fam = _family_array(family)
    d = fam[0].shape[1]
    lat = LevelLattice(Lambda, x_max)
    keys = lat.keys
    levels = [lat.value[k] for k in keys]
    pred = _predecessors(keys, Lambda.B)
    choice_keys = [k for k in keys if lat.value[k] < x_max]
    nb = len(fam)
    lo, hi = x_max / 2, x_max
    if nb == 1:
        G = _dp(keys, pred, lambda p: fam[0], d)
        sups = [_norm_inf(G[k]) for k in keys]
        return _summarize(levels, sups, lo, hi, True, None, 1)
    if search == "exhaustive":
        total = nb ** len(choice_keys)
        if total > cap:
            raise CapExceeded(f"{nb}^{len(choice_keys)} assignments exceed cap {cap}")
        branch = [lat.value[k] < x_max for k in keys]
        sups = _exhaustive_levels(keys, pred, fam, d, branch)
        return _summarize(levels, sups, lo, hi, True, None, total)
    if search != "sampled":
        raise ValueError(f"unknown search mode {search!r}")
    rng = np.random.default_rng(seed)
    sups = np.zeros(len(keys))
    tail = [i for i, x in enumerate(levels) if lo <= x <= hi and x > 0]
    count = 0

    def evaluate(assign: dict) -> np.ndarray:
        G = _dp(keys, pred, lambda p: fam[assign[p]], d)
        return np.array([_norm_inf(G[k]) for k in keys])

    def score(norms: np.ndarray) -> float:
        vals = [norms[i] ** (1.0 / float(levels[i])) for i in tail if norms[i] > 0]
        return max(vals) if vals else 0.0

    for _ in range(samples):
        assign = {k: int(rng.integers(nb)) for k in choice_keys}
        norms = evaluate(assign)
        count += 1
        np.maximum(sups, norms, out=sups)
        best = score(norms)
        improved = True
        while improved:
            improved = False
            for k in choice_keys:
                keep = assign[k]
                for c in range(nb):
                    if c == keep:
                        continue
                    assign[k] = c
                    trial = evaluate(assign)
                    count += 1
                    np.maximum(sups, trial, out=sups)
                    s = score(trial)
                    if s > best + 1e-15:
                        best, keep, improved = s, c, True
                assign[k] = keep
    return _summarize(levels, list(sups), lo, hi, False, seed, count)


def _exhaustive_levels(keys, pred, fam, d, branch) -> list[float]:
    """Per-level sup of ``|G|`` over every assignment, by depth-first search.

    ``G`` at the ``i``-th level only depends on the choices at earlier
    levels, so the search fixes choices level by level and shares prefixes.
    """
    n = len(keys)
    sups = [0.0] * n
    G: dict = {}
    assign: dict = {}
    eye = np.eye(d, dtype=complex)

    def rec(i: int) -> None:
        if i == n:
            return
        k = keys[i]
        if not any(k):
            g = eye
        else:
            g = np.zeros((d, d), dtype=complex)
            for j, p in pred[k]:
                g = g + G[p] @ fam[assign[p]][j]
        G[k] = g
        nrm = _norm_inf(g)
        if nrm > sups[i]:
            sups[i] = nrm
        if i == n - 1:
            return
        if not branch[i]:
            rec(i + 1)
            return
        for c in range(len(fam)):
            assign[k] = c
            rec(i + 1)
        del assign[k]

    rec(0)
    return sups


def spectral_radius(M: np.ndarray, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """Largest eigenvalue modulus; dense for ``d <= 64``, power iteration above."""
    M = np.asarray(M, dtype=complex)
    d = M.shape[-1]
    if d <= 64:
        return float(np.abs(np.linalg.eigvals(M)).max(axis=-1)) if M.ndim == 2 else \
            np.abs(np.linalg.eigvals(M)).max(axis=-1)
    if M.ndim != 2:
        return np.array([spectral_radius(m, tol, max_iter) for m in M])
    rng = np.random.default_rng(0)
    x = rng.normal(size=d) + 1j * rng.normal(size=d)
    x /= np.linalg.norm(x)
    est = 0.0
    # norms of powers converge to the radius even for complex dominant pairs
    logsum = 0.0
    for k in range(1, max_iter + 1):
        y = M @ x
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        logsum += math.log(nrm)
        x = y / nrm
        new = math.exp(logsum / k)
        if k > 50 and abs(new - est) <= tol * max(1.0, new):
            return new
        est = new
    return est


def _torus_grid(h: int, m: int, chunk: int = 1 << 16):
    """Yield chunks of points of the uniform ``m^h`` grid of ``[0, 2 pi)^h``."""
    total = m ** h
    base = 2 * np.pi * np.arange(m) / m
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        pts = np.empty((idx.size, h))
        rem = idx.copy()
        for c in range(h - 1, -1, -1):
            pts[:, c] = base[rem % m]
            rem //= m
        yield pts


def rho_hs(Lambda: DelayVector, A, m: int = 256) -> float:
    """Max over the phase torus of ``rho(sum_j A_j exp(i (B nu)_j))``."""
    if m < 2:
        raise ValueError("grid resolution must be at least 2")
    A = matrix_tuple(A, exact=False)
    B = np.array(Lambda.B, dtype=float)
    best = 0.0
    for nu in _torus_grid(Lambda.h, m):
        phases = np.exp(1j * (nu @ B.T))
        Ms = np.einsum("gj,jab->gab", phases, A)
        r = spectral_radius(Ms)
        best = max(best, float(np.max(r)))
    return best


def mu_hs_estimate(Lambda: DelayVector, family, n_max: int, m: int = 64, search: str = "exhaustive",
                   samples: int = 50, cap: int = DEFAULT_CAP, seed: int = 0) -> MuEstimate:
    """Switched analogue of ``rho_hs`` from path products of length ``n``.

    For each length ``n <= n_max`` takes the sup over the phase grid and
    over the level assignments of
    ``|sum_{|v| = n} prod_k B^{level}_{v_k} exp(i theta_{v_k})|^(1/n)``.
    The phases only depend on the class key of the endpoint, so the
    dynamic program runs over ``(key, length)`` without phases and the
    phase sum is applied per length.
    """
    fam = _family_array(family)
    d = fam[0].shape[1]
    N = Lambda.N
    B = Lambda.B
    layers: list[list[tuple[int, ...]]] = [[tuple([0] * Lambda.h)]]
    for n in range(1, n_max + 1):
        nxt = set()
        for k in layers[-1]:
            for row in B:
                nxt.add(tuple(a + b for a, b in zip(k, row)))
        layers.append(sorted(nxt))
    choice_keys = sorted({k for layer in layers[:-1] for k in layer})
    nb = len(fam)
    rng = np.random.default_rng(seed)
    if nb == 1:
        assignments = [None]
        exhaustive = True
    elif search == "exhaustive":
        if nb ** len(choice_keys) > cap:
            raise CapExceeded(f"{nb}^{len(choice_keys)} assignments exceed cap {cap}")
        assignments = itertools.product(range(nb), repeat=len(choice_keys))
        exhaustive = True
    elif search == "sampled":
        assignments = (tuple(rng.integers(nb, size=len(choice_keys))) for _ in range(samples))
        exhaustive = False
    else:
        raise ValueError(f"unknown search mode {search!r}")
    sups = np.zeros(n_max + 1)
    grids = list(_torus_grid(Lambda.h, m, chunk=1 << 15))
    count = 0
    for assign in assignments:
        count += 1
        pick = (lambda k: fam[0]) if assign is None else \
            (lambda k, a=dict(zip(choice_keys, assign)): fam[a[k]])
        prev = {layers[0][0]: np.eye(d, dtype=complex)}
        for n in range(1, n_max + 1):
            cur = {}
            for k, g in prev.items():
                b = pick(k)
                for j in range(N):
                    nk = tuple(a + c for a, c in zip(k, B[j]))
                    term = g @ b[j]
                    cur[nk] = cur[nk] + term if nk in cur else term
            prev = cur
            keys = list(cur)
            K = np.array(keys, dtype=float)
            Gs = np.array([cur[k] for k in keys])
            for nu in grids:
                E = np.exp(1j * (nu @ K.T))
                T = np.einsum("gk,kab->gab", E, Gs)
                val = float(np.abs(T).sum(axis=-1).max(axis=-1).max())
                if val > sups[n]:
                    sups[n] = val
    lengths = list(range(n_max + 1))
    return _summarize(lengths, list(sups), Fraction(n_max, 2), Fraction(n_max), exhaustive,
                      None if exhaustive else seed, count)


@dataclass
class StabilityVerdict:
    """Outcome of the switched-delay stability test."""

    status: str
    margin: float
    mu: MuEstimate
    lyapunov: float
    details: dict = field(default_factory=dict)

    @property
    def stable(self) -> bool | None:
        return {"stable": True, "unstable": False}.get(self.status)

    def to_json(self) -> dict:
        return {"status": self.status, "stable": self.stable, "margin": self.margin,
                "mu": self.mu.to_json(), "lyapunov": self.lyapunov, **self.details}


def _scaled_family(fam, Lambda: DelayVector, nu: float):
    w = np.exp(-nu * np.array([float(v) for v in Lambda.values]))
    return [b * w[:, None, None] for b in fam]


def stability_verdict_delays(Lambda: DelayVector, family, x_max=None, cap: int = DEFAULT_CAP,
                             rel_margin: float = 0.02, bisect_tol: float = 1e-4) -> StabilityVerdict:
    """Decide ``mu < 1`` for the family, refusing near the boundary.

    The margin is the larger of the truncation disagreement of the
    estimate and ``rel_margin`` times the estimate.  The exponent is also
    located by bisection on ``nu`` with the family rescaled by
    ``exp(-nu Lambda_j)``, which moves every ``mu`` estimate down by
    ``exp(-nu)``.
    """
    fam = _family_array(family)
    if x_max is None:
        x_max = 20 * max(Lambda.values)
    est = mu_estimate(Lambda, fam, x_max, "exhaustive", cap=cap)
    margin = max(est.margin, rel_margin * est.value)
    if est.value + margin < 1:
        status = "stable"
    elif est.value - margin > 1:
        status = "unstable"
    else:
        status = "inconclusive"
    lam = _bisect_exponent(Lambda, fam, x_max, cap, bisect_tol, est)
    return StabilityVerdict(status, margin, est, lam,
                            {"x_max": str(as_fraction(x_max)), "cap": cap,
                             "rel_margin": rel_margin})


def _bisect_exponent(Lambda, fam, x_max, cap, tol, est0) -> float:
    if est0.value == 0.0:
        return -math.inf

    def mu_at(nu: float) -> float:
        return mu_estimate(Lambda, _scaled_family(fam, Lambda, nu), x_max, "exhaustive",
                           cap=cap).value

    lo, hi = -1.0, 1.0
    while mu_at(lo) < 1:
        lo *= 2
        if lo < -1e6:
            return -math.inf
    while mu_at(hi) >= 1:
        hi *= 2
        if hi > 1e6:
            return math.inf
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if mu_at(mid) < 1:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def lyapunov_upper_bound(Lambda: DelayVector, L, mu: float) -> float:
    """Upper bound ``m1 ln mu`` for the exponent with delays ``L``.

    ``m1`` is the smallest ratio ``Lambda_j / L_j`` when ``mu < 1`` and the
    largest one otherwise.
    """
    from .ratlattice import as_rational_vector
    Lv = as_rational_vector(L)
    ratios = [float(a / b) for a, b in zip(Lambda.values, Lv)]
    if mu <= 0:
        return -math.inf
    m1 = min(ratios) if mu < 1 else max(ratios)
    return m1 * math.log(mu)


def lyapunov_bounds(Lambda: DelayVector, L, mu: float, exponent: float | None = None,
                    same_relations: bool = False) -> tuple[float, float]:
    """Two-sided bracket for the exponent with delays ``L``.

    The upper end is ``m1 ln mu``.  When ``L`` has exactly the relations of
    ``Lambda`` (``same_relations``) and the exponent for ``Lambda`` is known,
    the bracket tightens to ``[m2 exponent, min(m1 ln mu, m1 exponent)]``;
    otherwise the lower end is ``-inf``.
    """
    from .ratlattice import as_rational_vector
    Lv = as_rational_vector(L)
    ratios = [float(a / b) for a, b in zip(Lambda.values, Lv)]
    upper = lyapunov_upper_bound(Lambda, Lv, mu)
    if not same_relations or exponent is None or not math.isfinite(exponent):
        return -math.inf, upper
    stable = mu < 1
    m1 = min(ratios) if stable else max(ratios)
    m2 = max(ratios) if stable else min(ratios)
    hi = min(upper, m1 * exponent)
    # bisection tolerance can invert the bracket by a hair
    return min(m2 * exponent, hi), hi


def signal_from_choices(choices: Mapping, Lambda: DelayVector, zeta, filler=None) -> SwitchingSignal:
    """Piecewise-constant signal equal to ``choices[x]`` near time ``-x``.

    On ``(-x - zeta, -x + zeta)`` the signal takes the family element
    chosen for level ``x`` and elsewhere the ``filler`` (by default the
    choice at the lowest level), so that the class sums at time 0
    reproduce the level products of :func:`level_dp`.
    """
    zeta = as_fraction(zeta)
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    items = sorted(((Lambda.level(k), tuple(k)) for k in choices), reverse=True)
    if filler is None:
        if not items:
            raise ValueError("need a filler value when no choices are given")
        filler = choices[items[-1][1]]
    filler = matrix_tuple(filler)
    vals = [v for v, _ in items]
    gaps = [a - b for a, b in zip(vals, vals[1:])]
    if gaps and 2 * zeta >= min(gaps):
        raise ValueError(f"zeta too large: need zeta < {min(gaps) / 2}")
    bps, values = [], [filler]
    for v, k in items:
        bps += [-v - zeta, -v + zeta]
        values += [matrix_tuple(choices[k]), filler]
    return SwitchingSignal(bps, values)
