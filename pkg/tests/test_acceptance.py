"""Acceptance criteria, one test each, printing a PASS/FAIL line at its tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the report lines.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from helpers import (bump, exact_signal, float_signal, random_network, single_edge_network,
                     star_network, triangle_network, two_undamped_network)
from netwave.coefficients import CoefficientTable, xi, xi_pathsum, xi_reverse
from netwave.diffeq import InitialCondition, evaluate_direct, evaluate_representation, lyapunov_theta
from netwave.ratlattice import DelayVector
from netwave.signals import SwitchingSignal
from netwave.spectral import mu_estimate, mu_hs_estimate, rho_hs, stability_verdict_delays
from netwave.transport import grid_counts, trapezoid
from netwave.wavenet import (DampingSet, DampingSignal, Network, WaveState, build_M, build_R,
                             check_M_identity, check_RM, dalembert_forward, dalembert_inverse,
                             decay_rate_fit, energy_identity_residual, path_to_vertex,
                             periodic_witness, simulate_wave, stability_verdict_wave)


def report(number: int, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    in_time = elapsed < budget
    status = "PASS" if ok and in_time else "FAIL"
    print(f"\n{status} criterion {number}: {detail} [{elapsed:.2f} s, budget {budget:.0f} s]")
    assert ok, detail
    assert in_time, f"took {elapsed:.1f} s, budget {budget} s"


def multi_indices(N: int, total: int):
    if N == 1:
        yield (total,)
        return
    for k in range(total + 1):
        for rest in multi_indices(N - 1, total - k):
            yield (k,) + rest


def test_criterion_01_coefficient_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    mismatches = checked = 0
    for s in range(50):
        N = 1 + s % 3
        d = 1 + (s // 3) % 3
        L = [Fraction(int(rng.integers(1, 5)), int(rng.integers(1, 3))) for _ in range(N)]
        A = exact_signal(rng, N, d, -8, 2, n_breaks=3)
        t = Fraction(int(rng.integers(-6, 7)), 3)
        table = CoefficientTable(A, L)
        for total in range(7):
            for n in multi_indices(N, total):
                a = table.xi(n, t)
                checked += 1
                if not ((a == xi_pathsum(n, t, A, L)).all() and (a == xi_reverse(n, t, A, L)).all()
                        and (a == xi(n, t, A, L)).all()):
                    mismatches += 1
    report(1, mismatches == 0, f"{checked} coefficients over 50 signals, {mismatches} exact mismatches",
           time.perf_counter() - t0, 60)


def delay_systems():
    """Ten delay structures, rationally dependent and independent."""
    return [
        (DelayVector([[1], [2]], ["1"]), 1),
        (DelayVector([[1], [2]], ["1/2"]), 1),
        (DelayVector([[2], [3]], ["1/3"]), 2),
        (DelayVector.symbolic([[1, 0], [0, 1]]), None),
        (DelayVector([[1], [1], [2]], ["3/4"]), 1),
        (DelayVector([[1, 0], [0, 1], [1, 1]], ["1", "2/5"]), None),
        (DelayVector([[1]], ["1"]), 2),
        (DelayVector([[3], [5]], ["1/4"]), 1),
        (DelayVector.symbolic([[1, 0], [1, 1]]), None),
        (DelayVector([[1], [3]], ["2/3"]), 2),
    ]


def test_criterion_02_representation_vs_direct():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    count = 0
    for lam, d in delay_systems():
        d = d or 2
        if lam.is_symbolic:
            # trivial kernel: any rational delays respect the (empty) relations
            L = [Fraction(int(rng.integers(2, 7)), int(rng.integers(1, 4))) for _ in range(lam.N)]
            lmax = max(L)
        else:
            L = lam
            lmax = max(lam.values)
        horizon = 10 * lmax
        A = float_signal(rng, lam.N, d, -lmax, horizon, n_breaks=6)
        u0 = InitialCondition(lmax, [-lmax / 2], [[rng.normal(size=d)], [rng.normal(size=d)]])
        table = CoefficientTable(A, L.values if isinstance(L, DelayVector) else L, lam)
        for _ in range(10):
            t = horizon * Fraction(int(rng.integers(1, 10 ** 4)), 10 ** 4)
            a = evaluate_direct(u0, A, L, t)
            b = evaluate_representation(u0, A, L, lam, t, table)
            worst = max(worst, float(np.abs(a - b).max()))
            count += 1
    report(2, worst <= 1e-10, f"max |representation - direct| = {worst:.2e} over {count} times "
           f"(tol 1e-10)", time.perf_counter() - t0, 60)


def test_criterion_03_scalar_benchmark():
    t0 = time.perf_counter()
    L1 = DelayVector([[1]], ["1"])
    target = math.log(0.5)
    theta = lyapunov_theta([SwitchingSignal.constant([[[0.5]]])], L1, L1, 60).value
    bis = stability_verdict_delays(L1, [np.array([[[0.5]]])]).lyapunov
    ok = abs(theta - target) <= 0.02 and abs(bis - target) <= 0.02
    report(3, ok, f"lyapunov_theta {theta:.4f}, bisection {bis:.4f}, target {target:.4f} (tol 0.02)",
           time.perf_counter() - t0, 10)


def test_criterion_04_companion_oracle():
    t0 = time.perf_counter()
    L12 = DelayVector([[1], [2]], ["1"])
    roots = np.roots([1, -0.25, -0.125])
    rho = float(np.abs(roots).max())
    est = mu_estimate(L12, [np.array([[[0.25]], [[0.125]]])], 40)
    rel = abs(est.value - rho) / rho
    report(4, rel <= 0.01, f"mu {est.value:.6f} vs root modulus {rho:.6f}, rel err {rel:.2e} "
           f"(tol 1e-2)", time.perf_counter() - t0, 30)


def test_criterion_05_mu_hs_matches_rho_hs():
    t0 = time.perf_counter()
    cases = [(DelayVector([[1], [2]], ["1"]), s) for s in range(5)]
    cases += [(DelayVector.symbolic([[1, 0], [0, 1]]), s) for s in range(2)]
    worst = 0.0
    for lam, seed in cases:
        A = 0.5 * np.random.default_rng(seed).normal(size=(2, 2, 2))
        rho = rho_hs(lam, A, 512)
        mu = mu_hs_estimate(lam, [A], 20, m=512).value
        worst = max(worst, abs(mu - rho) / rho)
    report(5, worst <= 0.02, f"max rel |mu_HS - rho_HS| = {worst:.2e} over {len(cases)} tuples "
           f"(tol 2e-2)", time.perf_counter() - t0, 120)


def test_criterion_06_algebraic_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    worst_m = worst_r = 0.0
    for _ in range(100):
        net = random_network(rng)
        eta = rng.uniform(0, 5, size=len(net.damped))
        M = build_M(net, eta)
        worst_m = max(worst_m, check_M_identity(M, net, eta))
        worst_r = max(worst_r, check_RM(build_R(net), M))
    ok = worst_m <= 1e-12 and worst_r <= 1e-12
    report(6, ok, f"M identity residual {worst_m:.2e}, RM = R residual {worst_r:.2e} (tol 1e-12)",
           time.perf_counter() - t0, 30)


def random_state(net, step, rng):
    counts = grid_counts(net.lengths, step)
    pots = {q: rng.normal() for q in net.vertices}
    return WaveState.from_potentials(net, step, pots, [rng.normal(size=K + 1) for K in counts],
                                     [rng.normal(size=K + 1) for K in counts])


def test_criterion_07_dalembert_roundtrips():
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    st_err = ts_err = 0.0
    h = Fraction(1, 32)
    for _ in range(20):
        net = random_network(rng)
        s = random_state(net, h, rng)
        f = dalembert_forward(s)
        back = dalembert_inverse(f, net, h)
        st_err = max(st_err, max(float(np.abs(a - b).max()) for a, b in zip(back.du, s.du)),
                     max(float(np.abs(a - b).max()) for a, b in zip(back.v, s.v)))
        again = dalembert_forward(back)
        ts_err = max(ts_err, max(float(np.abs(a - b).max()) for a, b in zip(again, f)))
    net = star_network((1, Fraction(1, 2), Fraction(3, 2)))
    hf = Fraction(1, 1000)
    s = random_state(net, hf, rng)
    scaled = sum(trapezoid((p / math.sqrt(2)) ** 2, float(hf)) for p in dalembert_forward(s))
    unit = abs(scaled - s.energy()) / s.energy()
    ok = st_err <= 1e-10 and ts_err <= 1e-8 and unit <= 1e-5
    report(7, ok, f"S(T(x)) err {st_err:.2e} (tol 1e-10), T(S(f)) err {ts_err:.2e} (tol 1e-8), "
           f"unitarity rel err {unit:.2e} at h=1e-3 (tol 1e-5)", time.perf_counter() - t0, 30)


def test_criterion_08_energy_identity_halving():
    t0 = time.perf_counter()
    net = single_edge_network()
    res = []
    for n in (128, 256):
        h = Fraction(1, n)
        s = WaveState(net, h, [bump(n)], [np.zeros(n + 1)])
        tr = simulate_wave(s, None, [Fraction(1, 2)], 4, sample_every=4)
        res.append(energy_identity_residual(tr))
    ratio = res[0] / res[1]
    report(8, 3.5 <= ratio <= 4.5, f"residuals {res[0]:.3e} -> {res[1]:.3e}, halving ratio "
           f"{ratio:.3f} (want [3.5, 4.5])", time.perf_counter() - t0, 30)


STEP = Fraction(1, 64)


def bump_state(net, step):
    counts = grid_counts(net.lengths, step)
    return WaveState.from_potentials(net, step, {}, [bump(K) for K in counts],
                                     [np.zeros(K + 1) for K in counts])


def path_network(lengths=(1, 1)):
    return Network({"u": "undamped", "c": "interior", "d": "damped"},
                   [("u", "c"), ("c", "d")], list(lengths))


def double_star_network(lengths=(1, 1, 1, 1, 1)):
    return Network({"p": "interior", "q": "interior", "u": "undamped", "d1": "damped",
                    "d2": "damped", "d3": "damped"},
                   [("p", "q"), ("u", "p"), ("p", "d1"), ("q", "d2"), ("d3", "q")], list(lengths))


def battery():
    """(name, network, damping set, witness path chooser or None)."""
    star = star_network()
    return [
        ("star", star, DampingSet(box=[[0.5, 2], [0.5, 2]]), None),
        ("path", path_network(), DampingSet(box=[[0.5, 2]]), None),
        ("double-star", double_star_network(), DampingSet(box=[[0.5, 2]] * 3), None),
        ("star-eta-zero", star, DampingSet(box=[[0, 2], [0.5, 2]]),
         lambda net: path_to_vertex(net, "d1")),
        ("triangle", triangle_network(), DampingSet(box=[[0.5, 2]]), "auto"),
        ("two-undamped", two_undamped_network(), DampingSet(box=[[0.5, 2]]), "auto"),
    ]


def run_case(net, dset, witness, horizon=20, seed=0):
    """Verdict plus the simulated energy rate and spread for one network."""
    verdict = stability_verdict_wave(net, dset)
    lo = [a for a, _ in dset.box]
    hi = [b for _, b in dset.box]
    if witness is None:
        state, sim_net = bump_state(net, STEP), net
    else:
        w = periodic_witness(net, None if witness == "auto" else witness(net), step=STEP)
        state, sim_net = w.state, w.network
    rng = np.random.default_rng(seed)
    bps = sorted({STEP * int(k) for k in rng.integers(1, horizon / STEP, size=20)})
    vals = [[float(rng.uniform(a, b)) if a > 0 or witness is None else 0.0
             for a, b in zip(lo, hi)] for _ in range(len(bps) + 1)]
    tr = simulate_wave(state, sim_net, DampingSignal(bps, vals), horizon)
    fit = decay_rate_fit(tr.times, tr.energy)
    return verdict, fit["rate"], tr


def test_criterion_09_topology_battery():
    t0 = time.perf_counter()
    lines = []
    ok = True
    for name, net, dset, witness in battery():
        verdict, rate, tr = run_case(net, dset, witness)
        if witness is None:
            mono = float(np.diff(tr.energy).max())
            good = verdict.stable and rate < -0.01 and mono <= 1e-12
            lines.append(f"{name}: stable={verdict.stable} rate {rate:.4f} (< -0.01), "
                         f"max increase {mono:.1e} (tol 1e-12)")
        else:
            spread = float(np.ptp(tr.energy))
            good = not verdict.stable and spread <= 1e-8
            lines.append(f"{name}: stable={verdict.stable} witness energy spread {spread:.1e} "
                         f"over 20 periods (tol 1e-8)")
        ok &= good
    report(9, ok, "; ".join(lines), time.perf_counter() - t0, 300)


def test_criterion_10_rescaling_robustness():
    t0 = time.perf_counter()
    lines = []
    ok = True
    for name, net, dset, witness in battery():
        scaled = net.with_lengths(net.delays.scaled(Fraction(3, 2)))
        v0, r0, _ = run_case(net, dset, witness, seed=1)
        v1, r1, _ = run_case(scaled, dset, witness, seed=1)
        same_sign = (r0 < -0.01 and r1 < -0.01) if witness is None else \
            (abs(r0) <= 1e-8 and abs(r1) <= 1e-8)
        good = v0.stable == v1.stable and v0.reasons == v1.reasons and same_sign
        ok &= good
        lines.append(f"{name}: stable {v0.stable}/{v1.stable}, rate {r0:.4f}/{r1:.4f}")
    report(10, ok, "; ".join(lines), time.perf_counter() - t0, 300)
