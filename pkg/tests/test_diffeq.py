import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import float_signal
from netwave.coefficients import CoefficientTable
from netwave.diffeq import (InitialCondition, Trajectory, adversarial_witness, evaluate_direct,
                            evaluate_representation, exponential_bound_check, lyapunov_theta,
                            simulate)
from netwave.ratlattice import DelayVector
from netwave.signals import SwitchingSignal


def scalar(a):
    return SwitchingSignal.constant([[[a]]])


def test_negative_times_return_history():
    u0 = InitialCondition.indicator(1, Fraction(-1, 2), Fraction(-1, 4), [3.0])
    A = scalar(0.5)
    assert evaluate_direct(u0, A, [1], Fraction(-3, 8))[0] == 3.0
    assert evaluate_direct(u0, A, [1], Fraction(-1, 8))[0] == 0.0


def test_geometric_decay():
    u0 = InitialCondition.constant([1.0], 1)
    A = scalar(0.5)
    for t in [Fraction(0), Fraction(1, 3), Fraction(5, 2), Fraction(7)]:
        assert evaluate_direct(u0, A, [1], t)[0] == 0.5 ** (math.floor(t) + 1)


def test_representation_small_times():
    rng = np.random.default_rng(0)
    A = float_signal(rng, 2, 2, -1, 3)
    u0 = InitialCondition(2, ["-1"], [[rng.normal(size=2)], [rng.normal(size=2), rng.normal(size=2)]])
    L = [Fraction(1), Fraction(2)]
    lam = DelayVector([[1], [2]], ["1"])
    for t in [Fraction(0), Fraction(1, 3), Fraction(9, 10)]:
        At = A(t)
        direct = At[0] @ u0(t - 1) + At[1] @ u0(t - 2)
        assert np.allclose(evaluate_representation(u0, A, L, lam, t), direct, atol=1e-13)


def test_zero_history_gives_zero():
    rng = np.random.default_rng(1)
    A = float_signal(rng, 2, 2, 0, 5)
    lam = DelayVector([[1], [2]], ["1"])
    u0 = InitialCondition.zero(2, 2)
    assert not evaluate_representation(u0, A, lam, lam, Fraction(17, 3)).any()


def test_representation_rejects_negative_time():
    lam = DelayVector([[1]], ["1"])
    with pytest.raises(ValueError):
        evaluate_representation(InitialCondition.constant([1.0], 1), scalar(1), lam, lam, -1)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_linearity(seed):
    rng = np.random.default_rng(seed)
    A = float_signal(rng, 2, 2, 0, 6)
    L = ["1", "3/2"]
    u = InitialCondition(Fraction(3, 2), ["-1/2"], [[rng.normal(size=2)], [rng.normal(size=2)]])
    v = InitialCondition(Fraction(3, 2), ["-1"], [[rng.normal(size=2)], [rng.normal(size=2)]])
    alpha, beta = rng.normal(), rng.normal()
    w = u.linear_combination(alpha, v, beta)
    t = Fraction(int(rng.integers(0, 60)), 7)
    lhs = evaluate_direct(w, A, L, t)
    rhs = alpha * evaluate_direct(u, A, L, t) + beta * evaluate_direct(v, A, L, t)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_causality(seed):
    rng = np.random.default_rng(seed)
    A = float_signal(rng, 2, 1, 0, 6)
    L = [Fraction(1), Fraction(3, 2)]
    t = Fraction(int(rng.integers(0, 40)), 7)
    # points of [-3/2, 0) that t can reach
    reach = set()
    for n1 in range(20):
        for n2 in range(20):
            s = t - n1 * L[0] - n2 * L[1]
            if -L[1] <= s < 0:
                reach.add(s)
    # a narrow indicator away from the reachable points leaves u(t) unchanged
    grid = [Fraction(k, 97) - Fraction(3, 2) for k in range(1, 140)]
    free = [s for s in grid if all(abs(s - r) > Fraction(1, 200) for r in reach)]
    s0 = free[int(rng.integers(0, len(free)))]
    base = InitialCondition.constant([1.0], Fraction(3, 2))
    bump = InitialCondition.indicator(Fraction(3, 2), s0 - Fraction(1, 400), s0 + Fraction(1, 400), [5.0])
    pert = base.linear_combination(1, bump, 1)
    assert (evaluate_direct(base, A, L, t) == evaluate_direct(pert, A, L, t)).all()


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_direct_matches_representation(seed):
    rng = np.random.default_rng(seed)
    lam = DelayVector([[2], [3]], ["1/2"])
    A = float_signal(rng, 2, 2, -1, 15)
    u0 = InitialCondition(Fraction(3, 2), ["-1/3"], [[rng.normal(size=2)], [rng.normal(size=2)]])
    table = CoefficientTable(A, lam.values, lam)
    for _ in range(10):
        t = Fraction(int(rng.integers(0, 15 * 12)), 12)
        a = evaluate_direct(u0, A, lam, t)
        b = evaluate_representation(u0, A, lam, lam, t, table)
        assert np.abs(a - b).max() <= 1e-10


def test_simulate_methods_agree_and_write(tmp_path):
    lam = DelayVector([[1], [2]], ["1/2"])
    rng = np.random.default_rng(2)
    A = float_signal(rng, 2, 1, 0, 4)
    u0 = InitialCondition.constant([1.0], 1)
    a = simulate(u0, A, lam, 3, Fraction(1, 8))
    b = simulate(u0, A, lam, 3, Fraction(1, 8), method="representation", Lambda=lam)
    assert np.allclose(a.values, b.values, atol=1e-12)
    a.write_csv(tmp_path / "u.csv")
    a.write_metadata(tmp_path / "u.json")
    head = (tmp_path / "u.csv").read_text().splitlines()[0]
    assert head == "time,re_u1,im_u1"
    assert '"method": "direct"' in (tmp_path / "u.json").read_text()


def test_lyapunov_scalar():
    est = lyapunov_theta([scalar(0.5)], [1], None, 40)
    assert abs(est.value - math.log(0.5)) <= 0.01
    assert est.window == (20, 40)


def test_lyapunov_zero_tuple_is_absent():
    est = lyapunov_theta([scalar(0.0)], [1], None, 9)
    assert est.value == -math.inf


def test_lyapunov_requires_long_horizon():
    with pytest.raises(ValueError):
        lyapunov_theta([scalar(0.5)], [1], None, 2)


def test_lyapunov_shift_scalar():
    mu = 0.3
    base = lyapunov_theta([scalar(0.5)], [1], None, 60).value
    moved = lyapunov_theta([scalar(0.5 * math.exp(mu))], [1], None, 60).value
    assert abs(moved - base - mu) <= 0.01


def test_lyapunov_shift_two_delays():
    # the bias of the truncated limsup is about mu * L_max / (horizon / 2)
    rng = np.random.default_rng(7)
    lam = DelayVector([[1], [2]], ["1"])
    A = float_signal(rng, 2, 1, 0, 30, n_breaks=3, scale=0.6)
    mu = 0.1
    base = lyapunov_theta([A], lam, lam, 30).value
    shifted = A.scaled([math.exp(mu * 1), math.exp(mu * 2)])
    moved = lyapunov_theta([shifted], lam, lam, 30).value
    assert abs(moved - base - mu) <= 0.01


def test_bound_check():
    u0 = InitialCondition.constant([1.0], 1)
    good = simulate(u0, scalar(0.5), [1], 20, Fraction(1, 4))
    assert exponential_bound_check([good], lambda t: 0.6 ** t).ok
    bad = simulate(u0, scalar(2.0), [1], 20, Fraction(1, 4))
    res = exponential_bound_check([bad], lambda t: 0.01)
    assert not res.ok and res.locus is not None
    zero = simulate(InitialCondition.zero(1, 1), scalar(2.0), [1], 5, Fraction(1, 4))
    assert exponential_bound_check([zero], lambda t: 1e-9).ok


def test_adversarial_witness_lower_bound():
    A = scalar(0.5)
    lam = DelayVector([[1]], ["1"])
    u0 = adversarial_witness(A, lam, lam, (3,), Fraction(5, 2), Fraction(1, 10))
    t = Fraction(5, 2) + Fraction(1, 20)
    u = evaluate_direct(u0, A, lam, t)
    # the only contributing class is [3]; theta there is a^3
    assert abs(u[0]) >= 0.5 ** 3 * u0.sup_norm() - 1e-15


def test_adversarial_witness_single_class():
    rng = np.random.default_rng(11)
    lam = DelayVector([[2], [3]], ["1/2"])
    A = float_signal(rng, 2, 2, -2, 10)
    table = CoefficientTable(A, lam.values, lam)
    key = (7,)
    t0 = Fraction(13, 4)
    delta = Fraction(1, 40)
    u0 = adversarial_witness(A, lam, lam, key, t0, delta, table)
    j0 = int(np.argmax(np.abs(u0(t0 - table.level(key)))))
    for s in [Fraction(-1, 80), Fraction(0), Fraction(1, 60)]:
        u = evaluate_direct(u0, A, lam, t0 + s)
        assert np.allclose(u, table.theta(key, t0 + s)[:, j0], atol=1e-13)


def test_adversarial_witness_rejections():
    lam = DelayVector([[1]], ["1"])
    with pytest.raises(ValueError):
        adversarial_witness(scalar(0.5), lam, lam, (3,), Fraction(5, 2), Fraction(1, 2))
    with pytest.raises(ValueError):
        adversarial_witness(scalar(0.0), lam, lam, (3,), Fraction(5, 2), Fraction(1, 10))


def test_trajectory_window_norms():
    tr = Trajectory([Fraction(k, 2) for k in range(-2, 5)], np.array([[1], [3], [2], [0], [0], [0], [1]]),
                    "direct", 1, Fraction(1))
    assert list(tr.window_norms()) == [1, 3, 3, 3, 2, 0, 1]
