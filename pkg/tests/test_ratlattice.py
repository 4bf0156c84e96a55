import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netwave.ratlattice import (DelayVector, as_fraction, class_key, class_members,
                                integer_kernel, membership_V, membership_W)


def test_kernel_examples():
    assert integer_kernel([[1], [2]]) == [(2, -1)]
    assert integer_kernel([[1, 0], [0, 1]]) == []
    assert integer_kernel([[1, 0], [0, 1], [1, 1]]) == [(1, 1, -1)]


def test_kernel_rejects_rank_deficiency():
    with pytest.raises(ValueError):
        integer_kernel([[1, 2], [2, 4]])


def test_delay_vector_invariants():
    with pytest.raises(ValueError):
        DelayVector([[1], [0]], ["1"])
    with pytest.raises(ValueError):
        DelayVector([[1], [-1]], ["1"])
    with pytest.raises(ValueError):
        DelayVector([[1]], ["-1"])
    with pytest.raises(TypeError):
        as_fraction(0.5)
    d = DelayVector([[1, 0], [1, 1]], ["1/2", "1/3"])
    assert d.values == (Fraction(1, 2), Fraction(5, 6))


def test_class_key_examples():
    lam = DelayVector([[1], [2]], ["1"])
    assert class_key((0, 0), lam) == (0,)
    assert class_key((2, 0), lam) == class_key((0, 1), lam) == (2,)
    assert class_key((1, 0), lam) != class_key((0, 1), lam)


def test_class_members_examples():
    lam = DelayVector([[1], [2]], ["1"])
    assert class_members((2,), lam) == [(0, 1), (2, 0)]
    assert class_members((-1,), lam) == []
    ident = DelayVector.symbolic([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert class_members((2, 0, 3), ident) == [(2, 0, 3)]


def test_membership_V_examples():
    lam = DelayVector([[1], [2]], ["1"])
    assert membership_V(lam, lam) == (True, (Fraction(1),))
    assert membership_V(["1", "3"], lam)[0] is False
    assert membership_V(["3/2", "3"], lam) == (True, (Fraction(3, 2),))
    with pytest.raises(ValueError):
        membership_V(["1"], lam)


def test_membership_W_examples():
    a = DelayVector.symbolic([[1], [2]])
    assert membership_W(a, a)
    assert not membership_W(DelayVector.symbolic([[1, 0], [0, 1]]), a)
    assert membership_W(DelayVector.symbolic([[2], [2]]), DelayVector.symbolic([[1], [1]]))
    with pytest.raises(ValueError):
        membership_W(DelayVector([[1], [2]], ["1"]), a)


def test_json_roundtrip():
    d = DelayVector([[1, 0], [1, 2]], ["1/2", "2/3"])
    assert DelayVector.from_json(d.to_json()).values == d.values
    s = DelayVector.symbolic([[1], [3]])
    assert DelayVector.from_json(s.to_json()).is_symbolic


# integer matrices with nonnegative entries, nonzero rows and full column rank
matrices = st.integers(1, 4).flatmap(lambda N: st.integers(1, N).flatmap(
    lambda h: st.lists(st.lists(st.integers(0, 3), min_size=h, max_size=h)
                       .filter(any), min_size=N, max_size=N)))


def _valid(B):
    try:
        DelayVector.symbolic(B)
    except ValueError:
        return False
    return True


@settings(max_examples=60, deadline=None)
@given(matrices.filter(_valid))
def test_kernel_vectors_annihilate(B):
    for z in integer_kernel(B):
        assert all(sum(z[i] * B[i][k] for i in range(len(B))) == 0 for k in range(len(B[0])))
    assert len(integer_kernel(B)) == len(B) - len(B[0])


def _small_indices(N, bound):
    for n in itertools.product(range(bound + 1), repeat=N):
        if sum(n) <= bound:
            yield n


@settings(max_examples=25, deadline=None)
@given(matrices.filter(_valid))
def test_class_key_separates_cosets(B):
    lam = DelayVector.symbolic(B)
    N = len(B)
    bound = 8 if N <= 2 else 5
    pts = list(_small_indices(N, bound))
    kernel = integer_kernel(B)
    # differences in the kernel lattice share a key; others do not
    import numpy as np
    K = np.array(kernel, dtype=float).reshape(len(kernel), N)
    for n in pts[:40]:
        for m in pts[:40]:
            same = class_key(n, lam) == class_key(m, lam)
            diff = np.array(n, dtype=float) - np.array(m, dtype=float)
            if K.shape[0]:
                coef, *_ = np.linalg.lstsq(K.T, diff, rcond=None)
                in_lattice = np.allclose(K.T @ np.round(coef), diff)
            else:
                in_lattice = not diff.any()
            assert same == in_lattice


@settings(max_examples=40, deadline=None)
@given(matrices.filter(_valid), st.data())
def test_class_members_match_brute_force(B, data):
    lam = DelayVector.symbolic(B)
    N = len(B)
    n = tuple(data.draw(st.lists(st.integers(0, 3), min_size=N, max_size=N)))
    key = class_key(n, lam)
    members = class_members(key, lam)
    assert members == sorted(members)
    assert all(class_key(m, lam) == key for m in members)
    bound = max(key) if key else 0
    brute = [m for m in itertools.product(range(bound + 1), repeat=N) if class_key(m, lam) == key]
    assert sorted(brute) == members


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=Fraction(1, 10), max_value=5, max_denominator=12),
       st.fractions(min_value=Fraction(1, 7), max_value=7, max_denominator=9))
def test_scaled_generators_stay_in_V(ell, c):
    lam = DelayVector([[1], [2], [3]], [ell])
    ok, witness = membership_V(lam.scaled(c), lam)
    assert ok and witness == (ell * c,)
