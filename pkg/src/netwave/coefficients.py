"""Coefficients of the explicit solution formula for delay difference equations.

For ``u(t) = sum_j A_j(t) u(t - L_j)`` the matrices ``xi(n, t)`` collect the
products of coefficients along every monotone lattice path from ``0`` to
``n``.  Summing them over a class of multi-indices with equal delay sum
gives ``xi_hat``, and ``theta`` combines those with the last step so that
the solution becomes a finite sum of ``theta`` times values of the initial
condition.

Three independent routes compute ``xi``: the forward recursion (memoized),
the explicit path sum and the reverse recursion that peels off the last
factor instead of the first one.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from typing import Sequence

import numpy as np

from .ratlattice import (DelayVector, as_fraction, as_rational_vector,
                         class_key, class_members, membership_V)
from .signals import SwitchingSignal, identity_like, zeros_like

__all__ = [
    "MAX_DEPTH",
    "CoefficientTable",
    "xi",
    "xi_pathsum",
    "xi_reverse",
    "xi_hat",
    "a_hat",
    "theta",
]

MAX_DEPTH = 64
PATHSUM_BOUND = 10


def _check_index(n: Sequence[int], N: int) -> tuple[int, ...]:
    n = tuple(int(k) for k in n)
    if len(n) != N:
        raise ValueError(f"multi-index must have {N} entries")
    return n


def _dot(L: Sequence[Fraction], n: Sequence[int]) -> Fraction:
    return sum((l * k for l, k in zip(L, n)), Fraction(0))


class CoefficientTable:
    """Memo of coefficient matrices for one signal and one delay vector.

    Parameters
    ----------
    A : SwitchingSignal
        Coefficient signal with ``N`` matrices of size ``d``.
    L : DelayVector or sequence of rationals
        Delays used in the equation.
    Lambda : DelayVector, optional
        Reference delay structure defining the classes.  ``L`` must lie in
        the range of its coefficient matrix.  Defaults to the structure of
        ``L`` itself when ``L`` is a DelayVector, and to the trivial lattice
        otherwise.
    """

    def __init__(self, A: SwitchingSignal, L, Lambda: DelayVector | None = None):
        self.A = A
        self.L = as_rational_vector(L)
        if len(self.L) != A.N:
            raise ValueError("signal and delays disagree on N")
        if any(l <= 0 for l in self.L):
            raise ValueError("delays must be positive")
        if Lambda is None:
            if isinstance(L, DelayVector):
                Lambda = DelayVector.symbolic(L.B)
            else:
                Lambda = DelayVector.symbolic(
                    [[int(i == k) for k in range(A.N)] for i in range(A.N)])
        if Lambda.N != A.N:
            raise ValueError("reference structure and signal disagree on N")
        ok, gen = membership_V(self.L, Lambda)
        if not ok:
            raise ValueError("delays are not in the range of the reference structure")
        self.Lambda = Lambda
        self.generators = gen
        self.N = A.N
        self.d = A.d
        self.exact = A.exact
        self._xi: dict = {}
        self._xi_hat: dict = {}
        self._members: dict = {}
        self._classes = Lambda.index_classes()
        self._eye = identity_like(self.d, self.exact)
        self._zero = zeros_like(self.d, self.exact)

    # -- basic coefficients -------------------------------------------------
    def xi(self, n: Sequence[int], t) -> np.ndarray:
        n = _check_index(n, self.N)
        t = as_fraction(t)
        if any(k < 0 for k in n):
            return self._zero
        if sum(n) > MAX_DEPTH:
            raise ValueError(f"|n|_1 = {sum(n)} exceeds the depth cap {MAX_DEPTH}")
        return self._xi_rec(n, t)

    def _xi_rec(self, n: tuple[int, ...], t: Fraction) -> np.ndarray:
        key = (n, t)
        hit = self._xi.get(key)
        if hit is not None:
            return hit
        if not any(n):
            return self._eye
        At = self.A(t)
        acc = None
        for k in range(self.N):
            if n[k] == 0:
                continue
            m = n[:k] + (n[k] - 1,) + n[k + 1:]
            term = At[k] @ self._xi_rec(m, t - self.L[k])
            acc = term if acc is None else acc + term
        self._xi[key] = acc
        return acc

    def a_hat(self, indices: Sequence[int], t) -> np.ndarray:
        At = self.A(as_fraction(t))
        acc = self._zero
        for j in indices:
            acc = acc + At[j]
        return acc

    # -- class sums ----------------------------------------------------------
    def members(self, key: Sequence[int]) -> list[tuple[int, ...]]:
        key = tuple(int(k) for k in key)
        hit = self._members.get(key)
        if hit is None:
            hit = class_members(key, self.Lambda)
            self._members[key] = hit
        return hit

    def level(self, key: Sequence[int]) -> Fraction:
        """Common value of ``L . n`` over the class with this key."""
        return _dot(self.generators, key)

    def xi_hat(self, key: Sequence[int], t) -> np.ndarray:
        key = tuple(int(k) for k in key)
        t = as_fraction(t)
        hit = self._xi_hat.get((key, t))
        if hit is not None:
            return hit
        acc = self._zero
        for m in self.members(key):
            acc = acc + self.xi(m, t)
        self._xi_hat[(key, t)] = acc
        return acc

    def theta(self, key: Sequence[int], t) -> np.ndarray:
        key = tuple(int(k) for k in key)
        t = as_fraction(t)
        if t < 0:
            return self._zero
        Ln = self.level(key)
        acc = self._zero
        B = self.Lambda.B
        for cls in self._classes:
            j = cls[0]
            Lj = self.L[j]
            if Ln - Lj > t:
                continue
            prev = tuple(k - b for k, b in zip(key, B[j]))
            if any(k < 0 for k in prev):
                continue
            xh = self.xi_hat(prev, t)
            # classes of indices share a row of B but may differ in L
            At = self.A(t - Ln + Lj)
            ah = self._zero
            for i in cls:
                if self.L[i] != Lj:
                    raise ValueError("indices with equal rows of B must have equal delays")
                ah = ah + At[i]
            acc = acc + xh @ ah
        return acc


def _table(A, L, Lambda=None, table: CoefficientTable | None = None) -> CoefficientTable:
    if table is not None:
        return table
    return CoefficientTable(A, L, Lambda)


def xi(n: Sequence[int], t, A: SwitchingSignal, L, table: CoefficientTable | None = None) -> np.ndarray:
    """Coefficient matrix ``xi(n, t)`` by the forward recursion.

    ``xi(0, t)`` is the identity, ``xi(n, t)`` vanishes when ``n`` has a
    negative entry and otherwise
    ``xi(n, t) = sum_k A_k(t) @ xi(n - e_k, t - L_k)``.

    Parameters
    ----------
    n : sequence of int
        Multi-index of length ``N``.
    t : rational
        Evaluation time (``Fraction``, int or ``"p/q"``; floats are refused).
    A : SwitchingSignal
    L : DelayVector or sequence of rationals
    table : CoefficientTable, optional
        Reuse an existing memo.
    """
    return _table(A, L, table=table).xi(n, t)


def xi_pathsum(n: Sequence[int], t, A: SwitchingSignal, L, bound: int = PATHSUM_BOUND) -> np.ndarray:
    """Sum over all monotone paths to ``n`` of ordered products.

    The path ``v`` visits ``e_{v_1}, e_{v_1} + e_{v_2}, ...``; factor ``k``
    is ``A_{v_k}`` evaluated at ``t - L . p_k`` where ``p_k`` is the
    position before step ``k``.  Cost grows like the multinomial
    coefficient of ``n``, hence the bound on ``|n|_1``.
    """
    Lv = as_rational_vector(L)
    n = _check_index(n, A.N)
    t = as_fraction(t)
    if any(k < 0 for k in n):
        raise ValueError("path sums need a nonnegative multi-index")
    if sum(n) > bound:
        raise ValueError(f"|n|_1 = {sum(n)} exceeds the path-sum bound {bound}")
    steps = [k for k in range(A.N) for _ in range(n[k])]
    acc = zeros_like(A.d, A.exact)
    if not steps:
        return identity_like(A.d, A.exact)
    for v in sorted(set(permutations(steps))):
        prod = None
        shift = Fraction(0)
        for k in v:
            f = A(t - shift)[k]
            prod = f if prod is None else prod @ f
            shift += Lv[k]
        acc = acc + prod
    return acc


def xi_reverse(n: Sequence[int], t, A: SwitchingSignal, L) -> np.ndarray:
    """``xi(n, t)`` through the recursion on the last factor.

    ``xi(n, t) = sum_k xi(n - e_k, t) @ A_k(t - L . n + L_k)``.
    """
    Lv = as_rational_vector(L)
    n = _check_index(n, A.N)
    t = as_fraction(t)
    zero = zeros_like(A.d, A.exact)
    if any(k < 0 for k in n):
        return zero
    if sum(n) > MAX_DEPTH:
        raise ValueError(f"|n|_1 = {sum(n)} exceeds the depth cap {MAX_DEPTH}")
    eye = identity_like(A.d, A.exact)
    memo: dict = {}

    def rec(m: tuple[int, ...]) -> np.ndarray:
        if not any(m):
            return eye
        hit = memo.get(m)
        if hit is not None:
            return hit
        Lm = _dot(Lv, m)
        acc = None
        for k in range(A.N):
            if m[k] == 0:
                continue
            prev = m[:k] + (m[k] - 1,) + m[k + 1:]
            term = rec(prev) @ A(t - Lm + Lv[k])[k]
            acc = term if acc is None else acc + term
        memo[m] = acc
        return acc

    return rec(n)


def xi_hat(key: Sequence[int], t, A: SwitchingSignal, L, Lambda: DelayVector,
           table: CoefficientTable | None = None) -> np.ndarray:
    """Sum of ``xi(m, t)`` over the nonnegative members ``m`` of a class."""
    return _table(A, L, Lambda, table).xi_hat(key, t)


def a_hat(class_of_index: Sequence[int], t, A: SwitchingSignal) -> np.ndarray:
    """Sum of ``A_j(t)`` over a group of indices with equal delay."""
    At = A(as_fraction(t))
    acc = zeros_like(A.d, A.exact)
    for j in class_of_index:
        acc = acc + At[j]
    return acc


def theta(key: Sequence[int], t, A: SwitchingSignal, L, Lambda: DelayVector,
          table: CoefficientTable | None = None) -> np.ndarray:
    """Weight of the initial value ``u0(t - L . n)`` in the solution at ``t``.

    Sums ``xi_hat([n - e_j], t) @ A_hat_[j](t - L . n + L_j)`` over the
    groups of equal delays that satisfy ``L . n - L_j <= t``.
    """
    return _table(A, L, Lambda, table).theta(key, t)


def key_of(n: Sequence[int], Lambda: DelayVector) -> tuple[int, ...]:
    return class_key(n, Lambda)
