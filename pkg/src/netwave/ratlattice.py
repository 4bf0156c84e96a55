"""Exact arithmetic on the lattice of integer relations between delays.

A delay vector is stored as ``L = B @ ell`` where ``B`` is a nonnegative
integer ``N x h`` matrix of full column rank and ``ell`` holds ``h``
positive rationals (or is left symbolic, meaning rationally independent
generators).  Two multi-indices ``n`` and ``m`` produce the same delay sum
for every admissible ``ell`` exactly when ``B.T @ n == B.T @ m``; that
integer vector is the class key used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

__all__ = [
    "DelayVector",
    "as_fraction",
    "as_rational_vector",
    "integer_kernel",
    "hermite_rows",
    "class_key",
    "class_members",
    "membership_V",
    "membership_W",
    "rational_rank",
    "solve_rational",
]


def as_fraction(x) -> Fraction:
    """Convert ``x`` to an exact ``Fraction``.

    Integers, ``Fraction`` objects and strings such as ``"3/2"`` or
    ``"0.25"`` are accepted.  Binary floats are refused because class
    membership depends on exact equalities between delay sums.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not rational numbers")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, Rational):
        return Fraction(int(x.numerator), int(x.denominator))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse rational {x!r}") from exc
    if isinstance(x, float):
        raise TypeError(
            f"float {x!r} refused: pass a Fraction, an int or a 'p/q' string")
    raise TypeError(f"cannot interpret {type(x).__name__} as a rational")


def as_rational_vector(L) -> tuple[Fraction, ...]:
    """Return the numeric delays of ``L`` (a DelayVector or a sequence)."""
    if isinstance(L, DelayVector):
        return L.values
    return tuple(as_fraction(x) for x in L)


def _int_entry(x) -> int:
    if isinstance(x, bool) or isinstance(x, float):
        raise TypeError("coefficient matrix entries must be integers")
    if isinstance(x, Rational) and x.denominator == 1:
        return int(x.numerator)
    if isinstance(x, int):
        return x
    raise TypeError(f"coefficient matrix entry {x!r} is not an integer")


def _int_matrix(B) -> tuple[tuple[int, ...], ...]:
    rows = tuple(tuple(_int_entry(x) for x in row) for row in B)
    if not rows:
        raise ValueError("coefficient matrix has no rows")
    width = len(rows[0])
    if width == 0 or any(len(r) != width for r in rows):
        raise ValueError("coefficient matrix must be rectangular with h >= 1")
    return rows


def rational_rank(rows: Sequence[Sequence]) -> int:
    """Rank over the rationals, by exact Gaussian elimination."""
    m = [[Fraction(x) for x in row] for row in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][c] != 0:
                f = m[r][c] / m[rank][c]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def solve_rational(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """Solve ``A x = b`` exactly for a matrix of full column rank.

    Returns ``None`` when the system is inconsistent.
    """
    nrows = len(A)
    ncols = len(A[0])
    m = [[Fraction(x) for x in A[r]] + [Fraction(b[r])] for r in range(nrows)]
    pivots = []
    rank = 0
    for c in range(ncols):
        piv = next((r for r in range(rank, nrows) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][c]
        m[rank] = [a / p for a in m[rank]]
        for r in range(nrows):
            if r != rank and m[r][c] != 0:
                f = m[r][c]
                m[r] = [a - f * q for a, q in zip(m[r], m[rank])]
        pivots.append(c)
        rank += 1
    if any(m[r][ncols] != 0 for r in range(rank, nrows)):
        return None
    if rank < ncols:
        raise ValueError("matrix does not have full column rank")
    x = [Fraction(0)] * ncols
    for r, c in enumerate(pivots):
        x[c] = m[r][ncols]
    return x


@dataclass(frozen=True)
class DelayVector:
    """Delays ``L = B @ ell`` over ``h`` generators.

    Parameters
    ----------
    B : sequence of sequences of int
        Nonnegative ``N x h`` integer matrix with nonzero rows and rank ``h``.
    ell : sequence of rationals, optional
        Positive generator values.  ``None`` keeps the generators symbolic.
    """

    B: tuple[tuple[int, ...], ...]
    ell: tuple[Fraction, ...] | None = None

    def __init__(self, B, ell=None):
        rows = _int_matrix(B)
        if any(x < 0 for row in rows for x in row):
            raise ValueError("coefficient matrix entries must be nonnegative")
        if any(all(x == 0 for x in row) for row in rows):
            raise ValueError("every delay needs a nonzero row (positive delay)")
        h = len(rows[0])
        if rational_rank(rows) != h:
            raise ValueError(
                f"coefficient matrix is rank deficient (rank < h = {h})")
        if ell is not None:
            if isinstance(ell, str):
                if ell != "symbolic":
                    raise ValueError("ell must be a list or 'symbolic'")
                ell = None
            else:
                ell = tuple(as_fraction(x) for x in ell)
                if len(ell) != h:
                    raise ValueError(f"expected {h} generator values")
                if any(x <= 0 for x in ell):
                    raise ValueError("generator values must be positive")
        object.__setattr__(self, "B", rows)
        object.__setattr__(self, "ell", ell)

    @classmethod
    def from_rationals(cls, values: Iterable) -> "DelayVector":
        """Rational delays written over one generator, their gcd."""
        vals = [as_fraction(v) for v in values]
        if not vals or any(v <= 0 for v in vals):
            raise ValueError("delays must be positive")
        g = vals[0]
        for v in vals[1:]:
            g = _fraction_gcd(g, v)
        return cls([[int(v / g)] for v in vals], [g])

    @classmethod
    def symbolic(cls, B) -> "DelayVector":
        return cls(B, None)

    @property
    def N(self) -> int:
        return len(self.B)

    @property
    def h(self) -> int:
        return len(self.B[0])

    @property
    def is_symbolic(self) -> bool:
        return self.ell is None

    @property
    def values(self) -> tuple[Fraction, ...]:
        if self.ell is None:
            raise ValueError("symbolic delays have no numeric values")
        return tuple(sum((b * l for b, l in zip(row, self.ell)), Fraction(0))
                     for row in self.B)

    def with_generators(self, ell) -> "DelayVector":
        return DelayVector(self.B, ell)

    def scaled(self, factor) -> "DelayVector":
        """Same structure, generators multiplied by a positive rational."""
        c = as_fraction(factor)
        if self.ell is None:
            raise ValueError("cannot scale symbolic generators")
        return DelayVector(self.B, [c * x for x in self.ell])

    def key(self, n: Sequence[int]) -> tuple[int, ...]:
        return class_key(n, self)

    def level(self, key: Sequence[int]) -> Fraction:
        """Numeric delay sum ``ell . key`` of a class."""
        if self.ell is None:
            raise ValueError("symbolic delays have no numeric levels")
        return sum((k * l for k, l in zip(key, self.ell)), Fraction(0))

    def index_classes(self) -> list[tuple[int, ...]]:
        """Partition of the delay indices into groups with equal rows of B."""
        groups: dict[tuple[int, ...], list[int]] = {}
        for j, row in enumerate(self.B):
            groups.setdefault(row, []).append(j)
        return sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])

    def to_json(self) -> dict:
        ell = "symbolic" if self.ell is None else [str(x) for x in self.ell]
        return {"B": [list(r) for r in self.B], "ell": ell}

    @classmethod
    def from_json(cls, obj: dict) -> "DelayVector":
        if not isinstance(obj, dict) or "B" not in obj:
            raise ValueError("delay structure needs a 'B' entry")
        ell = obj.get("ell", "symbolic")
        if isinstance(ell, list):
            for x in ell:
                if isinstance(x, float):
                    raise TypeError("generator values must be 'p/q' strings")
        return cls(obj["B"], ell)


def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    from math import gcd
    den = a.denominator * b.denominator // gcd(a.denominator, b.denominator)
    return Fraction(gcd(int(a * den), int(b * den)), den)


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return ``(g, x, y)`` with ``a*x + b*y = g = gcd(a, b) >= 0``."""
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def hermite_rows(rows: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    """Row Hermite normal form of an integer matrix (nonzero rows only).

    Pivots are positive and entries above each pivot are reduced into
    ``[0, pivot)``, so two matrices generate the same row lattice iff their
    normal forms coincide.
    """
    m = [list(r) for r in rows]
    if not m:
        return []
    ncols = len(m[0])
    r = 0
    for c in range(ncols):
        if r == len(m):
            break
        for k in range(r + 1, len(m)):
            if m[k][c] == 0:
                continue
            a, b = m[r][c], m[k][c]
            g, x, y = _xgcd(a, b)
            ag, bg = a // g, b // g
            top = [x * p + y * q for p, q in zip(m[r], m[k])]
            bot = [-bg * p + ag * q for p, q in zip(m[r], m[k])]
            m[r], m[k] = top, bot
        if m[r][c] == 0:
            continue
        if m[r][c] < 0:
            m[r] = [-v for v in m[r]]
        p = m[r][c]
        for k in range(r):
            f = m[k][c] // p
            if f:
                m[k] = [u - f * v for u, v in zip(m[k], m[r])]
        r += 1
    return [tuple(row) for row in m[:r] if any(row)]


def integer_kernel(B) -> list[tuple[int, ...]]:
    """Basis of ``{n in Z^N : B.T @ n = 0}``.

    Integer column operations bring ``B.T`` to echelon form while the same
    operations are applied to an identity block; columns left with a zero
    top part span the kernel lattice.  The basis is returned in row Hermite
    normal form, which makes it canonical.

    Examples
    --------
    >>> integer_kernel([[1], [2]])
    [(2, -1)]
    >>> integer_kernel([[1, 0], [0, 1]])
    []
    """
    if isinstance(B, DelayVector):
        rows = B.B
    else:
        rows = DelayVector(B).B
    N, h = len(rows), len(rows[0])
    cols = [list(rows[i]) + [int(i == k) for k in range(N)] for i in range(N)]
    active = list(range(N))
    for r in range(h):
        nz = [c for c in active if cols[c][r] != 0]
        if not nz:
            continue
        p = nz[0]
        for c in nz[1:]:
            a, b = cols[p][r], cols[c][r]
            g, x, y = _xgcd(a, b)
            ag, bg = a // g, b // g
            new_p = [x * u + y * v for u, v in zip(cols[p], cols[c])]
            new_c = [-bg * u + ag * v for u, v in zip(cols[p], cols[c])]
            cols[p], cols[c] = new_p, new_c
        active.remove(p)
    return hermite_rows([cols[c][h:] for c in active])


def class_key(n: Sequence[int], delays: DelayVector) -> tuple[int, ...]:
    """Integer key ``B.T @ n`` of the class of ``n``."""
    if len(n) != delays.N:
        raise ValueError(f"multi-index must have {delays.N} entries")
    return tuple(sum(int(n[i]) * delays.B[i][k] for i in range(delays.N))
                 for k in range(delays.h))


def class_members(key: Sequence[int], delays: DelayVector) -> list[tuple[int, ...]]:
    """All ``n`` in ``N^N`` with ``class_key(n) == key``, in lexicographic order.

    Because ``B`` is nonnegative with nonzero rows, the residual key must
    stay componentwise nonnegative along the search, which bounds every
    coordinate by the key itself.
    """
    B = delays.B
    N, h = delays.N, delays.h
    key = tuple(int(k) for k in key)
    if len(key) != h:
        raise ValueError(f"key must have {h} entries")
    if any(k < 0 for k in key):
        return []
    # columns still reachable by rows i..N-1
    reach = [set() for _ in range(N + 1)]
    for i in range(N - 1, -1, -1):
        reach[i] = reach[i + 1] | {c for c in range(h) if B[i][c] > 0}
    out: list[tuple[int, ...]] = []
    prefix = [0] * N

    def dfs(i: int, residual: list[int]) -> None:
        if i == N:
            if not any(residual):
                out.append(tuple(prefix))
            return
        if any(residual[c] > 0 and c not in reach[i] for c in range(h)):
            return
        row = B[i]
        top = min(residual[c] // row[c] for c in range(h) if row[c] > 0)
        for v in range(top + 1):
            prefix[i] = v
            dfs(i + 1, [residual[c] - v * row[c] for c in range(h)])
        prefix[i] = 0

    dfs(0, list(key))
    return out


def membership_V(L, delays: DelayVector):
    """Test whether ``L`` lies in the range of ``B``.

    Parameters
    ----------
    L : DelayVector or sequence of rationals
        Numeric delays, or a DelayVector.  A symbolic DelayVector is in the
        range when every column of its coefficient matrix is.
    delays : DelayVector
        Reference structure.

    Returns
    -------
    (bool, witness)
        For numeric input the witness is the generator vector ``ell'`` with
        ``B @ ell' = L``.  For symbolic input it is the rational matrix ``X``
        with ``B' = B @ X``.  The witness is ``None`` when the test fails.
    """
    B = delays.B
    if isinstance(L, DelayVector) and L.is_symbolic:
        if L.N != delays.N:
            raise ValueError("dimension mismatch between delay vectors")
        X = []
        for k in range(L.h):
            col = [L.B[i][k] for i in range(L.N)]
            sol = solve_rational(B, col)
            if sol is None:
                return False, None
            X.append(sol)
        return True, [list(r) for r in zip(*X)]
    vals = as_rational_vector(L)
    if len(vals) != delays.N:
        raise ValueError("dimension mismatch between delay vectors")
    if any(v <= 0 for v in vals):
        raise ValueError("delays must be strictly positive")
    sol = solve_rational(B, vals)
    if sol is None:
        return False, None
    return True, tuple(sol)


def membership_W(L: DelayVector, delays: DelayVector) -> bool:
    """True iff ``L`` has exactly the same integer relations as ``delays``.

    Only symbolic representations are accepted: rational independence of
    numeric generator values cannot be decided from the values themselves.
    """
    if not isinstance(L, DelayVector) or not L.is_symbolic:
        raise ValueError("W-membership needs a symbolic generator representation")
    if L.N != delays.N:
        raise ValueError("dimension mismatch between delay vectors")
    return integer_kernel(L.B) == integer_kernel(delays.B)
