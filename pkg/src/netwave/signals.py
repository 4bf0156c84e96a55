"""Matrix tuples, exact scalars and piecewise-constant switching signals."""

from __future__ import annotations

from bisect import bisect_right
from fractions import Fraction
from numbers import Rational
from typing import Callable, Sequence

import numpy as np

from .ratlattice import as_fraction

__all__ = [
    "GaussianRational",
    "SwitchingSignal",
    "matrix_tuple",
    "exact_array",
    "is_exact",
    "identity_like",
    "zeros_like",
    "inf_norm",
    "to_complex",
]


class GaussianRational:
    """Complex number with exact rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _coerce(other):
        if isinstance(other, GaussianRational):
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return GaussianRational(other, 0)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return False
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __abs__(self):
        return float(np.hypot(float(self.re), float(self.im)))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"


def _exact_scalar(x):
    if isinstance(x, GaussianRational):
        return x
    if isinstance(x, (list, tuple)) and len(x) == 2:
        re, im = as_fraction(x[0]), as_fraction(x[1])
        return GaussianRational(re, im) if im != 0 else re
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, complex):
        raise TypeError("binary complex numbers are not exact")
    return as_fraction(x)


def exact_array(values) -> np.ndarray:
    """Object array of exact entries (``Fraction`` or ``GaussianRational``).

    Scalars may be ints, ``Fraction`` objects, ``"p/q"`` strings or
    ``GaussianRational`` values; nesting gives the shape.
    """
    arr = np.empty(np.shape(_shape_probe(values)), dtype=object)
    arr.ravel()[:] = [_exact_scalar(x) for x in _flatten_scalars(values)]
    return arr


def _shape_probe(values):
    """Nested lists with complex pairs collapsed, for shape discovery."""
    if isinstance(values, np.ndarray):
        return np.empty(values.shape)
    if isinstance(values, (list, tuple)):
        if values and all(isinstance(x, (list, tuple, np.ndarray)) for x in values):
            return [_shape_probe(x) for x in values]
        return [0] * len(values)
    return 0


def _flatten_scalars(values):
    if isinstance(values, np.ndarray):
        return list(values.ravel())
    if isinstance(values, (list, tuple)):
        if values and all(isinstance(x, (list, tuple, np.ndarray)) for x in values):
            out = []
            for x in values:
                out.extend(_flatten_scalars(x))
            return out
        return list(values)
    return [values]


def is_exact(a: np.ndarray) -> bool:
    return a.dtype == object


def identity_like(d: int, exact: bool) -> np.ndarray:
    if exact:
        out = np.full((d, d), Fraction(0), dtype=object)
        for i in range(d):
            out[i, i] = Fraction(1)
        return out
    return np.eye(d, dtype=complex)


def zeros_like(d: int, exact: bool) -> np.ndarray:
    if exact:
        return np.full((d, d), Fraction(0), dtype=object)
    return np.zeros((d, d), dtype=complex)


def to_complex(a: np.ndarray) -> np.ndarray:
    """Floating copy of a possibly exact array."""
    if a.dtype == object:
        return np.vectorize(complex, otypes=[complex])(a) if a.size else a.astype(complex)
    return np.asarray(a, dtype=complex)


def inf_norm(a: np.ndarray) -> float:
    """Operator infinity norm (maximal absolute row sum)."""
    a = np.atleast_2d(a)
    if a.dtype == object:
        absval = np.vectorize(lambda z: abs(z), otypes=[float])(a)
    else:
        absval = np.abs(a)
    if absval.size == 0:
        return 0.0
    return float(absval.sum(axis=1).max())


def matrix_tuple(mats, exact: bool | None = None) -> np.ndarray:
    """Stack ``N`` square matrices of equal size into an ``(N, d, d)`` array.

    With ``exact=True`` entries are converted to exact rationals; with
    ``exact=False`` to complex doubles; ``None`` keeps object arrays exact
    and makes everything else complex.
    """
    if isinstance(mats, np.ndarray) and mats.ndim == 3:
        arr = mats
    else:
        if exact:
            arr = exact_array(mats)
        else:
            arr = np.asarray(mats)
    if exact and arr.dtype != object:
        arr = exact_array(arr.tolist())
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError("matrix tuple must have shape (N, d, d)")
    if exact is False or (exact is None and arr.dtype != object):
        arr = to_complex(arr)
    return arr


class SwitchingSignal:
    """Right-continuous piecewise-constant map from time to a matrix tuple.

    Parameters
    ----------
    breakpoints : sequence of rationals
        Strictly increasing switching times.
    values : sequence of array_like
        ``len(breakpoints) + 1`` tuples of shape ``(N, d, d)``.  ``values[0]``
        applies before the first breakpoint, ``values[k]`` on
        ``[breakpoints[k-1], breakpoints[k])`` and the last one afterwards.
    """

    def __init__(self, breakpoints: Sequence, values: Sequence, exact: bool | None = None):
        bps = tuple(as_fraction(b) for b in breakpoints)
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        vals = [matrix_tuple(v, exact) for v in values]
        if len(vals) != len(bps) + 1:
            raise ValueError("need exactly one value per interval "
                             f"({len(bps) + 1}), got {len(vals)}")
        shape = vals[0].shape
        if any(v.shape != shape for v in vals):
            raise ValueError("all values must share the tuple shape")
        kinds = {v.dtype == object for v in vals}
        if len(kinds) > 1:
            raise ValueError("cannot mix exact and floating values")
        self.breakpoints = bps
        self.values = vals

    @classmethod
    def constant(cls, value, exact: bool | None = None) -> "SwitchingSignal":
        return cls((), [value], exact)

    @property
    def N(self) -> int:
        return self.values[0].shape[0]

    @property
    def d(self) -> int:
        return self.values[0].shape[1]

    @property
    def exact(self) -> bool:
        return self.values[0].dtype == object

    def index(self, t) -> int:
        return bisect_right(self.breakpoints, as_fraction(t))

    def __call__(self, t) -> np.ndarray:
        return self.values[bisect_right(self.breakpoints, as_fraction(t))]

    def shift(self, tau) -> "SwitchingSignal":
        """The signal ``s -> A(s + tau)``."""
        tau = as_fraction(tau)
        return SwitchingSignal([b - tau for b in self.breakpoints], self.values)

    def map_values(self, fn: Callable[[np.ndarray], np.ndarray]) -> "SwitchingSignal":
        return SwitchingSignal(self.breakpoints, [fn(v) for v in self.values])

    def scaled(self, factors: Sequence) -> "SwitchingSignal":
        """Multiply the ``j``-th matrix of every value by ``factors[j]``."""
        def fn(v):
            out = v.copy()
            for j, c in enumerate(factors):
                out[j] = out[j] * c
            return out
        return self.map_values(fn)

    def to_complex(self) -> "SwitchingSignal":
        return SwitchingSignal(self.breakpoints, [to_complex(v) for v in self.values])

    def to_json(self) -> dict:
        def enc(z):
            if isinstance(z, Fraction):
                return str(z)
            if isinstance(z, GaussianRational):
                return [str(z.re), str(z.im)]
            z = complex(z)
            return [z.real, z.imag]
        return {
            "breakpoints": [str(b) for b in self.breakpoints],
            "values": [[[[enc(z) for z in row] for row in m] for m in v]
                       for v in self.values],
        }

    @classmethod
    def from_json(cls, obj: dict, exact: bool = False) -> "SwitchingSignal":
        if "values" not in obj:
            raise ValueError("signal needs a 'values' entry")
        vals = [_decode_tuple(v, exact) for v in obj["values"]]
        return cls(obj.get("breakpoints", []), vals)

    def __repr__(self):
        return (f"SwitchingSignal(N={self.N}, d={self.d}, "
                f"breakpoints={len(self.breakpoints)}, exact={self.exact})")


def _decode_scalar(z, exact: bool):
    if isinstance(z, (list, tuple)):
        if len(z) != 2:
            raise ValueError("complex entries are [re, im] pairs")
        if exact:
            return _exact_scalar(z)
        return complex(float(as_fraction(z[0]) if isinstance(z[0], str) else z[0]),
                       float(as_fraction(z[1]) if isinstance(z[1], str) else z[1]))
    if exact:
        return _exact_scalar(z)
    if isinstance(z, str):
        return complex(float(as_fraction(z)))
    return complex(z)


def _decode_tuple(v, exact: bool) -> np.ndarray:
    mats = [[[_decode_scalar(z, exact) for z in row] for row in m] for m in v]
    if exact:
        arr = np.empty((len(mats), len(mats[0]), len(mats[0][0])), dtype=object)
        for i, m in enumerate(mats):
            for r, row in enumerate(m):
                for c, z in enumerate(row):
                    arr[i, r, c] = z
        return arr
    return np.asarray(mats, dtype=complex)
