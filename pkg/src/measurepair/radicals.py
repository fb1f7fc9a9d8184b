"""Exact sums of square roots of rationals.

In the exact (all-rational-inputs) mode every value this library produces has
the shape ``sum_i c_i * sqrt(s_i)`` with rational coefficients ``c_i`` and
pairwise distinct squarefree positive integers ``s_i``: one-step affinities
are sums of ``sqrt(p*q)``, and products, kernel-weighted sums and squared
norms of such values stay inside the same ring.  The representation kept here
is canonical -- square roots of distinct squarefree integers are linearly
independent over the rationals -- so equality reduces to comparing coefficient
dictionaries and zero testing is exact.

Sign determination runs in two tiers.  A float evaluation with a rigorous
rounding-error bound settles almost every case; an undecided difference
escalates to interval arithmetic at doubling precision, which terminates
because a nonzero value of this form is bounded away from zero.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, sqrt as _float_sqrt

import mpmath

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover - gmpy2 is an optional speedup
    _Q = Fraction

_MACHINE_EPS = 2.220446049250313e-16

_factorint = None


def _factor(n: int):
    global _factorint
    if _factorint is None:
        from sympy import factorint  # deferred: sympy import is slow

        _factorint = factorint
    return _factorint(n)


_SQUAREFREE_CACHE: dict[int, tuple[int, int]] = {1: (1, 1)}


def _squarefree_split(n: int) -> tuple[int, int]:
    """Return (m, s) with n == m*m*s and s squarefree, for n >= 1."""
    hit = _SQUAREFREE_CACHE.get(n)
    if hit is not None:
        return hit
    m = 1
    s = 1
    for prime, exp in _factor(n).items():
        prime = int(prime)
        m *= prime ** (exp // 2)
        if exp & 1:
            s *= prime
    _SQUAREFREE_CACHE[n] = (m, s)
    return m, s


def _as_rational(value):
    if isinstance(value, float):
        raise TypeError("exact radical arithmetic does not accept floats")
    return _Q(value)


_SQRT_FLOAT_CACHE: dict[int, float] = {1: 1.0}


def _sqrt_float(radicand: int) -> float:
    value = _SQRT_FLOAT_CACHE.get(radicand)
    if value is None:
        value = _float_sqrt(radicand)
        _SQRT_FLOAT_CACHE[radicand] = value
    return value


def _sign_via_float(terms) -> int | None:
    """Certified sign from float64 evaluation, or None when inconclusive.

    Each term costs at most three correct roundings (coefficient conversion,
    cached sqrt, product) and the running sum at most one per addition, so the
    exact value lies within ``(len+4)*eps*sum|t_i|`` of the computed total; a
    factor-two slack absorbs the second-order terms.
    """
    total = 0.0
    magnitude = 0.0
    try:
        for radicand, coeff in terms.items():
            term = float(coeff) * _sqrt_float(radicand)
            total += term
            magnitude += abs(term)
    except OverflowError:
        return None
    bound = (len(terms) + 4) * _MACHINE_EPS * magnitude * 2.0
    if total > bound:
        return 1
    if total < -bound:
        return -1
    return None


def _sign_via_intervals(terms) -> int:
    iv = mpmath.iv
    saved = iv.prec
    try:
        prec = 128
        while prec <= 1 << 14:
            iv.prec = prec
            total = iv.mpf(0)
            for radicand, coeff in terms.items():
                num = int(coeff.numerator)
                den = int(coeff.denominator)
                total += iv.sqrt(iv.mpf(radicand)) * iv.mpf(num) / iv.mpf(den)
            if total.a > 0:
                return 1
            if total.b < 0:
                return -1
            prec *= 2
    finally:
        iv.prec = saved
    raise ArithmeticError("sign of radical sum undecided at maximum precision")


class RadicalSum:
    """Canonical finite linear combination of square roots of integers.

    Immutable by convention: all arithmetic returns new instances.  Mixing
    with ints and Fractions is supported; mixing with floats is rejected to
    keep the exact domain honest (convert explicitly with ``float(x)``).
    """

    __slots__ = ("_terms",)

    def __init__(self, terms=None):
        self._terms = {s: c for s, c in (terms or {}).items() if c}

    @classmethod
    def from_rational(cls, value) -> "RadicalSum":
        value = _as_rational(value)
        return cls({1: value})

    @classmethod
    def sqrt(cls, value) -> "RadicalSum":
        """Square root of a nonnegative rational, canonicalized."""
        value = _as_rational(value)
        if value < 0:
            raise ValueError("square root of a negative rational")
        if value == 0:
            return cls()
        num = int(value.numerator)
        den = int(value.denominator)
        m_num, s_num = _squarefree_split(num)
        m_den, s_den = _squarefree_split(den)
        # sqrt(num/den) = m_num*sqrt(s_num) / (m_den*sqrt(s_den))
        #              = m_num*g*sqrt((s_num/g)*(s_den/g)) / (m_den*s_den)
        shared = gcd(s_num, s_den)
        radicand = (s_num // shared) * (s_den // shared)
        coeff = _Q(m_num * shared, m_den * s_den)
        return cls({radicand: coeff})

    # -- queries ---------------------------------------------------------

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_rational(self) -> bool:
        return not self._terms or set(self._terms) == {1}

    def rational_value(self):
        if not self._terms:
            return Fraction(0)
        if set(self._terms) != {1}:
            raise ValueError("value has an irrational part")
        coeff = self._terms[1]
        return Fraction(int(coeff.numerator), int(coeff.denominator))

    def sign(self) -> int:
        if not self._terms:
            return 0
        positive = all(c > 0 for c in self._terms.values())
        if positive:
            return 1
        if all(c < 0 for c in self._terms.values()):
            return -1
        decided = _sign_via_float(self._terms)
        if decided is None:
            decided = _sign_via_intervals(self._terms)
        return decided

    def __float__(self) -> float:
        return float(sum(float(c) * _sqrt_float(s) for s, c in self._terms.items()))

    def __bool__(self) -> bool:
        return bool(self._terms)

    # -- arithmetic ------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, RadicalSum):
            return other
        if isinstance(other, float):
            return None
        try:
            return RadicalSum.from_rational(other)
        except TypeError:
            return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        terms = dict(self._terms)
        for s, c in other._terms.items():
            updated = terms.get(s, 0) + c
            if updated:
                terms[s] = updated
            else:
                terms.pop(s, None)
        result = RadicalSum.__new__(RadicalSum)
        result._terms = terms
        return result

    __radd__ = __add__

    def __neg__(self):
        result = RadicalSum.__new__(RadicalSum)
        result._terms = {s: -c for s, c in self._terms.items()}
        return result

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, RadicalSum):
            terms: dict = {}
            for s1, c1 in self._terms.items():
                for s2, c2 in other._terms.items():
                    shared = gcd(s1, s2)
                    radicand = (s1 // shared) * (s2 // shared)
                    coeff = c1 * c2 * shared
                    updated = terms.get(radicand, 0) + coeff
                    if updated:
                        terms[radicand] = updated
                    else:
                        terms.pop(radicand, None)
            result = RadicalSum.__new__(RadicalSum)
            result._terms = terms
            return result
        if isinstance(other, float):
            return NotImplemented
        try:
            scalar = _as_rational(other)
        except TypeError:
            return NotImplemented
        if not scalar:
            return RadicalSum()
        result = RadicalSum.__new__(RadicalSum)
        result._terms = {s: c * scalar for s, c in self._terms.items()}
        return result

    __rmul__ = __mul__

    def __pow__(self, exponent):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = RadicalSum.from_rational(1)
        base = self
        remaining = exponent
        while remaining:
            if remaining & 1:
                result = result * base
            base = base * base
            remaining >>= 1
        return result

    # -- comparisons -----------------------------------------------------

    def __eq__(self, other):
        coerced = self._coerce(other)
        if coerced is None:
            return NotImplemented
        return self._terms == coerced._terms

    def _compare(self, other):
        coerced = self._coerce(other)
        if coerced is None:
            return None
        return (self - coerced).sign()

    def __lt__(self, other):
        sign = self._compare(other)
        return NotImplemented if sign is None else sign < 0

    def __le__(self, other):
        sign = self._compare(other)
        return NotImplemented if sign is None else sign <= 0

    def __gt__(self, other):
        sign = self._compare(other)
        return NotImplemented if sign is None else sign > 0

    def __ge__(self, other):
        sign = self._compare(other)
        return NotImplemented if sign is None else sign >= 0

    __hash__ = None

    def __repr__(self) -> str:
        if not self._terms:
            return "RadicalSum(0)"
        parts = []
        for s in sorted(self._terms):
            c = self._terms[s]
            parts.append(str(c) if s == 1 else f"{c}*sqrt({s})")
        return "RadicalSum(" + " + ".join(parts) + ")"


def sqrt_rational(value) -> RadicalSum:
    return RadicalSum.sqrt(value)


def as_radical(value) -> RadicalSum:
    if isinstance(value, RadicalSum):
        return value
    return RadicalSum.from_rational(value)


def sign_of(value) -> int:
    """Exact sign of a RadicalSum, Fraction or int."""
    if isinstance(value, RadicalSum):
        return value.sign()
    if isinstance(value, float):
        raise TypeError("sign_of is for exact values; compare floats directly")
    if value > 0:
        return 1
    if value < 0:
        return -1
    return 0
