"""Exact coefficient arithmetic in the ring Q(sqrt(m1), sqrt(m2), ...).

A Surd is a finite sum  sum_i q_i * sqrt(m_i)  with q_i rational and m_i
distinct square-free positive integers (m = 1 is the rational part).  The
ring is closed under +, -, * and integer powers, which is all the vector
field algebra needs.  Square roots enter only through noise amplitudes
like sqrt(gamma*T); everywhere they matter for an inequality they appear
squared, so margin values come out rational and sign tests stay exact.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, isqrt
from typing import Union

Rational = Union[int, Fraction]


def _squarefree_split(n: int) -> tuple[int, int]:
    """Return (a, m) with n = a*a*m and m square-free, for n >= 1."""
    a, m, d = 1, 1, 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            a *= d ** (e // 2)
            if e % 2:
                m *= d
        d += 1 if d == 2 else 2
    return a, m * n


class Surd:
    """Immutable exact number of the form sum_i q_i*sqrt(m_i)."""

    __slots__ = ("_terms",)

    def __init__(self, terms=()):
        # terms: iterable of (squarefree m >= 1, Fraction coeff), zero coeffs dropped
        clean = tuple(sorted((m, q) for m, q in terms if q != 0))
        object.__setattr__(self, "_terms", clean)

    # -- constructors -------------------------------------------------

    @staticmethod
    def of(q: Rational) -> "Surd":
        q = Fraction(q)
        return Surd(((1, q),)) if q else ZERO

    @staticmethod
    def sqrt(q: Rational) -> "Surd":
        """Exact square root of a nonnegative rational."""
        q = Fraction(q)
        if q < 0:
            raise ValueError("square root of a negative rational")
        if q == 0:
            return ZERO
        # sqrt(p/s) = sqrt(p*s)/s
        p, s = q.numerator, q.denominator
        a, m = _squarefree_split(p * s)
        return Surd(((m, Fraction(a, s)),))

    # -- predicates / conversions -------------------------------------

    def is_zero(self) -> bool:
        return not self._terms

    def is_rational(self) -> bool:
        return all(m == 1 for m, _ in self._terms)

    def as_fraction(self) -> Fraction:
        if not self._terms:
            return Fraction(0)
        if len(self._terms) == 1 and self._terms[0][0] == 1:
            return self._terms[0][1]
        raise ValueError(f"not a rational value: {self}")

    def __float__(self) -> float:
        return float(sum(float(q) * isqrt(m * 10**34) / 10**17 for m, q in self._terms))

    def sign(self) -> int:
        """Exact sign via rational enclosures of each sqrt(m)."""
        if not self._terms:
            return 0
        if len(self._terms) == 1:
            q = self._terms[0][1]
            return -1 if q < 0 else 1
        # distinct square-free radicals are linearly independent over Q,
        # so the value is nonzero and refinement terminates
        k = 32
        while True:
            lo = hi = Fraction(0)
            scale = 1 << k
            for m, q in self._terms:
                r = isqrt(m * scale * scale)
                rl, rh = Fraction(r, scale), Fraction(r + 1, scale)
                if q >= 0:
                    lo += q * rl
                    hi += q * rh
                else:
                    lo += q * rh
                    hi += q * rl
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            k *= 2

    # -- arithmetic ----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Surd):
            return other
        if isinstance(other, (int, Fraction)):
            return Surd.of(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        acc = dict(self._terms)
        for m, q in other._terms:
            acc[m] = acc.get(m, Fraction(0)) + q
        return Surd(acc.items())

    __radd__ = __add__

    def __neg__(self):
        return Surd((m, -q) for m, q in self._terms)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        acc: dict[int, Fraction] = {}
        for m1, q1 in self._terms:
            for m2, q2 in other._terms:
                g = gcd(m1, m2)
                m = (m1 // g) * (m2 // g)
                q = q1 * q2 * g
                acc[m] = acc.get(m, Fraction(0)) + q
        return Surd(acc.items())

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("Surd powers must be nonnegative integers")
        out, base = ONE, self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- identity ------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Surd.of(other)
        if not isinstance(other, Surd):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def __repr__(self):
        return f"Surd({self})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for m, q in self._terms:
            if m == 1:
                parts.append(str(q))
            elif q == 1:
                parts.append(f"sqrt({m})")
            elif q == -1:
                parts.append(f"-sqrt({m})")
            else:
                parts.append(f"{q}*sqrt({m})")
        out = parts[0]
        for p in parts[1:]:
            out += p if p.startswith("-") else "+" + p
        return out


ZERO = Surd()
ONE = Surd(((1, Fraction(1)),))
