"""Coefficient ring: Laurent polynomials in the model parameters over Q.

A term is keyed by a sorted tuple of ``(parameter, exponent)`` pairs, so two
polynomials are equal exactly when their term dictionaries are equal.
"""
from __future__ import annotations

from fractions import Fraction
from math import gcd

PARAMETERS = frozenset(
    ["alpha", "beta", "n", "lam", "k", "c1", "c2", "c3"] + [f"m{i}" for i in range(1, 10)]
)


def _mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for name, e in b:
        d[name] = d.get(name, 0) + e
    return tuple(sorted((k, v) for k, v in d.items() if v != 0))


class Poly:
    __slots__ = ("terms", "_hash")

    def __init__(self, terms=None):
        self.terms = {m: Fraction(c) for m, c in (terms or {}).items() if c != 0}
        self._hash = None

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): Fraction(c)})

    @classmethod
    def param(cls, name: str, power: int = 1) -> "Poly":
        return cls({((name, power),): Fraction(1)})

    # ------------------------------------------------------------------ queries
    def is_zero(self) -> bool:
        return not self.terms

    def is_number(self) -> bool:
        return all(m == () for m in self.terms)

    def number(self) -> Fraction:
        if not self.is_number():
            raise ValueError(f"{self} is not a number")
        return self.terms.get((), Fraction(0))

    def is_integer(self) -> bool:
        return self.is_number() and self.number().denominator == 1

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def params(self) -> frozenset:
        return frozenset(name for m in self.terms for name, _ in m)

    def content(self) -> Fraction:
        """Positive gcd of the rational coefficients (0 for the zero poly)."""
        if not self.terms:
            return Fraction(0)
        num = 0
        den = 1
        for c in self.terms.values():
            num = gcd(num, c.numerator)
            den = den * c.denominator // gcd(den, c.denominator)
        return Fraction(num, den)

    def leading(self) -> Fraction:
        """Coefficient of the first term in canonical order."""
        return self.terms[min(self.terms)] if self.terms else Fraction(0)

    def key(self) -> tuple:
        return tuple(sorted(self.terms.items()))

    # --------------------------------------------------------------- arithmetic
    @staticmethod
    def coerce(x) -> "Poly":
        if isinstance(x, Poly):
            return x
        return Poly.const(x)

    def __add__(self, other):
        other = Poly.coerce(other)
        d = dict(self.terms)
        for m, c in other.terms.items():
            d[m] = d.get(m, 0) + c
        return Poly(d)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-Poly.coerce(other))

    def __rsub__(self, other):
        return Poly.coerce(other) - self

    def __mul__(self, other):
        other = Poly.coerce(other)
        d: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                d[m] = d.get(m, 0) + c1 * c2
        return Poly(d)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("integer powers only")
        if k < 0:
            return self.inverse() ** (-k)
        out = Poly.const(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def inverse(self) -> "Poly":
        if not self.is_monomial():
            raise ZeroDivisionError(f"{self} is not invertible in the coefficient ring")
        (m, c), = self.terms.items()
        return Poly({tuple((name, -e) for name, e in m): 1 / c})

    def __truediv__(self, other):
        return self * Poly.coerce(other).inverse()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    # ------------------------------------------------------------ evaluation
    def evaluate(self, values: dict):
        total = 0
        for m, c in self.terms.items():
            t = c
            for name, e in m:
                if name not in values:
                    raise KeyError(name)
                t = t * values[name] ** e
            total = total + t
        return total

    def subs(self, bindings: dict) -> "Poly":
        """Substitute parameters by polynomials (or numbers)."""
        if not self.params() & bindings.keys():
            return self
        out = Poly()
        for m, c in self.terms.items():
            t = Poly.const(c)
            for name, e in m:
                if name in bindings:
                    t = t * Poly.coerce(bindings[name]) ** e
                else:
                    t = t * Poly.param(name, e)
            out = out + t
        return out

    def min_powers(self) -> dict:
        """Most negative exponent of each parameter (only negatives listed)."""
        low: dict = {}
        for m in self.terms:
            for name, e in m:
                if e < 0:
                    low[name] = min(low.get(name, 0), e)
        return low

    def __repr__(self):
        return f"Poly({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in sorted(self.terms.items(), key=lambda kv: (-sum(abs(e) for _, e in kv[0]), kv[0])):
            mono = "*".join(name if e == 1 else f"{name}^{e}" if e > 0 else f"{name}^({e})" for name, e in m)
            if not mono:
                parts.append(_fmt(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{_fmt(c)}*{mono}")
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out


def _fmt(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"({c.numerator}/{c.denominator})"
