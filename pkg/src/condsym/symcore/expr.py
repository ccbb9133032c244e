"""Immutable expression trees.

Nodes are frozen dataclasses, so structural equality and hashing come for
free. The smart constructors ``add``/``mul``/``power`` flatten nested sums and
products and fold numeric constants, which keeps parser output and rendered
normal forms compact; they never reorder children.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

Number = Union[int, Fraction]

FUNCTIONS = ("ln", "sqrt", "abs", "exp")


class Expr:
    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), Num(-1)))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, Num(-1)))

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __neg__(self):
        return neg(self)

    def __str__(self):
        from condsym.symcore.printer import to_string

        return to_string(self)


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Sym(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    terms: tuple


@dataclass(frozen=True)
class Mul(Expr):
    factors: tuple


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exp: Expr


@dataclass(frozen=True)
class Call(Expr):
    """Elementary function ``ln``, ``sqrt``, ``abs`` or ``exp`` of one argument."""

    func: str
    arg: Expr

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ValueError(f"unknown elementary function {self.func!r}")


@dataclass(frozen=True)
class Fn(Expr):
    """Unknown function symbol applied to arguments.

    ``index`` lists the (1-based) argument positions differentiated, so
    ``Fn("phi", (w1, w2), (1, 2))`` is the mixed derivative of phi. The index
    is kept sorted because partial derivatives commute.
    """

    name: str
    args: tuple
    index: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        idx = tuple(sorted(int(i) for i in self.index))
        for i in idx:
            if not 1 <= i <= len(self.args):
                raise ValueError(f"derivative index {i} out of range for {self.name}/{len(self.args)}")
        object.__setattr__(self, "index", idx)


@dataclass(frozen=True)
class Lambda:
    """Closed-form binding for a function symbol: ``params -> body``."""

    params: tuple
    body: Expr

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))


ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Num(Fraction(x))
    if isinstance(x, str):
        return Sym(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def add(*items: Expr) -> Expr:
    terms = []
    const = Fraction(0)
    for it in items:
        parts = it.terms if isinstance(it, Add) else (it,)
        for p in parts:
            if isinstance(p, Num):
                const += p.value
            else:
                terms.append(p)
    if const != 0 or not terms:
        terms.append(Num(const))
    return terms[0] if len(terms) == 1 else Add(tuple(terms))


def mul(*items: Expr) -> Expr:
    factors = []
    const = Fraction(1)
    for it in items:
        parts = it.factors if isinstance(it, Mul) else (it,)
        for p in parts:
            if isinstance(p, Num):
                const *= p.value
            else:
                factors.append(p)
    if const == 0:
        return ZERO
    if const != 1 or not factors:
        factors.insert(0, Num(const))
    return factors[0] if len(factors) == 1 else Mul(tuple(factors))


def power(base: Expr, exp: Expr) -> Expr:
    if isinstance(exp, Num):
        if exp.value == 1:
            return base
        if exp.value == 0:
            return ONE
        if isinstance(base, Num) and exp.value.denominator == 1:
            if base.value != 0 or exp.value > 0:
                return Num(base.value ** exp.value.numerator)
    return Pow(base, exp)


def neg(e: Expr) -> Expr:
    if isinstance(e, Num):
        return Num(-e.value)
    if isinstance(e, Mul) and isinstance(e.factors[0], Num):
        return mul(Num(-e.factors[0].value), *e.factors[1:])
    return mul(Num(Fraction(-1)), e)


def ln(e) -> Expr:
    return Call("ln", as_expr(e))


def sqrt(e) -> Expr:
    return Call("sqrt", as_expr(e))


def absval(e) -> Expr:
    return Call("abs", as_expr(e))


def exp(e) -> Expr:
    return Call("exp", as_expr(e))


def symbols(names: str) -> tuple:
    return tuple(Sym(s) for s in names.split())


def walk(e: Expr) -> Iterable[Expr]:
    """Pre-order traversal."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Add):
            stack.extend(reversed(node.terms))
        elif isinstance(node, Mul):
            stack.extend(reversed(node.factors))
        elif isinstance(node, Pow):
            stack.extend((node.exp, node.base))
        elif isinstance(node, Call):
            stack.append(node.arg)
        elif isinstance(node, Fn):
            stack.extend(reversed(node.args))


def free_symbols(e: Expr) -> frozenset:
    return frozenset(n.name for n in walk(e) if isinstance(n, Sym))


def function_symbols(e: Expr) -> frozenset:
    return frozenset(n.name for n in walk(e) if isinstance(n, Fn))
