"""Render expressions in the ASCII grammar accepted by :func:`parse`."""
from __future__ import annotations

from fractions import Fraction

from condsym.symcore.expr import Add, Call, Expr, Fn, Mul, Num, Pow, Sym


def _num(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _is_negative(e: Expr) -> bool:
    if isinstance(e, Num):
        return e.value < 0
    return isinstance(e, Mul) and isinstance(e.factors[0], Num) and e.factors[0].value < 0


def _negate(e: Expr) -> Expr:
    if isinstance(e, Num):
        return Num(-e.value)
    c = -e.factors[0].value
    rest = e.factors[1:]
    if c == 1:
        return rest[0] if len(rest) == 1 else Mul(rest)
    return Mul((Num(c),) + rest)


def _atomic(e: Expr) -> str:
    """Render ``e`` so it can sit as a power base or exponent."""
    if isinstance(e, (Sym, Fn, Call)):
        return to_string(e)
    if isinstance(e, Num) and e.value >= 0 and e.value.denominator == 1:
        return _num(e.value)
    return f"({to_string(e)})"


def _factor(e: Expr) -> str:
    if isinstance(e, Add):
        return f"({to_string(e)})"
    if isinstance(e, Num) and (e.value < 0 or e.value.denominator != 1):
        return f"({_num(e.value)})"
    return to_string(e)


def to_string(e: Expr) -> str:
    if isinstance(e, Num):
        return _num(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Add):
        out = to_string(e.terms[0])
        for t in e.terms[1:]:
            if _is_negative(t):
                out += " - " + to_string(_negate(t))
            else:
                out += " + " + to_string(t)
        return out
    if isinstance(e, Mul):
        factors = list(e.factors)
        prefix = ""
        if isinstance(factors[0], Num) and factors[0].value == -1 and len(factors) > 1:
            prefix = "-"
            factors = factors[1:]
        elif isinstance(factors[0], Num) and factors[0].value < 0 and factors[0].value.denominator == 1:
            prefix = "-" + _num(-factors[0].value) + "*"
            factors = factors[1:]
        return prefix + "*".join(_factor(f) for f in factors)
    if isinstance(e, Pow):
        return f"{_atomic(e.base)}^{_atomic(e.exp)}"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, Fn):
        args = ",".join(to_string(a) for a in e.args)
        if e.index:
            return f"D[{e.name},{','.join(map(str, e.index))}]({args})"
        return f"{e.name}({args})"
    raise TypeError(f"not an expression: {e!r}")
