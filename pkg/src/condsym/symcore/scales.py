"""Splitting an expression by powers of a scale variable and of its logarithm."""
from __future__ import annotations

from condsym.symcore.expr import Expr, Sym, as_expr, ln, mul, power
from condsym.symcore.normal import FuncAtom, NormalExpr, SymAtom, normalize, poly_to_expr, to_expr
from condsym.symcore.poly import Poly


class ScaleError(ValueError):
    pass


def scale_expr(exponent: Poly, logpower: int, var: str = "x0") -> Expr:
    """Render ``var^exponent * ln(var)^logpower``."""
    return mul(power(Sym(var), poly_to_expr(exponent)), power(ln(Sym(var)), as_expr(logpower)))


def collect_scales(e, var: str = "x0") -> dict:
    """Map ``(power of var, power of ln var)`` to the coefficient expression.

    Exponents stay exact polynomials in the parameters, so ``x0^(beta-2)``
    and ``x0^(-2)`` land in different buckets for generic ``beta``. Any other
    occurrence of ``var`` (inside a function argument, a radical, a symbolic
    power) makes the split ill-defined and raises :class:`ScaleError`.
    """
    ne = e if isinstance(e, NormalExpr) else normalize(as_expr(e))
    x = SymAtom(var)
    lnx = FuncAtom("ln", NormalExpr.atom(x))
    buckets: dict = {}
    for mono, c in ne.terms.items():
        p = Poly()
        k = 0
        rest = []
        for a, ex in mono:
            if a == x:
                p = ex
            elif a == lnx:
                if not (ex.is_integer() and ex.number() >= 0):
                    raise ScaleError(f"ln({var}) raised to {ex}, not a non-negative integer")
                k = int(ex.number())
            elif var in a.syms:
                raise ScaleError(f"{var} occurs inside {to_expr(NormalExpr.atom(a))}; cannot separate scales")
            else:
                rest.append((a, ex))
        key = (p, k)
        bucket = buckets.setdefault(key, {})
        m = tuple(rest)
        bucket[m] = bucket[m] + c if m in bucket else c
    out = {}
    for key in sorted(buckets, key=lambda kk: (str(kk[0]), kk[1])):
        b = NormalExpr(buckets[key])
        if not b.is_zero():
            out[key] = b
    return out


def merge_specialized(buckets: dict, params: dict) -> dict:
    """Re-bucket after substituting numeric parameter values.

    Raises :class:`ScaleError` naming both exponents when two symbolically
    distinct powers become equal under the specialization.
    """
    out: dict = {}
    origin: dict = {}
    for (p, k), b in buckets.items():
        q = p.subs(params)
        key = (q, k)
        if key in out:
            raise ScaleError(f"scale exponents {origin[key]} and {p} coincide at {params}; specialize first")
        out[key] = b
        origin[key] = p
    return out
