"""Differentiation and substitution on expression trees."""
from __future__ import annotations

from fractions import Fraction

from condsym.symcore.expr import Add, Call, Expr, Fn, Lambda, Mul, Num, Pow, Sym, add, as_expr, mul, power
from condsym.symcore.normal import NormalExpr, ndiff, normalize, to_expr


def differentiate(e, var, times: int = 1) -> Expr:
    """Partial derivative of ``e`` with respect to the variable ``var``.

    The result is returned in normal form; unknown functions differentiate to
    derivative markers via the chain rule through their arguments.
    """
    name = var.name if isinstance(var, Sym) else var
    ne = e if isinstance(e, NormalExpr) else normalize(as_expr(e))
    for _ in range(times):
        ne = ndiff(ne, name)
    return to_expr(ne)


def _binding(v):
    if isinstance(v, Lambda):
        return v
    if isinstance(v, (int, Fraction)):
        return Num(v)
    if isinstance(v, NormalExpr):
        return to_expr(v)
    if isinstance(v, str):
        from condsym.symcore.parser import parse

        return parse(v)
    return v


def substitute(e: Expr, mapping: dict) -> Expr:
    """Simultaneously replace symbols and bind function symbols.

    ``mapping`` maps a symbol name to an expression, or a function name to a
    :class:`Lambda`. A bound derivative marker ``D[f,i..](args)`` becomes the
    matching partial of the lambda body evaluated at ``args``.
    """
    binds = {(k.name if isinstance(k, (Sym, Fn)) else k): _binding(v) for k, v in mapping.items()}
    cache: dict = {}

    def body_deriv(name, index):
        key = (name, index)
        if key not in cache:
            lam = binds[name]
            d = lam.body
            for i in index:
                d = differentiate(d, lam.params[i - 1])
            cache[key] = d
        return cache[key]

    def walk(node):
        if isinstance(node, Num):
            return node
        if isinstance(node, Sym):
            v = binds.get(node.name)
            if v is None or isinstance(v, Lambda):
                return node
            return v
        if isinstance(node, Add):
            return add(*[walk(t) for t in node.terms])
        if isinstance(node, Mul):
            return mul(*[walk(f) for f in node.factors])
        if isinstance(node, Pow):
            return power(walk(node.base), walk(node.exp))
        if isinstance(node, Call):
            return Call(node.func, walk(node.arg))
        if isinstance(node, Fn):
            args = tuple(walk(a) for a in node.args)
            lam = binds.get(node.name)
            if isinstance(lam, Lambda):
                if len(lam.params) != len(args):
                    raise ValueError(
                        f"{node.name} is bound to {len(lam.params)} parameters but applied to {len(args)} arguments"
                    )
                body = body_deriv(node.name, node.index) if node.index else lam.body
                inner = {(p.name if isinstance(p, Sym) else p): a for p, a in zip(lam.params, args)}
                return substitute(body, inner)
            return Fn(node.name, args, node.index)
        raise TypeError(f"cannot substitute into {node!r}")

    return walk(as_expr(e))


def simplify(e) -> Expr:
    """Normal form rendered back as a tree."""
    return to_expr(normalize(as_expr(e)))
