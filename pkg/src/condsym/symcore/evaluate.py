"""Floating-point evaluation: a direct tree walker and a compiled form.

:func:`eval_numeric` is the reference evaluator. :func:`compile_program`
lowers an expression to the postfix program run by the kernels, which is what
the numeric oracles use in their sampling loops.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from condsym import kernels
from condsym.symcore.calculus import differentiate, substitute
from condsym.symcore.expr import Add, Call, Expr, Fn, Lambda, Mul, Num, Pow, Sym, as_expr
from condsym.symcore.normal import NormalExpr, to_expr
from condsym.symcore.printer import to_string


class EvaluationError(ValueError):
    pass


class UnboundSymbolError(EvaluationError):
    def __init__(self, name: str):
        super().__init__(f"unbound symbol {name!r}")
        self.name = name


class DomainError(EvaluationError):
    def __init__(self, reason: str, subexpr: str):
        super().__init__(f"{reason} in {subexpr}")
        self.reason = reason
        self.subexpr = subexpr


@dataclass
class Assignment:
    """Values for symbols plus bindings for function symbols.

    A function binding is either a :class:`Lambda` (closed form, derivatives
    taken symbolically) or a callable ``f(args, index) -> float``.
    """

    values: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)


def _as_assignment(a, functions=None) -> Assignment:
    if isinstance(a, Assignment):
        return a
    return Assignment(dict(a or {}), dict(functions or {}))


def eval_numeric(e, a=None, functions=None) -> float:
    """Evaluate ``e`` under assignment ``a`` (an :class:`Assignment` or dict)."""
    a = _as_assignment(a, functions)
    if isinstance(e, NormalExpr):
        e = to_expr(e)
    e = as_expr(e)
    lam_cache: dict = {}

    def fail(reason, node):
        raise DomainError(reason, to_string(node))

    def ev(node) -> float:
        if isinstance(node, Num):
            return float(node.value)
        if isinstance(node, Sym):
            if node.name not in a.values:
                raise UnboundSymbolError(node.name)
            return float(a.values[node.name])
        if isinstance(node, Add):
            return math.fsum(ev(t) for t in node.terms)
        if isinstance(node, Mul):
            out = 1.0
            for f in node.factors:
                out *= ev(f)
            return out
        if isinstance(node, Pow):
            b = ev(node.base)
            if isinstance(node.exp, Num) and node.exp.value.denominator == 1:
                k = node.exp.value.numerator
                if b == 0.0 and k < 0:
                    fail("division by zero", node)
                return b ** k
            x = ev(node.exp)
            if b < 0.0 and x != math.floor(x):
                fail("negative base with fractional exponent", node)
            if b == 0.0 and x < 0.0:
                fail("division by zero", node)
            return math.pow(b, x)
        if isinstance(node, Call):
            x = ev(node.arg)
            if node.func == "ln":
                if x <= 0.0:
                    fail("log of non-positive value", node)
                return math.log(x)
            if node.func == "sqrt":
                if x < 0.0:
                    fail("sqrt of negative value", node)
                return math.sqrt(x)
            if node.func == "abs":
                return abs(x)
            return math.exp(x)
        if isinstance(node, Fn):
            if node.name not in a.functions:
                raise UnboundSymbolError(node.name)
            args = tuple(ev(x) for x in node.args)
            binding = a.functions[node.name]
            if isinstance(binding, Lambda):
                key = (node.name, node.index)
                if key not in lam_cache:
                    body = binding.body
                    for i in node.index:
                        body = differentiate(body, binding.params[i - 1])
                    lam_cache[key] = body
                if len(binding.params) != len(args):
                    raise EvaluationError(f"{node.name} expects {len(binding.params)} arguments")
                inner = Assignment({**a.values, **{(p.name if isinstance(p, Sym) else p): v
                                                  for p, v in zip(binding.params, args)}}, a.functions)
                return eval_numeric(lam_cache[key], inner)
            return float(binding(args, node.index))
        raise TypeError(f"cannot evaluate {node!r}")

    return ev(e)


# ---------------------------------------------------------------- programs
_OP = kernels.OPCODES


@dataclass
class Program:
    code: np.ndarray
    consts: np.ndarray
    variables: tuple
    nodes: list

    def _point(self, values) -> np.ndarray:
        if isinstance(values, dict):
            try:
                return np.array([float(values[v]) for v in self.variables], dtype=np.float64)
            except KeyError as exc:
                raise UnboundSymbolError(exc.args[0]) from None
        return np.ascontiguousarray(values, dtype=np.float64)

    def __call__(self, values) -> float:
        v, st, pos = kernels.eval_one(self.code, self.consts, self._point(values))
        if st:
            raise DomainError(kernels.STATUS[st], to_string(self.nodes[pos]))
        return v

    def batch(self, X, check: bool = True):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.variables):
            raise ValueError(f"expected an (m, {len(self.variables)}) array")
        values, status, where = kernels.eval_batch(self.code, self.consts, X)
        if check:
            bad = np.flatnonzero(status)
            if bad.size:
                r = int(bad[0])
                raise DomainError(kernels.STATUS[int(status[r])] + f" (row {r})", to_string(self.nodes[int(where[r])]))
            return values
        return values, status, where


def compile_program(e, variables) -> Program:
    """Lower ``e`` to a postfix program over ``variables``.

    Variable names are matched against symbols and against the rendered form
    of function applications (e.g. ``"D[phi,1](w)"``), so unknown-function
    values can be fed in as plain inputs.
    """
    if isinstance(e, NormalExpr):
        e = to_expr(e)
    e = as_expr(e)
    variables = tuple(variables)
    index = {v: i for i, v in enumerate(variables)}
    code: list = []
    consts: list = []
    cidx: dict = {}
    nodes: list = []

    def emit(op, arg, node):
        code.extend((_OP[op], arg))
        nodes.append(node)

    def const(v: float, node):
        if v not in cidx:
            cidx[v] = len(consts)
            consts.append(v)
        emit("CONST", cidx[v], node)

    def go(node):
        if isinstance(node, Num):
            const(float(node.value), node)
        elif isinstance(node, Sym):
            if node.name not in index:
                raise UnboundSymbolError(node.name)
            emit("VAR", index[node.name], node)
        elif isinstance(node, Fn):
            key = to_string(node)
            if key not in index:
                raise UnboundSymbolError(key)
            emit("VAR", index[key], node)
        elif isinstance(node, (Add, Mul)):
            kids = node.terms if isinstance(node, Add) else node.factors
            go(kids[0])
            for k in kids[1:]:
                go(k)
                emit("ADD" if isinstance(node, Add) else "MUL", 0, node)
        elif isinstance(node, Pow):
            go(node.base)
            x = node.exp
            if isinstance(x, Num) and x.value.denominator == 1 and abs(x.value.numerator) < 2**31:
                emit("IPOW", x.value.numerator, node)
            elif isinstance(x, Num) and x.value == Fraction(1, 2):
                emit("SQRT", 0, node)
            elif isinstance(x, Num) and x.value == Fraction(-1, 2):
                emit("SQRT", 0, node)
                emit("INV", 0, node)
            else:
                go(x)
                emit("POW", 0, node)
        elif isinstance(node, Call):
            go(node.arg)
            emit({"ln": "LN", "sqrt": "SQRT", "abs": "ABS", "exp": "EXP"}[node.func], 0, node)
        else:
            raise TypeError(f"cannot compile {node!r}")

    go(e)
    return Program(np.array(code, dtype=np.int32), np.array(consts or [0.0], dtype=np.float64), variables, nodes)


def bind_functions(e, bindings: dict) -> Expr:
    """Replace function symbols by closed-form lambdas before compiling."""
    return substitute(as_expr(e) if not isinstance(e, NormalExpr) else to_expr(e), bindings)
