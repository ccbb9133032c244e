"""Recursive-descent parser for the ASCII expression grammar.

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | base ('^' ['-'] base)?
    base   := rational | ident | ident '(' expr (',' expr)* ')'
            | 'D[' ident (',' int)+ ']' ['(' expr (',' expr)* ')']
            | '(' expr ')'

Unary minus and the optional argument list after a derivative marker extend
the core grammar so that every rendered expression parses back. A bare
function symbol (``phi``) or marker (``D[phi,1]``) gets default arguments:
``(w,)`` unless ``nvars`` asks for ``(w1, ..., w_nvars)``.
"""
from __future__ import annotations

import re
from fractions import Fraction

from condsym.symcore.expr import Call, Expr, Fn, Num, Sym, add, mul, neg, power

CORE_SYMBOLS = frozenset(
    [f"x{i}" for i in range(10)]
    + [f"w{i}" for i in range(1, 10)]
    + ["w", "u", "alpha", "n"]
    + [f"m{i}" for i in range(1, 10)]
    + ["c1", "c2", "c3"]
)
EXTRA_SYMBOLS = frozenset(["beta", "lam", "k"])
CORE_FUNCTIONS = frozenset(["phi", "psi"])
EXTRA_FUNCTIONS = frozenset(["F", "Q"])
ELEMENTARY = frozenset(["ln", "sqrt", "abs"])
JET_RE = re.compile(r"u_\d+$")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<rat>\d+/\d+)|(?P<int>\d+)|(?P<ident>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^(),\[\]]))"
)


class ParseError(ValueError):
    """Syntax error; ``offset`` is the 1-based byte position of the problem."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at offset {pos + 1}")
        self.offset = pos + 1


def _tokenize(text: str):
    pos = 0
    toks = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text, symbols, functions, elementary, fargs, jets):
        self.toks = _tokenize(text)
        self.i = 0
        self.symbols = symbols
        self.functions = functions
        self.elementary = elementary
        self.fargs = fargs
        self.jets = jets

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value or kind == "eof":
            raise ParseError(f"expected {value!r}", off)

    def expr(self) -> Expr:
        items = [self.term()]
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            t = self.term()
            items.append(t if op == "+" else neg(t))
        return items[0] if len(items) == 1 else add(*items)

    def term(self) -> Expr:
        items = [self.factor()]
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            f = self.factor()
            items.append(f if op == "*" else power(f, Num(-1)))
        return items[0] if len(items) == 1 else mul(*items)

    def factor(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return neg(self.factor())
        b = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            if self.peek()[:2] == ("op", "-"):
                self.take()
                return power(b, neg(self.base()))
            return power(b, self.base())
        return b

    def arglist(self):
        self.expect("(")
        args = [self.expr()]
        while self.peek()[:2] == ("op", ","):
            self.take()
            args.append(self.expr())
        self.expect(")")
        return tuple(args)

    def base(self) -> Expr:
        kind, val, off = self.take()
        if kind == "rat":
            p, q = val.split("/")
            if int(q) == 0:
                raise ParseError("zero denominator", off)
            return Num(Fraction(int(p), int(q)))
        if kind == "int":
            return Num(Fraction(int(val)))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            if val == "D" and self.peek()[:2] == ("op", "["):
                return self.marker(off)
            if val in self.elementary:
                args = self.arglist()
                if len(args) != 1:
                    raise ParseError(f"{val} takes one argument", off)
                return Call(val, args[0])
            if val in self.functions:
                if self.peek()[:2] == ("op", "("):
                    return Fn(val, self.arglist())
                return Fn(val, self.default_args(val, off))
            if val in self.symbols or (self.jets and JET_RE.match(val)):
                return Sym(val)
            raise ParseError(f"unknown identifier {val!r}", off)
        if kind == "eof":
            raise ParseError("unexpected end of input", off)
        raise ParseError(f"unexpected {val!r}", off)

    def marker(self, off) -> Expr:
        self.expect("[")
        kind, name, noff = self.take()
        if kind != "ident" or name not in self.functions:
            raise ParseError(f"unknown function symbol {name!r}", noff)
        idx = []
        while self.peek()[:2] == ("op", ","):
            self.take()
            k, v, o = self.take()
            if k != "int":
                raise ParseError("expected derivative index", o)
            idx.append(int(v))
        if not idx:
            raise ParseError("derivative marker needs an index", self.peek()[2])
        self.expect("]")
        if self.peek()[:2] == ("op", "("):
            args = self.arglist()
        else:
            args = self.default_args(name, off)
        try:
            return Fn(name, args, tuple(idx))
        except ValueError as exc:
            raise ParseError(str(exc), off) from None

    def default_args(self, name, off):
        if name not in self.fargs:
            raise ParseError(f"function symbol {name!r} needs explicit arguments", off)
        return self.fargs[name]


def parse(
    text: str,
    *,
    symbols=(),
    functions=(),
    nvars: int | None = None,
    fargs: dict | None = None,
    strict: bool = False,
    jets: bool = True,
) -> Expr:
    """Parse ``text`` into an :class:`Expr`.

    ``strict`` restricts identifiers to the core grammar; otherwise the small
    extension set (``beta``, ``lam``, ``k``, ``exp``, ``F``, ``Q`` and jet
    variables ``u_<digits>``) is accepted too. ``symbols``/``functions`` add
    further declared names.
    """
    syms = set(CORE_SYMBOLS) | set(symbols)
    funcs = set(CORE_FUNCTIONS) | set(functions)
    elementary = set(ELEMENTARY)
    if not strict:
        syms |= EXTRA_SYMBOLS
        funcs |= EXTRA_FUNCTIONS
        elementary.add("exp")
    w_args = (Sym("w"),) if nvars is None else tuple(Sym(f"w{i}") for i in range(1, nvars + 1))
    defaults = {"phi": w_args, "psi": w_args, "F": (Sym("u"),), "Q": (Sym("w"),)}
    if fargs:
        defaults.update({k: tuple(v) for k, v in fargs.items()})
    p = _Parser(text, frozenset(syms), frozenset(funcs), frozenset(elementary), defaults, jets and not strict)
    e = p.expr()
    kind, val, off = p.peek()
    if kind != "eof":
        raise ParseError(f"unexpected {val!r}", off)
    return e
