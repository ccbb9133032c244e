"""Canonical sum-of-monomials form.

A :class:`NormalExpr` maps monomials to coefficients in the parameter ring
(:class:`~condsym.symcore.poly.Poly`). A monomial is a sorted tuple of
``(atom, exponent)`` pairs where the exponent is itself a ``Poly``, so
``x0^(alpha-2)`` is a single monomial. Atoms are

* ``SymAtom``   plain variables (x0, w1, u, jets ...),
* ``FnAtom``    an unknown function (or one of its partials) at normalized args,
* ``FuncAtom``  ``ln``/``abs``/``exp`` of a normalized argument,
* ``BaseAtom``  a sum raised to a negative, fractional or symbolic power,
* ``PowAtom``   ``b^e`` where ``e`` involves variables (kept opaque).

Sums raised to non-negative integer powers are always expanded, so two
expressions built from polynomial pieces are equal iff their normal forms are.
Rational and radical pieces are handled by :func:`is_zero`, which clears
``BaseAtom``/``abs`` exponents before comparing.
"""
from __future__ import annotations

import contextlib
import math
from fractions import Fraction
from functools import lru_cache

from condsym.symcore.expr import Add, Call, Expr, Fn, Lambda, Mul, Num, Pow, Sym, ZERO, add, mul, power
from condsym.symcore.poly import PARAMETERS, Poly

_POSITIVE = {"x0"}
_P1 = Poly.const(1)


@contextlib.contextmanager
def positive_symbols(names):
    """Temporarily extend the set of variables assumed positive."""
    global _POSITIVE
    old = _POSITIVE
    _POSITIVE = set(old) | set(names)
    _clear_caches()
    try:
        yield
    finally:
        _POSITIVE = old
        _clear_caches()


def _clear_caches():
    _datom.cache_clear()


# --------------------------------------------------------------------- atoms
class Atom:
    __slots__ = ("key", "_hash", "syms", "fnames")

    def _finish(self, key, syms, fnames):
        self.key = key
        self._hash = hash(key)
        self.syms = syms
        self.fnames = fnames

    def __eq__(self, other):
        return isinstance(other, Atom) and self.key == other.key

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return self.key


class SymAtom(Atom):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._finish("s:" + name, frozenset([name]), frozenset())


class FnAtom(Atom):
    __slots__ = ("name", "args", "index")

    def __init__(self, name: str, args: tuple, index: tuple = ()):
        self.name = name
        self.args = tuple(args)
        self.index = tuple(sorted(index))
        for i in self.index:
            if not 1 <= i <= len(self.args):
                raise ValueError(f"derivative index {i} out of range for {name}/{len(self.args)}")
        key = f"f:{name}[{','.join(map(str, self.index))}]({';'.join(a.key for a in self.args)})"
        syms = frozenset().union(*(a.syms for a in self.args)) if self.args else frozenset()
        fnames = frozenset([name]).union(*(a.fnames for a in self.args))
        self._finish(key, syms, fnames)


class FuncAtom(Atom):
    __slots__ = ("func", "arg")

    def __init__(self, func: str, arg: "NormalExpr"):
        self.func = func
        self.arg = arg
        self._finish(f"c:{func}({arg.key})", arg.syms, arg.fnames)


class BaseAtom(Atom):
    __slots__ = ("base",)

    def __init__(self, base: "NormalExpr"):
        self.base = base
        self._finish(f"b:({base.key})", base.syms, base.fnames)


class PowAtom(Atom):
    __slots__ = ("base", "exp")

    def __init__(self, base: "NormalExpr", exp: "NormalExpr"):
        self.base = base
        self.exp = exp
        self._finish(f"p:({base.key})^({exp.key})", base.syms | exp.syms, base.fnames | exp.fnames)


def _is_positive(atom: Atom) -> bool:
    if isinstance(atom, SymAtom):
        return atom.name in _POSITIVE
    if isinstance(atom, FuncAtom):
        return atom.func in ("exp", "abs")
    return isinstance(atom, PowAtom)


def _is_even(p: Poly) -> bool:
    return p.is_integer() and p.number() % 2 == 0


def _mono_key(mono: tuple) -> tuple:
    return tuple((a.key, e.key()) for a, e in mono)


def _degree(mono: tuple) -> Fraction:
    return sum((e.number() for _, e in mono if e.is_number()), Fraction(0))


# ----------------------------------------------------------------- NormalExpr
class NormalExpr:
    __slots__ = ("terms", "_key", "_hash", "_syms", "_fnames")

    def __init__(self, terms=None):
        self.terms = {m: c for m, c in (terms or {}).items() if not c.is_zero()}
        self._key = None
        self._hash = None
        self._syms = None
        self._fnames = None

    # -- constructors
    @staticmethod
    def const(c) -> "NormalExpr":
        return NormalExpr({(): Poly.coerce(c)})

    @staticmethod
    def atom(a: Atom, e=1) -> "NormalExpr":
        return NormalExpr({((a, Poly.coerce(e)),): _P1})

    # -- structure
    @property
    def key(self) -> str:
        if self._key is None:
            parts = []
            for mono, c in sorted(self.terms.items(), key=lambda kv: _mono_key(kv[0])):
                parts.append(f"{c}*" + ".".join(f"{a.key}^{e}" for a, e in mono))
            self._key = "{" + " + ".join(parts) + "}"
        return self._key

    @property
    def syms(self) -> frozenset:
        if self._syms is None:
            self._syms = frozenset(s for mono in self.terms for a, e in mono for s in a.syms)
        return self._syms

    @property
    def fnames(self) -> frozenset:
        if self._fnames is None:
            self._fnames = frozenset(s for mono in self.terms for a, _ in mono for s in a.fnames)
        return self._fnames

    def params(self) -> frozenset:
        out = set()
        for mono, c in self.terms.items():
            out |= c.params()
            for a, e in mono:
                out |= e.params()
        return frozenset(out)

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(m == () for m in self.terms)

    def const_value(self) -> Poly:
        if not self.is_const():
            raise ValueError("not a constant")
        return self.terms.get((), Poly())

    def atoms(self) -> set:
        return {a for mono in self.terms for a, _ in mono}

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: _mono_key(kv[0]))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, Poly)):
            other = NormalExpr.const(other)
        if not isinstance(other, NormalExpr):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __repr__(self):
        return f"NormalExpr({to_expr(self)})"

    def __str__(self):
        return str(to_expr(self))

    # -- arithmetic
    @staticmethod
    def coerce(x) -> "NormalExpr":
        if isinstance(x, NormalExpr):
            return x
        if isinstance(x, Expr):
            return normalize(x)
        return NormalExpr.const(x)

    def __add__(self, other):
        other = NormalExpr.coerce(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        d = dict(self.terms)
        for m, c in other.terms.items():
            d[m] = d[m] + c if m in d else c
        return NormalExpr(d)

    __radd__ = __add__

    def __neg__(self):
        return NormalExpr({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-NormalExpr.coerce(other))

    def __rsub__(self, other):
        return NormalExpr.coerce(other) - self

    def scale(self, c) -> "NormalExpr":
        c = Poly.coerce(c)
        if c.is_zero():
            return NormalExpr()
        return NormalExpr({m: v * c for m, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Poly)):
            return self.scale(other)
        other = NormalExpr.coerce(other)
        acc: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                for m, c in _mono_mul(m1, m2, c1 * c2).terms.items():
                    acc[m] = acc[m] + c if m in acc else c
        return NormalExpr(acc)

    __rmul__ = __mul__

    def __pow__(self, e):
        return npow(self, e)


ONE_NE = NormalExpr.const(1)
ZERO_NE = NormalExpr()


def _atom_value(a: Atom) -> NormalExpr:
    """The atom itself (exponent 1) as an expression."""
    if isinstance(a, BaseAtom):
        return a.base
    return NormalExpr.atom(a)


# --------------------------------------------------------- canonical monomials
def _mono_mul(m1: tuple, m2: tuple, coef: Poly) -> NormalExpr:
    if not m1:
        factors = dict(m2)
    elif not m2:
        factors = dict(m1)
    else:
        factors = dict(m1)
        for a, e in m2:
            factors[a] = factors[a] + e if a in factors else e
    return _canon(factors, coef)


def _canon(factors: dict, coef: Poly) -> NormalExpr:
    """Build ``coef * prod(atom^e)`` applying the canonicalization rules."""
    if coef.is_zero():
        return NormalExpr()
    extra = None
    clean = {}
    exps = []
    for a, e in factors.items():
        if e.is_zero():
            continue
        if isinstance(a, FuncAtom):
            if a.func == "exp":
                exps.append((a, e))
                continue
            if a.func == "abs" and _is_even(e):
                extra = _pow_const(a.arg, e) if extra is None else extra * _pow_const(a.arg, e)
                continue
        elif isinstance(a, BaseAtom) and e.is_number() and e.number() >= 1:
            k = math.floor(e.number())
            piece = _pow_const(a.base, Poly.const(k))
            extra = piece if extra is None else extra * piece
            e = e - k
            if e.is_zero():
                continue
        clean[a] = e
    if exps:
        if len(exps) == 1 and exps[0][1] == _P1:
            clean[exps[0][0]] = _P1
        else:
            arg = NormalExpr()
            for a, e in exps:
                arg = arg + a.arg.scale(e)
            piece, atom = _exp_split(arg)
            if atom is not None:
                clean[atom] = _P1
            if piece is not None:
                extra = piece if extra is None else extra * piece
    out = NormalExpr({tuple(sorted(clean.items(), key=lambda kv: kv[0].key)): coef})
    return out if extra is None else out * extra


# ------------------------------------------------------------ normalization
def _split_poly(c: Poly, sign: bool):
    """``c = k * p`` with ``k`` a monomial (content, parameter gcd, sign)."""
    cont = c.content()
    low: dict = {}
    first = True
    for m in c.terms:
        d = dict(m)
        if first:
            low = d
            first = False
        else:
            low = {p: min(v, d[p]) for p, v in low.items() if p in d}
    k = Poly({tuple(sorted((p, v) for p, v in low.items() if v != 0)): cont})
    if sign and c.leading() < 0:
        k = -k
    return k, c / k


def _denominator(ne: NormalExpr):
    """Atoms with negative numeric exponents (as positive powers) and the
    coefficient monomial clearing negative parameter powers."""
    lows: dict = {}
    first = True
    for mono, _ in ne.terms.items():
        d = {a: e.number() for a, e in mono if e.is_number()}
        if first:
            lows = {a: min(v, 0) for a, v in d.items()}
            first = False
        else:
            for a in set(lows) | set(d):
                lows[a] = min(lows.get(a, 0), d.get(a, 0))
    plow: dict = {}
    for c in ne.terms.values():
        for p, v in c.min_powers().items():
            plow[p] = min(plow.get(p, 0), v)
    dfac = {a: Poly.const(-v) for a, v in lows.items() if v < 0}
    dcoef = Poly({tuple(sorted((p, -v) for p, v in plow.items())): 1})
    return dfac, dcoef


def together(ne: NormalExpr):
    """Return ``(N, D)`` with ``ne == N/D``.

    ``D`` clears every negative numeric exponent (and negative parameter
    powers in the coefficients). It is a single monomial unless a cleared
    atom is a sum, which the canonical form expands.
    """
    dfac, dcoef = _denominator(ne)
    if not dfac and dcoef == _P1:
        return ne, ONE_NE
    D = _canon(dfac, dcoef)
    return ne * D, D


def _extract(N: NormalExpr, sign: bool):
    """Split ``N = k * m * N'`` with ``k`` a coefficient monomial, ``m`` a monomial."""
    lows = None
    for mono in N.terms:
        d = {a: e.number() for a, e in mono if e.is_number()}
        if lows is None:
            lows = d
        else:
            lows = {a: min(v, d[a]) for a, v in lows.items() if a in d}
    mfac = {a: Poly.const(v) for a, v in (lows or {}).items() if v != 0}
    cont = Fraction(0)
    plow = None
    for c in N.terms.values():
        cont = Fraction(math.gcd(cont.numerator, c.content().numerator),
                        math.lcm(cont.denominator, c.content().denominator)) if cont else c.content()
        for m in c.terms:
            d = dict(m)
            plow = d if plow is None else {p: min(v, d[p]) for p, v in plow.items() if p in d}
    k = Poly({tuple(sorted((p, v) for p, v in (plow or {}).items() if v != 0)): cont})
    if sign:
        lead = min(N.terms, key=lambda m: (-_degree(m), _mono_key(m)))
        if N.terms[lead].leading() < 0:
            k = -k
    inv = {a: -e for a, e in mfac.items()}
    rest = NormalExpr()
    kinv = k.inverse()
    for mono, c in N.terms.items():
        rest = rest + _mono_mul(mono, tuple(inv.items()), c * kinv)
    return k, mfac, rest


def _root(q: Fraction, e: Fraction):
    """Exact ``q**e`` for rational ``q > 0`` if it is rational, else None."""
    num, den = e.numerator, e.denominator

    def iroot(v):
        r = round(v ** (1.0 / den))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand ** den == v:
                return cand
        return None

    a, b = iroot(q.numerator), iroot(q.denominator)
    if a is None or b is None:
        return None
    return Fraction(a, b) ** num


def _pow_coef(c: Poly, e: Poly) -> NormalExpr:
    if c == _P1:
        return ONE_NE
    if e.is_integer():
        if c.is_monomial():
            return NormalExpr.const(c ** int(e.number()))
        k, p = _split_poly(c, sign=True)
        return NormalExpr.const(k ** int(e.number())) * _canon({BaseAtom(NormalExpr.const(p)): e}, _P1)
    if c.is_number() and c.number() > 0:
        if e.is_number():
            r = _root(c.number(), e.number())
            if r is not None:
                return NormalExpr.const(r)
        return _canon({BaseAtom(NormalExpr.const(c)): e}, _P1)
    return _canon({BaseAtom(NormalExpr.const(c)): e}, _P1)


def _pow_mono(mono: tuple, c: Poly, e: Poly) -> NormalExpr:
    integer = e.is_integer()
    out = _pow_coef(c, e)
    factors = {}
    extra = None
    for a, ea in mono:
        ne = ea * e
        if not integer and _is_even(ea) and not _is_positive(a):
            piece = _pow_const(_abs_atom(a), ne)
            extra = piece if extra is None else extra * piece
        else:
            factors[a] = ne
    out = out * _canon(factors, _P1)
    return out if extra is None else out * extra


def _pow_const(B: NormalExpr, e: Poly) -> NormalExpr:
    if e.is_zero():
        return ONE_NE
    if e.is_integer() and e.number() > 0:
        k = int(e.number())
        out = ONE_NE
        base = B
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out
    if B.is_zero():
        if e.is_number() and e.number() > 0:
            return ZERO_NE
        raise ZeroDivisionError("zero raised to a non-positive power")
    if len(B.terms) == 1:
        (mono, c), = B.terms.items()
        return _pow_mono(mono, c, e)
    dfac, dcoef = _denominator(B)
    if not dfac and dcoef == _P1:
        return _pow_sum(B, e)
    out = _pow_sum(B * _canon(dfac, dcoef), e)
    return out * _pow_mono(tuple(sorted(dfac.items())), dcoef, -e)


def _pow_sum(N: NormalExpr, e: Poly) -> NormalExpr:
    if len(N.terms) == 1:
        (mono, c), = N.terms.items()
        return _pow_mono(mono, c, e)
    k, mfac, rest = _extract(N, sign=e.is_integer())
    out = _pow_coef(k, e)
    if mfac:
        out = out * _pow_mono(tuple(mfac.items()), _P1, e)
    if rest == ONE_NE:
        return out
    if len(rest.terms) == 1:
        (mono, c), = rest.terms.items()
        return out * _pow_mono(mono, c, e)
    return out * _canon({BaseAtom(rest): e}, _P1)


def npow(B, E) -> NormalExpr:
    B = NormalExpr.coerce(B)
    if isinstance(E, (int, Fraction, Poly)):
        return _pow_const(B, Poly.coerce(E))
    E = NormalExpr.coerce(E)
    if E.is_const():
        return _pow_const(B, E.const_value())
    if B == ONE_NE:
        return ONE_NE
    return NormalExpr.atom(PowAtom(B, E))


def _abs_atom(a: Atom) -> NormalExpr:
    if isinstance(a, (SymAtom, FnAtom, PowAtom)) or (isinstance(a, FuncAtom) and a.func == "ln"):
        return NormalExpr.atom(FuncAtom("abs", NormalExpr.atom(a)))
    return nabs(_atom_value(a))


def nabs(g) -> NormalExpr:
    g = NormalExpr.coerce(g)
    if g.is_zero():
        return ZERO_NE
    if len(g.terms) == 1:
        (mono, c), = g.terms.items()
        if c.is_number():
            out = NormalExpr.const(abs(c.number()))
        else:
            k, p = _split_poly(c, sign=True)
            out = NormalExpr.const(abs(k.leading())) * NormalExpr.const(k / k.leading())
            if p != _P1:
                out = out * NormalExpr.atom(FuncAtom("abs", NormalExpr.const(p)))
        for a, e in mono:
            if _is_positive(a) or _is_even(e) or not e.is_integer():
                out = out * NormalExpr.atom(a, e) if not isinstance(a, BaseAtom) else out * _canon({a: e}, _P1)
            else:
                out = out * _pow_const(_abs_atom(a), e)
        return out
    N, D = together(g)
    if len(N.terms) == 1:
        return nabs(N) * _pow_const(nabs(D), Poly.const(-1))
    k, mfac, rest = _extract(N, sign=True)
    out = nabs(NormalExpr.const(k))
    if mfac:
        out = out * nabs(_canon(mfac, _P1))
    if len(rest.terms) == 1:
        out = out * nabs(rest)
    else:
        out = out * NormalExpr.atom(FuncAtom("abs", rest))
    if D is not ONE_NE:
        out = out * _pow_const(nabs(D), Poly.const(-1))
    return out


def nln(g) -> NormalExpr:
    g = NormalExpr.coerce(g)
    if g.is_zero():
        raise ValueError("ln(0)")
    if len(g.terms) != 1:
        return NormalExpr.atom(FuncAtom("ln", g))
    (mono, c), = g.terms.items()
    out = NormalExpr()
    rest_coef = c
    if c.is_number() and c.number() > 0:
        if c != _P1:
            out = out + NormalExpr.atom(FuncAtom("ln", NormalExpr.const(c)))
        rest_coef = _P1
    rest = {}
    for a, e in mono:
        if isinstance(a, FuncAtom) and a.func == "exp":
            out = out + a.arg.scale(e)
        elif _is_positive(a) or (e.is_number() and not e.is_integer()) or isinstance(a, BaseAtom) and not e.is_integer():
            out = out + NormalExpr.atom(FuncAtom("ln", _atom_value(a))).scale(e)
        elif _is_even(e):
            out = out + nln(_abs_atom(a)).scale(e)
        else:
            rest[a] = e
    if rest or rest_coef != _P1:
        out = out + NormalExpr.atom(FuncAtom("ln", _canon(rest, rest_coef)))
    return out


def _exp_split(arg: NormalExpr):
    """Split ``exp(arg)`` into an algebraic factor and a canonical exp atom."""
    if arg.is_zero():
        return None, None
    piece = None
    rest = {}
    for mono, c in arg.terms.items():
        if len(mono) == 1 and isinstance(mono[0][0], FuncAtom) and mono[0][0].func == "ln" and mono[0][1] == _P1:
            f = _pow_const(mono[0][0].arg, c)
            piece = f if piece is None else piece * f
        else:
            rest[mono] = c
    atom = FuncAtom("exp", NormalExpr(rest)) if rest else None
    return piece, atom


def nexp(arg) -> NormalExpr:
    arg = NormalExpr.coerce(arg)
    piece, atom = _exp_split(arg)
    out = ONE_NE if piece is None else piece
    if atom is not None:
        out = out * NormalExpr.atom(atom)
    return out


def normalize(e) -> NormalExpr:
    """Convert an :class:`Expr` (or number) into canonical form."""
    if isinstance(e, NormalExpr):
        return e
    if isinstance(e, (int, Fraction, Poly)):
        return NormalExpr.const(e)
    if isinstance(e, Num):
        return NormalExpr.const(e.value)
    if isinstance(e, Sym):
        if e.name in PARAMETERS:
            return NormalExpr.const(Poly.param(e.name))
        return NormalExpr.atom(SymAtom(e.name))
    if isinstance(e, Add):
        out = NormalExpr()
        for t in e.terms:
            out = out + normalize(t)
        return out
    if isinstance(e, Mul):
        out = ONE_NE
        for f in e.factors:
            out = out * normalize(f)
            if out.is_zero():
                break
        return out
    if isinstance(e, Pow):
        return npow(normalize(e.base), normalize(e.exp))
    if isinstance(e, Call):
        arg = normalize(e.arg)
        if e.func == "ln":
            return nln(arg)
        if e.func == "sqrt":
            return _pow_const(arg, Poly.const(Fraction(1, 2)))
        if e.func == "abs":
            return nabs(arg)
        return nexp(arg)
    if isinstance(e, Fn):
        return NormalExpr.atom(FnAtom(e.name, tuple(normalize(a) for a in e.args), e.index))
    raise TypeError(f"cannot normalize {e!r}")


# ------------------------------------------------------------------ to_expr
def poly_to_expr(p: Poly) -> Expr:
    terms = []
    for m, c in sorted(p.terms.items(), key=lambda kv: (-sum(abs(v) for _, v in kv[0]), kv[0])):
        terms.append(mul(Num(c), *[power(Sym(name), Num(v)) for name, v in m]))
    return add(*terms) if terms else ZERO


def atom_to_expr(a: Atom) -> Expr:
    if isinstance(a, SymAtom):
        return Sym(a.name)
    if isinstance(a, FnAtom):
        return Fn(a.name, tuple(to_expr(x) for x in a.args), a.index)
    if isinstance(a, FuncAtom):
        return Call(a.func, to_expr(a.arg))
    if isinstance(a, BaseAtom):
        return to_expr(a.base)
    return Pow(to_expr(a.base), to_expr(a.exp))


def to_expr(ne: NormalExpr) -> Expr:
    terms = []
    for mono, c in ne.sorted_terms():
        factors = [poly_to_expr(c)]
        for a, e in mono:
            factors.append(power(atom_to_expr(a), poly_to_expr(e)))
        terms.append(mul(*factors))
    return add(*terms) if terms else ZERO


# ------------------------------------------------------------ differentiation
@lru_cache(maxsize=100000)
def _datom(a: Atom, var: str) -> NormalExpr:
    if var not in a.syms:
        return ZERO_NE
    if isinstance(a, SymAtom):
        return ONE_NE
    if isinstance(a, FnAtom):
        out = NormalExpr()
        for i, arg in enumerate(a.args, start=1):
            d = ndiff(arg, var)
            if not d.is_zero():
                out = out + NormalExpr.atom(FnAtom(a.name, a.args, a.index + (i,))) * d
        return out
    if isinstance(a, FuncAtom):
        d = ndiff(a.arg, var)
        if a.func == "ln":
            return d * _pow_const(a.arg, Poly.const(-1))
        if a.func == "abs":
            return a.arg * _canon({a: Poly.const(-1)}, _P1) * d
        return NormalExpr.atom(a) * d
    if isinstance(a, BaseAtom):
        return ndiff(a.base, var)
    # b^e = exp(e ln b)
    return NormalExpr.atom(a) * (ndiff(a.exp, var) * nln(a.base) + a.exp * ndiff(a.base, var) * _pow_const(a.base, Poly.const(-1)))


def ndiff(ne, var: str) -> NormalExpr:
    """Partial derivative with respect to the variable ``var``."""
    ne = NormalExpr.coerce(ne)
    if var not in ne.syms:
        return NormalExpr()
    acc: dict = {}
    for mono, c in ne.terms.items():
        for a, e in mono:
            if var not in a.syms:
                continue
            d = _datom(a, var)
            if d.is_zero():
                continue
            rest = dict(mono)
            rest[a] = e - 1
            for m, v in (_canon(rest, c * e) * d).terms.items():
                acc[m] = acc[m] + v if m in acc else v
    return NormalExpr(acc)


# -------------------------------------------------------------- substitution
def nsubs(ne, syms=None, funcs=None, params=None) -> NormalExpr:
    """Simultaneous substitution.

    ``syms`` maps variable names to expressions, ``funcs`` maps function
    names to ``Lambda`` bindings (or ``(param_names, body)`` pairs) and
    ``params`` maps parameter names to numbers.
    """
    ne = NormalExpr.coerce(ne)
    syms = {k: NormalExpr.coerce(v) for k, v in (syms or {}).items()}
    fb = {}
    for name, b in (funcs or {}).items():
        if isinstance(b, Lambda):
            fb[name] = (tuple(p.name if isinstance(p, Sym) else p for p in b.params), normalize(b.body))
        else:
            fb[name] = (tuple(b[0]), NormalExpr.coerce(b[1]))
    params = {k: Poly.coerce(v) for k, v in (params or {}).items()}
    return _Subst(syms, fb, params).run(ne)


class _Subst:
    def __init__(self, syms, funcs, params):
        self.syms = syms
        self.funcs = funcs
        self.params = params
        self.cache = {}
        self.dcache = {}
        self.touch = set(syms) | set(params)

    def relevant(self, ne: NormalExpr) -> bool:
        if self.syms and ne.syms & self.syms.keys():
            return True
        if self.funcs and ne.fnames & self.funcs.keys():
            return True
        return bool(self.params) and bool(ne.params() & self.params.keys())

    def run(self, ne: NormalExpr) -> NormalExpr:
        if not self.relevant(ne):
            return ne
        out = NormalExpr()
        for mono, c in ne.terms.items():
            term = NormalExpr.const(c.subs(self.params))
            for a, e in mono:
                term = term * _pow_const(self.atom(a), e.subs(self.params))
                if term.is_zero():
                    break
            out = out + term
        return out

    def atom(self, a: Atom) -> NormalExpr:
        hit = self.cache.get(a)
        if hit is not None:
            return hit
        if isinstance(a, SymAtom):
            v = self.syms.get(a.name, NormalExpr.atom(a))
        elif isinstance(a, FnAtom):
            args = tuple(self.run(x) for x in a.args)
            if a.name in self.funcs:
                pnames, body = self.funcs[a.name]
                if len(pnames) != len(args):
                    raise ValueError(f"{a.name} expects {len(pnames)} arguments, got {len(args)}")
                v = nsubs(self.deriv(a.name, a.index), dict(zip(pnames, args)))
            else:
                v = NormalExpr.atom(FnAtom(a.name, args, a.index))
        elif isinstance(a, FuncAtom):
            arg = self.run(a.arg)
            v = {"ln": nln, "abs": nabs, "exp": nexp}[a.func](arg)
        elif isinstance(a, BaseAtom):
            v = self.run(a.base)
        else:
            v = npow(self.run(a.base), self.run(a.exp))
        self.cache[a] = v
        return v

    def deriv(self, name, index):
        key = (name, index)
        if key not in self.dcache:
            pnames, body = self.funcs[name]
            d = body
            for i in index:
                d = ndiff(d, pnames[i - 1])
            self.dcache[key] = d
        return self.dcache[key]


# ---------------------------------------------------------------- zero test
def _split_exp(e: Poly):
    const = e.terms.get((), Fraction(0))
    return e - const, const


def _shiftable(a: Atom) -> bool:
    return isinstance(a, BaseAtom) or (isinstance(a, FuncAtom) and a.func == "abs")


def _classes(ne: NormalExpr) -> list:
    """Partition terms by the symbolic part of their radical/rational exponents."""
    buckets: dict = {}
    for mono, c in ne.terms.items():
        sig = tuple(sorted((a.key, _split_exp(e)[0].key()) for a, e in mono
                           if _shiftable(a) and not e.is_number()))
        buckets.setdefault(sig, {})[mono] = c
    return [NormalExpr(b) for b in buckets.values()]


def _shift_once(ne: NormalExpr):
    """Multiply ``ne`` (one exponent class) by the lowest power of some atom."""
    cands = sorted({a for mono in ne.terms for a, _ in mono if _shiftable(a)})
    for a in cands:
        exps = [dict(mono).get(a, Poly()) for mono in ne.terms]
        syms = {_split_exp(e)[0] for e in exps}
        if len(syms) != 1:
            continue
        consts = [_split_exp(e)[1] for e in exps]
        if max(consts) - min(consts) < 1:
            continue
        shift = syms.pop() + min(consts)
        out = NormalExpr()
        for mono, c in ne.terms.items():
            d = dict(mono)
            d[a] = d.get(a, Poly()) - shift
            out = out + _canon(d, c)
        return out
    return None


def is_zero(x, max_rounds: int = 32) -> bool:
    """Decide whether ``x`` vanishes identically.

    Terms are split into classes by the symbolic part of each radical or
    rational atom's exponent (independent for generic parameters). Within a
    class the expression is multiplied by the lowest power of such an atom,
    which expands it back into polynomial pieces, until nothing changes.
    """
    ne = normalize(x) if not isinstance(x, NormalExpr) else x
    return _is_zero(ne, max_rounds)


def _is_zero(ne: NormalExpr, rounds: int) -> bool:
    if ne.is_zero():
        return True
    classes = _classes(ne)
    if len(classes) > 1:
        return all(_is_zero(c, rounds) for c in classes)
    if rounds <= 0:
        return False
    nxt = _shift_once(ne)
    if nxt is None:
        return False
    return _is_zero(nxt, rounds - 1)


def equal(a, b) -> bool:
    return is_zero(NormalExpr.coerce(a) - NormalExpr.coerce(b))
