"""Constructors for the wave equation, the additional conditions, the symmetry
operator families and the printed fixtures they are compared against."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Optional, Sequence

from condsym.lie import PDESystem, VectorField, jet1, jet2
from condsym.symcore import NormalExpr, is_zero, ndiff, normalize, nsubs, parse, to_expr
from condsym.symcore.expr import Fn, Sym
from condsym.symcore.normal import FnAtom, SymAtom, npow
from condsym.symcore.poly import Poly


class WaveformError(ValueError):
    pass


def _ne(e) -> NormalExpr:
    if isinstance(e, NormalExpr):
        return e
    if isinstance(e, str):
        return normalize(parse(e))
    if isinstance(e, (int, Fraction)):
        return NormalExpr.const(e)
    if isinstance(e, Poly):
        return NormalExpr.const(e)
    return normalize(e)


def as_param(alpha) -> Poly:
    """``alpha`` as an exact coefficient: a number, or the symbol itself for 'alpha'."""
    if alpha is None or (isinstance(alpha, str) and alpha.strip() == "alpha"):
        return Poly.param("alpha")
    if isinstance(alpha, Poly):
        return alpha
    if isinstance(alpha, str):
        return Poly.const(Fraction(alpha.strip()))
    if isinstance(alpha, float):
        return Poly.const(Fraction(str(alpha)))
    return Poly.const(Fraction(alpha))


def _X(m: int) -> NormalExpr:
    return NormalExpr.atom(SymAtom(f"x{m}"))


def _U() -> NormalExpr:
    return NormalExpr.atom(SymAtom("u"))


def _J(name: str) -> NormalExpr:
    return NormalExpr.atom(SymAtom(name))


# ------------------------------------------------------------ equations
@dataclass(frozen=True)
class WaveEquation:
    n: int
    F: NormalExpr
    signature: str = "paper"

    def __post_init__(self):
        if self.n < 2:
            raise WaveformError(f"n={self.n}: the wave equation is studied for n >= 2 only (n = 1 excluded)")
        if self.signature not in ("paper", "conventional"):
            raise WaveformError(f"unknown signature {self.signature!r}")

    def equation(self) -> NormalExpr:
        box = -_J(jet2(0, 0))
        for a in range(1, self.n + 1):
            box = box + _J(jet2(a, a))
        if self.signature == "conventional":
            box = -box
        return box - self.F


def nonlinearity(spec, n: int) -> NormalExpr:
    """``spec``: None/'zero', 'power' (lam*u^k), 'exp' (lam*exp(u)), 'conformal'
    (lam*u^((n+3)/(n-1))), 'F' (opaque F(u)) or any expression in x, u."""
    if spec is None or spec == "zero" or spec == 0:
        return NormalExpr()
    if spec == "power":
        return _ne("lam*u^k")
    if spec == "exp":
        return _ne("lam*exp(u)")
    if spec == "conformal":
        return _ne("lam") * npow(_U(), NormalExpr.const(Fraction(n + 3, n - 1)))
    if spec == "F":
        return _ne("F(u)")
    e = _ne(spec)
    bad = [s for s in e.syms if s.startswith("u_")]
    if bad:
        raise WaveformError(f"nonlinearity may not contain derivatives: {bad}")
    return e


def minkowski_square(n: int) -> NormalExpr:
    out = _X(0) * _X(0)
    for a in range(1, n + 1):
        out = out - _X(a) * _X(a)
    return out


def build_wave(n: int, F=None, signature: str = "paper") -> PDESystem:
    w = WaveEquation(n, nonlinearity(F, n) if n >= 2 else NormalExpr(), signature)
    return PDESystem(n, [("wave", w.equation())], name="wave")


@dataclass(frozen=True)
class Condition:
    kind: str
    alpha: Poly

    def equation(self, n: int) -> NormalExpr:
        a = NormalExpr.const(self.alpha)
        euler = NormalExpr()
        for m in range(n + 1):
            euler = euler + _X(m) * _J(jet1(m))
        if self.kind == "add1":
            return euler + a * _U()
        if self.kind == "add2":
            second = NormalExpr()
            for m in range(n + 1):
                for k in range(n + 1):
                    second = second + _X(m) * _X(k) * _J(jet2(m, k))
            return second + a * euler
        raise WaveformError(f"unknown condition {self.kind!r}")


def build_condition(kind: str, alpha, n: int = 3) -> PDESystem:
    c = Condition(kind, as_param(alpha))
    return PDESystem(n, [(kind, c.equation(n))], name=kind)


def build_system(n: int, F=None, conditions=(), signature: str = "paper") -> PDESystem:
    """Wave equation plus conditions given as ``(kind, alpha)`` pairs."""
    eqs = [("wave", WaveEquation(n, nonlinearity(F, n) if n >= 2 else NormalExpr(), signature).equation())]
    for kind, alpha in conditions:
        eqs.append((kind, Condition(kind, as_param(alpha)).equation(n)))
    name = "+".join(["wave"] + [k for k, _ in conditions])
    return PDESystem(n, eqs, name=name)


def system_by_name(name: str, n: int = 3, alpha=0, F=None) -> PDESystem:
    """'wave', 'wave+add1', 'wave+add2' (alpha applies to the condition)."""
    parts = name.split("+")
    if parts[0] != "wave" or any(p not in ("add1", "add2") for p in parts[1:]):
        raise WaveformError(f"unknown system {name!r}")
    return build_system(n, F, [(p, alpha) for p in parts[1:]])


# ------------------------------------------------------------ operators
def op_D(n: int, alpha=0) -> VectorField:
    """Dilation ``x_mu d_mu + alpha u d_u`` (real form)."""
    return VectorField(tuple(_X(m) for m in range(n + 1)), NormalExpr.const(as_param(alpha)) * _U(), "D")


def translation(n: int, mu: int) -> VectorField:
    xi = [NormalExpr.const(1) if m == mu else NormalExpr() for m in range(n + 1)]
    return VectorField(tuple(xi), NormalExpr(), f"P{mu}")


def lorentz(n: int, mu: int, nu: int) -> VectorField:
    """``J_{mu nu} = x_nu d^mu - x_mu d^nu`` with ``d^mu = g^{mu mu} d_mu``.

    Boosts come out as ``J_{0a} = x_a d_0 + x_0 d_a`` and rotations as
    ``J_{ab} = x_a d_b - x_b d_a``.
    """
    g = [1] + [-1] * n
    xi = [NormalExpr() for _ in range(n + 1)]
    xi[mu] = xi[mu] + _X(nu).scale(g[mu])
    xi[nu] = xi[nu] - _X(mu).scale(g[nu])
    return VectorField(tuple(xi), NormalExpr(), f"J{mu}{nu}")


def poincare_generators(n: int) -> list:
    if n < 2:
        raise WaveformError("n >= 2 required")
    out = [translation(n, m) for m in range(n + 1)]
    out += [lorentz(n, a, b) for a in range(n + 1) for b in range(a + 1, n + 1)]
    return out


@dataclass
class Op1Spec:
    """``Phi`` as a sum of monomials ``c * u^p * prod theta_mu^k_mu`` with
    ``theta_mu = u^(1/alpha) x_mu``, or a general ``phi`` expression with a
    user-supplied ``antiderivative`` I(u)."""

    alpha: Fraction
    terms: list = field(default_factory=list)  # (c, p, (k_0..k_n))
    C: Optional[list] = None
    d: Fraction = Fraction(0)
    phi: Optional[object] = None
    antiderivative: Optional[object] = None

    def __post_init__(self):
        self.alpha = Fraction(str(self.alpha)) if isinstance(self.alpha, float) else Fraction(self.alpha)
        if self.alpha == 0:
            raise WaveformError("op1 needs alpha != 0")
        self.d = Fraction(self.d)


def _theta(m: int) -> NormalExpr:
    return NormalExpr.atom(SymAtom(f"theta{m}"))


def op1_phi(spec: Op1Spec, n: int) -> NormalExpr:
    """Phi in the variables (u, theta_0..theta_n)."""
    if spec.phi is not None:
        return _ne(spec.phi)
    out = NormalExpr()
    for c, p, ks in spec.terms:
        if len(ks) != n + 1:
            raise WaveformError(f"monomial needs {n + 1} theta exponents")
        t = NormalExpr.const(Fraction(c)) * npow(_U(), NormalExpr.const(Fraction(p)))
        for m, k in enumerate(ks):
            if k:
                t = t * npow(_theta(m), NormalExpr.const(Fraction(k)))
        out = out + t
    return out


def op1_integrand(spec: Op1Spec, n: int) -> NormalExpr:
    """``Phi_u * u^(1/alpha - 1)`` with theta held fixed."""
    return ndiff(op1_phi(spec, n), "u") * npow(_U(), NormalExpr.const(1 / spec.alpha - 1))


def op1_antiderivative(spec: Op1Spec, n: int) -> NormalExpr:
    """Closed-form ``I(u)`` in (u, theta), integrated monomial by monomial."""
    if spec.antiderivative is not None:
        return _ne(spec.antiderivative)
    if spec.phi is not None:
        raise WaveformError("a general Phi needs a user-supplied antiderivative")
    out = NormalExpr()
    for c, p, ks in spec.terms:
        p = Fraction(p)
        if p == 0:
            continue
        q = p + 1 / spec.alpha - 1
        if q == 0:
            raise WaveformError(f"monomial u^{p} integrates to a logarithm; supply the antiderivative")
        t = NormalExpr.const(Fraction(c) * p / q) * npow(_U(), NormalExpr.const(q))
        for m, k in enumerate(ks):
            if k:
                t = t * npow(_theta(m), NormalExpr.const(Fraction(k)))
        out = out + t
    return out


def op_op1(spec: Op1Spec, n: int) -> VectorField:
    ua = npow(_U(), NormalExpr.const(1 / spec.alpha))
    back = {f"theta{m}": ua * _X(m) for m in range(n + 1)}
    I = nsubs(op1_antiderivative(spec, n), back)
    Phi = nsubs(op1_phi(spec, n), back)
    C = spec.C or [[0] * (n + 1) for _ in range(n + 1)]
    xi = []
    for m in range(n + 1):
        c = -(ua * _X(m) * I).scale(1 / spec.alpha) + _X(m).scale(spec.d)
        for k in range(n + 1):
            if C[m][k]:
                c = c + _X(k).scale(Fraction(C[m][k]))
        xi.append(c)
    return VectorField(tuple(xi), Phi, "op1")


@dataclass
class Op2Spec:
    """Coefficients in (w_1..w_n, u) with ``w_a = x_a / x_0``."""

    phi: Sequence
    psi: object = 0


def op_op2(spec: Op2Spec, n: int) -> VectorField:
    if len(spec.phi) != n + 1:
        raise WaveformError(f"op2 needs {n + 1} phi components")
    back = {f"w{a}": _X(a) * npow(_X(0), -1) for a in range(1, n + 1)}
    comps = []
    for c in list(spec.phi) + [spec.psi]:
        e = _ne(parse(c, nvars=n) if isinstance(c, str) else c)
        raw = [s for s in e.syms if s.startswith("x")]
        if raw:
            raise WaveformError(f"op2 coefficients must use w_a and u only, found {sorted(raw)}")
        comps.append(nsubs(e, back))
    xi = tuple(_X(0) * c for c in comps[:-1])
    return VectorField(xi, comps[-1], "op2")


def op2_arbitrary(n: int) -> VectorField:
    """op2 with every coefficient an unknown function ``f_mu(w, u)``, ``g(w, u)``."""
    args = tuple(Sym(f"w{a}") for a in range(1, n + 1)) + (Sym("u"),)
    phi = [Fn(f"f{m}", args) for m in range(n + 1)]
    return op_op2(Op2Spec([normalize(f) for f in phi], normalize(Fn("g", args))), n)


def op2_instances(n: int) -> dict:
    """The classical fields that op2 reproduces: Euler field, u d_u and rotation J_12."""
    zeros = ["0"] * (n + 1)
    euler = ["1"] + [f"w{a}" for a in range(1, n + 1)]
    rot = list(zeros)
    rot[2] = "w1"
    rot[1] = "-w2"
    return {
        "euler": op_op2(Op2Spec(euler, "0"), n),
        "u-scaling": op_op2(Op2Spec(zeros, "u"), n),
        "rotation-12": op_op2(Op2Spec(rot, "0"), n),
    }


# ------------------------------------------------------------ index forms
BASIS = ("id", "euler", "hess", "lap")


class IndexForm:
    """Linear combination of the n-generic index expressions

        id = F,  euler = w_a F_a,  hess = w_a w_b F_ab,  lap = F_aa

    for unknowns F (phi, psi), with coefficients polynomial in alpha and n.
    """

    def __init__(self, coeffs=None):
        self.coeffs = {}
        for (f, b), c in (coeffs or {}).items():
            if b not in BASIS:
                raise WaveformError(f"unknown index basis {b!r}")
            c = c if isinstance(c, Poly) else _poly(c)
            if not c.is_zero():
                self.coeffs[(f, b)] = c

    @property
    def unknowns(self) -> list:
        return sorted({f for f, _ in self.coeffs})

    def coefficient(self, f: str, b: str) -> Poly:
        return self.coeffs.get((f, b), Poly())

    def __sub__(self, other: "IndexForm") -> "IndexForm":
        keys = set(self.coeffs) | set(other.coeffs)
        return IndexForm({k: self.coefficient(*k) - other.coefficient(*k) for k in keys})

    def scale(self, c) -> "IndexForm":
        c = c if isinstance(c, Poly) else _poly(c)
        return IndexForm({k: v * c for k, v in self.coeffs.items()})

    def subs(self, params: dict) -> "IndexForm":
        return IndexForm({k: v.subs(params) for k, v in self.coeffs.items()})

    def is_zero(self) -> bool:
        return not self.coeffs

    def expand(self, n: int) -> NormalExpr:
        """Concrete expression in w_1..w_n with unknowns of n arguments."""
        out = NormalExpr()
        args = tuple(NormalExpr.atom(SymAtom(f"w{a}")) for a in range(1, n + 1))
        w = args
        for (f, b), c in self.coeffs.items():
            def D(*idx, f=f):
                return NormalExpr.atom(FnAtom(f, args, tuple(sorted(idx))))
            if b == "id":
                t = D()
            elif b == "euler":
                t = sum((w[a] * D(a + 1) for a in range(n)), NormalExpr())
            elif b == "hess":
                t = sum((w[a] * w[c2] * D(a + 1, c2 + 1) for a in range(n) for c2 in range(n)), NormalExpr())
            else:
                t = sum((D(a + 1, a + 1) for a in range(n)), NormalExpr())
            out = out + NormalExpr.const(c.subs({"n": n})) * t
        return out

    def directional(self) -> NormalExpr:
        """ODE in w for F = F(m_a w_a) with m_a m_a = 1."""
        return self._project({"id": (1, 0, 0), "euler": (0, "w", 0), "hess": (0, 0, "w^2"), "lap": (0, 0, 1)})

    def radial(self) -> NormalExpr:
        """ODE in w for F = F(w_a w_a), n kept symbolic."""
        return self._project({"id": (1, 0, 0), "euler": (0, "2*w", 0), "hess": (0, "2*w", "4*w^2"),
                              "lap": (0, "2*n", "4*w")})

    def _project(self, table) -> NormalExpr:
        out = NormalExpr()
        w = (NormalExpr.atom(SymAtom("w")),)
        for (f, b), c in self.coeffs.items():
            jets = [NormalExpr.atom(FnAtom(f, w, idx)) for idx in ((), (1,), (1, 1))]
            t = NormalExpr()
            for coef, j in zip(table[b], jets):
                if coef != 0:
                    t = t + _ne(str(coef)) * j
            out = out + NormalExpr.const(c) * t
        return out

    def render(self) -> str:
        names = {"id": "{f}", "euler": "w_a*{f}_a", "hess": "w_a*w_b*{f}_ab", "lap": "{f}_aa"}
        parts = []
        for f in sorted({k[0] for k in self.coeffs}):
            for b in BASIS:
                c = self.coefficient(f, b)
                if not c.is_zero():
                    parts.append(f"({c})*" + names[b].format(f=f))
        return " + ".join(parts) + " = 0" if parts else "0 = 0"

    def __repr__(self):
        return f"IndexForm({self.render()})"

    def __eq__(self, other):
        return isinstance(other, IndexForm) and (self - other).is_zero()

    def __hash__(self):
        return hash(tuple(sorted((k, str(v)) for k, v in self.coeffs.items())))


def _poly(c) -> Poly:
    if isinstance(c, Poly):
        return c
    if isinstance(c, str):
        ne = normalize(parse(c))
        if not ne.is_const():
            raise WaveformError(f"coefficient {c!r} is not a parameter polynomial")
        return ne.const_value()
    return Poly.const(Fraction(c))


# ------------------------------------------------------------ fixtures
@dataclass(frozen=True)
class PaperFixture:
    """A printed formula, transcribed as printed.

    ``kind``: 'index-form' (list of IndexForm, one per equation), 'ode'
    (expression in w equal to zero), 'solution' (dict unknown -> expression
    in w, or a quadrature dict), 'ansatz' (builder taking n).
    """

    id: str
    kind: str
    text: str
    statement: object
    conditions: dict = field(default_factory=dict)
    note: str = ""


def _anz1_builder(n: int) -> NormalExpr:
    args = ",".join(f"x{a}/x0" for a in range(1, n + 1))
    return normalize(parse(f"x0^alpha*phi({args})"))


def _anz2_builder(n: int, alpha=None) -> NormalExpr:
    args = ",".join(f"x{a}/x0" for a in range(1, n + 1))
    if alpha is not None and as_param(alpha) == Poly.const(1):
        return normalize(parse(f"psi({args}) + phi({args})*ln(x0)"))
    return normalize(parse(f"x0^(1-alpha)*psi({args}) + phi({args})"))


_LOGW = "ln(abs(w+sqrt(w^2-1)))"

_FIXTURES = {
    "reduced1": PaperFixture(
        "reduced1", "index-form",
        "(1+2*alpha)*w_a*phi_a + w_a*w_b*phi_ab + alpha*(alpha+1)*phi - phi_aa = 0",
        (IndexForm({("phi", "euler"): "1+2*alpha", ("phi", "hess"): 1,
                    ("phi", "id"): "alpha*(alpha+1)", ("phi", "lap"): -1}),),
        note="reduced equation for the homogeneous ansatz"),
    "reduced2": PaperFixture(
        "reduced2", "ode",
        "(1+2*alpha)*w*phi' + (w^2-1)*phi'' + alpha*(alpha+1)*phi = 0",
        normalize(parse("(1+2*alpha)*w*D[phi,1](w) + (w^2-1)*D[phi,1,1](w) + alpha*(alpha+1)*phi(w)")),
        note="directional ODE, w = m_a w_a"),
    "sol-a0": PaperFixture(
        "sol-a0", "solution", "phi = c1*ln|w+sqrt(w^2-1)| + c2",
        {"phi": normalize(parse(f"c1*{_LOGW} + c2"))}, {"alpha": 0}),
    "sol-am1": PaperFixture(
        "sol-am1", "solution", "phi = c1*(w/2*sqrt(w^2-1) - 1/2*ln|w+sqrt(w^2-1)|) + c2",
        {"phi": normalize(parse(f"c1*(w/2*sqrt(w^2-1) - 1/2*{_LOGW}) + c2"))}, {"alpha": -1}),
    "radial": PaperFixture(
        "radial", "solution", "phi = int w^(-n/2)*(w-1)^(-n/2-1) dw, w = w_a w_a",
        {"phi": {"integrand": normalize(parse("w^(-n/2)*(w-1)^(-n/2-1)")), "var": "w"}}, {"alpha": 0},
        note="radial quadrature; exponent on (w-1) stored as printed"),
    "reduced3": PaperFixture(
        "reduced3", "index-form",
        "2*w_a*phi_a + w_a*w_b*phi_ab - phi_aa = 0; 2*alpha*w_a*psi_a + w_a*w_b*psi_ab - psi_aa = 0",
        (IndexForm({("phi", "euler"): 2, ("phi", "hess"): 1, ("phi", "lap"): -1}),
         IndexForm({("psi", "euler"): "2*alpha", ("psi", "hess"): 1, ("psi", "lap"): -1})),
        note="alpha != 1"),
    "reduced4": PaperFixture(
        "reduced4", "index-form",
        "2*w_a*phi_a + w_a*w_b*phi_ab - phi_aa = 0; "
        "alpha*w_a*psi_a + w_a*w_b*psi_ab - psi_aa - phi - 2*w_a*phi_a = 0",
        (IndexForm({("phi", "euler"): 2, ("phi", "hess"): 1, ("phi", "lap"): -1}),
         IndexForm({("psi", "euler"): "alpha", ("psi", "hess"): 1, ("psi", "lap"): -1,
                    ("phi", "id"): -1, ("phi", "euler"): -2})),
        {"alpha": 1}),
    "sol-red3": PaperFixture(
        "sol-red3", "solution", "phi = c1*ln((w-1)/(w+1)); psi = c3*int (w^2-1)^(-alpha) dw",
        {"phi": normalize(parse("c1*ln((w-1)/(w+1))")),
         "psi": {"integrand": normalize(parse("c3*(w^2-1)^(-alpha)")), "var": "w"}}),
    "sol-red4": PaperFixture(
        "sol-red4", "solution",
        "phi = c1*ln((w-1)/(w+1)); psi = (w^2-1)^(-1/2)*(c2*ln|w+sqrt(w^2-1)| - 2*c1*(w^2-1)^(-1/2) + c1*Q(w)), "
        "Q(w) = int ln|w+sqrt(w^2-1)|/sqrt(w^2-1) dw",
        {"phi": normalize(parse("c1*ln((w-1)/(w+1))")),
         "psi": normalize(parse(f"(w^2-1)^(-1/2)*(c2*{_LOGW} - 2*c1*(w^2-1)^(-1/2) + c1*Q(w))")),
         "Q": {"integrand": normalize(parse(f"{_LOGW}*(w^2-1)^(-1/2)")), "var": "w"}},
        {"alpha": 1}),
    "anz1": PaperFixture("anz1", "ansatz", "u = x0^alpha*phi(x_a/x0)", _anz1_builder),
    "add1-general-solution": PaperFixture(
        "add1-general-solution", "ansatz", "u = x0^alpha*phi(x_a/x0)", _anz1_builder,
        note="general solution of x_mu u_mu + alpha u = 0 as printed"),
    "anz2": PaperFixture(
        "anz2", "ansatz", "u = x0^(1-alpha)*psi(x_a/x0) + phi(x_a/x0)*f(x0), f = ln x0 (alpha=1) else 1",
        _anz2_builder),
}
FIXTURES = MappingProxyType(_FIXTURES)

ALIASES = MappingProxyType({
    "sol-α0": "sol-a0",
    "sol-α−1": "sol-am1",
    "sol-α-1": "sol-am1",
    "sol-alpha0": "sol-a0",
    "sol-alpha-1": "sol-am1",
})


def fixture_ids() -> list:
    return list(_FIXTURES)


def paper_fixture(fid: str) -> PaperFixture:
    key = ALIASES.get(fid, fid)
    if key not in _FIXTURES:
        raise KeyError(f"unknown fixture id {fid!r}; known: {', '.join(_FIXTURES)}")
    return _FIXTURES[key]


def ode_jets(f: str = "phi") -> tuple:
    w = (NormalExpr.atom(SymAtom("w")),)
    return tuple(NormalExpr.atom(FnAtom(f, w, idx)) for idx in ((), (1,), (1, 1)))


def plug_solution(ode: NormalExpr, solutions: dict, params: Optional[dict] = None) -> NormalExpr:
    """Substitute closed-form unknowns ``{name: expr in w}`` into an ODE."""
    funcs = {name: (("w",), _ne(body)) for name, body in solutions.items()}
    return nsubs(ode, funcs=funcs, params=params)


def check_fixture_solution(sol_id: str, ode_id: str = "reduced2") -> bool:
    """Symbolic check that a printed closed-form solution solves a printed ODE."""
    sol = paper_fixture(sol_id)
    ode = paper_fixture(ode_id).statement
    params = {k: Fraction(v) for k, v in sol.conditions.items()}
    bodies = {k: v for k, v in sol.statement.items() if isinstance(v, NormalExpr)}
    return is_zero(plug_solution(ode, bodies, params))
