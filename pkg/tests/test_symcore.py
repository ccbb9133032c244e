"""Expression engine: parsing, calculus, normal form, substitution, evaluation."""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from condsym.numerics import FDConfig, ScalarField, fd_gradient
from condsym.symcore import (
    DomainError,
    Lambda,
    Num,
    ParseError,
    Poly,
    ScaleError,
    Sym,
    UnboundSymbolError,
    add,
    collect_scales,
    differentiate,
    equal,
    eval_numeric,
    exp,
    is_zero,
    ln,
    mul,
    ndiff,
    normalize,
    nsubs,
    parse,
    power,
    sqrt,
    substitute,
    to_expr,
    to_string,
)
from condsym.symcore.expr import Fn, Pow


def P(text, **kw):
    return parse(text, **kw)


# ---------------------------------------------------------------- parser
def test_quotient_parses_to_negative_power():
    e = P("x1/x0")
    assert normalize(e) == normalize(mul(Sym("x1"), power(Sym("x0"), Num(Fraction(-1)))))
    assert isinstance(e.factors[1], Pow)


def test_derivative_marker():
    e = P("D[phi,1,1]", nvars=1)
    assert isinstance(e, Fn) and e.name == "phi" and e.index == (1, 1)


def test_marker_indices_are_sorted():
    assert normalize(P("D[phi,2,1]", nvars=2)) == normalize(P("D[phi,1,2]", nvars=2))


def test_unbalanced_paren_offset():
    with pytest.raises(ParseError) as exc:
        P("ln(x0")
    assert exc.value.offset == 6


def test_unknown_identifier_rejected():
    with pytest.raises(ParseError):
        P("zeta + 1")


def test_rationals_are_exact():
    assert normalize(P("1/3 + 1/6")).const_value() == Fraction(1, 2)


# ---------------------------------------------------------------- calculus
def test_quotient_rule():
    assert equal(differentiate(P("x1/x0"), "x0"), P("-x1*x0^(-2)"))


def test_chain_rule_unknown_function():
    d = differentiate(P("phi(x1/x0)"), "x1")
    assert equal(d, P("D[phi,1](x1/x0)*x0^(-1)"))


def test_log_derivative():
    assert equal(differentiate(P("ln(x0)"), "x0"), P("x0^(-1)"))


def test_abs_derivative_sign():
    assert equal(differentiate(P("abs(x1)"), "x1"), P("x1*abs(x1)^(-1)"))


# ---------------------------------------------------------------- normal form
def test_like_terms_collect():
    ne = normalize(P("x1+x1"))
    assert len(ne.terms) == 1 and list(ne.terms.values())[0] == Poly.const(2)


def test_cancellation_to_zero():
    assert normalize(P("(w^2-1) - w^2 + 1")).is_zero()


def test_parameter_coefficients_commute():
    ne = normalize(P("alpha*phi(w) + phi(w)*alpha"))
    assert list(ne.terms.values()) == [Poly.param("alpha") * 2]


def test_self_difference_is_zero():
    e = P("ln(abs(w+sqrt(w^2-1)))*alpha^2 + x0^(beta-2)")
    assert normalize(add(e, mul(Num(Fraction(-1)), e))).is_zero()


def test_radical_identity():
    assert is_zero(normalize(P("sqrt(w^2-1)^2 - w^2 + 1")))


# ---------------------------------------------------------------- substitution
def test_substitute_field():
    body = P("x0^alpha*phi(x1/x0)")
    assert equal(substitute(P("u"), {"u": body}), body)


def test_substitute_function_binding():
    out = substitute(P("D[phi,1]", nvars=1), {"phi": Lambda(("w1",), P("w1^2"))})
    assert equal(out, P("2*w1"))


def test_substitute_parameter():
    assert equal(substitute(P("x0^alpha"), {"alpha": Num(Fraction(2))}), P("x0^2"))


def test_arity_mismatch():
    with pytest.raises(ValueError):
        substitute(P("phi(w1)", nvars=1), {"phi": Lambda(("a", "b"), P("x1"))})


def test_nsubs_parameter_values():
    ne = nsubs(normalize(P("alpha*(alpha+1)*x1")), params={"alpha": Fraction(-1)})
    assert ne.is_zero()


# ---------------------------------------------------------------- evaluation
def test_eval_log_at_one():
    assert eval_numeric(P("ln(abs(w+sqrt(w^2-1)))"), {"w": 1.0}) == 0.0


def test_eval_quotient():
    assert eval_numeric(P("x1/x0"), {"x0": 2.0, "x1": 1.0}) == 0.5


def test_eval_domain_error():
    with pytest.raises(DomainError):
        eval_numeric(P("ln(x0)"), {"x0": -1.0})


def test_eval_unbound():
    with pytest.raises(UnboundSymbolError):
        eval_numeric(P("x0 + x1"), {"x0": 1.0})


# ---------------------------------------------------------------- scales
def test_generic_exponents_separate():
    b = collect_scales(normalize(P("x0^(beta-2)*w + x0^(-2)*w^2")), "x0")
    assert set(b) == {(Poly.param("beta") - 2, 0), (Poly.const(-2), 0)}


def test_log_buckets():
    b = collect_scales(normalize(P("x0^(-2)*(w + w^2*ln(x0))")), "x0")
    assert equal(to_expr(b[(Poly.const(-2), 0)]), P("w"))
    assert equal(to_expr(b[(Poly.const(-2), 1)]), P("w^2"))


def test_presubstituted_exponent_single_bucket():
    e = nsubs(normalize(P("x0^(beta-2)*w")), params={"beta": Fraction(0)})
    assert set(collect_scales(e, "x0")) == {(Poly.const(-2), 0)}


def test_undecidable_scales():
    with pytest.raises(ScaleError):
        collect_scales(normalize(P("x0^(beta-2)*ln(x0)^alpha")), "x0")


# ---------------------------------------------------------------- properties
X = ("x0", "x1")


def _leaf():
    return st.one_of(st.sampled_from([Sym(v) for v in X]),
                     st.integers(-3, 3).map(lambda k: Num(Fraction(k))),
                     st.sampled_from([Num(Fraction(1, 2)), Num(Fraction(-2, 3))]))


def _grow(children):
    pos = lambda e: add(Num(Fraction(1)), mul(e, e))  # noqa: E731  strictly positive
    return st.one_of(
        st.tuples(children, children).map(lambda t: add(*t)),
        st.tuples(children, children).map(lambda t: mul(*t)),
        st.tuples(children, st.integers(1, 3)).map(lambda t: power(t[0], Num(Fraction(t[1])))),
        children.map(lambda e: ln(pos(e))),
        children.map(lambda e: sqrt(pos(e))),
        children.map(lambda e: exp(mul(Num(Fraction(1, 4)), e))),
    )


exprs = st.recursive(_leaf(), _grow, max_leaves=6)
points = st.tuples(st.floats(1.0, 2.0), st.floats(-1.0, 1.0))
FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@FAST
@given(exprs)
def test_normalize_idempotent(e):
    ne = normalize(e)
    assert normalize(to_expr(ne)) == ne


@FAST
@given(exprs)
def test_mixed_partials_commute(e):
    ne = normalize(e)
    assert is_zero(ndiff(ndiff(ne, "x0"), "x1") - ndiff(ndiff(ne, "x1"), "x0"))


@FAST
@given(exprs)
def test_parser_round_trip(e):
    assert normalize(parse(to_string(e))) == normalize(e)


@FAST
@given(exprs, points)
def test_eval_of_normal_form_agrees(e, pt):
    env = dict(zip(X, pt))
    a = eval_numeric(e, env)
    b = eval_numeric(to_expr(normalize(e)), env)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@FAST
@given(exprs, points)
def test_derivative_matches_finite_difference(e, pt):
    env = dict(zip(X, pt))
    val = eval_numeric(e, env)
    if abs(val) > 1e6:
        return
    f = ScalarField(lambda x: eval_numeric(e, {"x0": x[0], "x1": x[1]}), 2)
    g = fd_gradient(f, np.array(pt), FDConfig(h=1e-3, levels=3))
    for i, v in enumerate(X):
        d = eval_numeric(differentiate(e, v), env)
        assert abs(d - g[i]) <= 1e-6 * max(1.0, abs(d))
