"""Ansatz substitution, scale splitting, projections and comparison with the printed forms."""
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condsym.reduction import (
    ReductionError,
    add1_residual,
    add2_residual,
    anz1_oracle,
    ansatz_anz1,
    ansatz_anz2,
    arbitrate_anz1,
    compare_with_paper,
    convention_beta,
    normalize_ode,
    project_ode,
    reduce_anz1,
    reduce_anz2,
    split_by_scale,
    substitute_ansatz,
)
from condsym.symcore import Poly, is_zero, normalize, parse
from condsym.waveforms import IndexForm, build_wave, paper_fixture


def ne(text, **kw):
    return normalize(parse(text, **kw))


# frozen from the independent FD oracle (anz1_oracle), beta kept symbolic
ANZ1_BRACKET = IndexForm({("phi", "id"): "beta^2-beta", ("phi", "euler"): "2-2*beta",
                          ("phi", "hess"): 1, ("phi", "lap"): -1})


# ---------------------------------------------------------------- anz1
def test_anz1_single_bucket_symbolic():
    r = reduce_anz1()
    assert len(r.equations) == 1 and r.provenance == [(Poly.param("beta") - 2, 0)]
    assert r.equations[0] == ANZ1_BRACKET


@pytest.mark.parametrize("beta", [0, -1, 2, Fraction(1, 2)])
def test_anz1_numeric_beta_matches_symbolic(beta):
    assert reduce_anz1(beta).equations[0] == ANZ1_BRACKET.subs({"beta": Fraction(beta)})


@pytest.mark.parametrize("alpha", [0, -1, Fraction(3, 2), "alpha"])
def test_euler_convention_satisfies_add1(alpha):
    a = ansatz_anz1(convention_beta(alpha, "euler"))
    assert add1_residual(a, alpha).is_zero()


def test_paper_convention_violates_add1():
    a = ansatz_anz1(convention_beta(1, "paper"))
    assert not add1_residual(a, 1).is_zero()


def test_unknown_convention():
    with pytest.raises(ReductionError):
        convention_beta(1, "other")


@pytest.mark.parametrize("beta", [0, -1, 2, "symbolic"])
def test_oracle_agrees_with_bracket(beta):
    sym = beta == "symbolic"
    for b in ((0, -1, 2) if sym else (beta,)):
        r = anz1_oracle(b, points=50, symbolic=sym)
        assert r["profiles"] == 3 and r["max_relative_deviation"] <= 1e-6


def test_oracle_rejects_symbolic_exponent():
    with pytest.raises(ReductionError):
        anz1_oracle("alpha")


def test_arbitration_flags_printed_anz1_equation():
    r = arbitrate_anz1("reduced1", "paper", alpha=-1)
    assert not r["consistent"] and r["max_relative_deviation"] > 1e-3


def test_arbitration_rejects_two_equation_fixture():
    with pytest.raises(ReductionError):
        arbitrate_anz1("reduced3")


# ---------------------------------------------------------------- anz2
@pytest.mark.parametrize("alpha", [0, 2, Fraction(1, 2), -1])
def test_anz2_satisfies_add2(alpha):
    assert add2_residual(ansatz_anz2(alpha), alpha).is_zero()


def test_anz2_log_branch_satisfies_add2():
    assert add2_residual(ansatz_anz2(1), 1).is_zero()


@pytest.mark.parametrize("alpha", [0, 2])
def test_anz2_generic_splits_in_two(alpha):
    r = reduce_anz2(alpha)
    assert len(r.equations) == 2
    assert {k for _, k in r.provenance} == {0}
    assert set(r.by_unknown()) == {"phi", "psi"}


def test_anz2_log_branch_buckets():
    r = reduce_anz2(1)
    assert sorted(k for _, k in r.provenance) == [0, 1]
    assert all(e == Poly.const(-2) for e, _ in r.provenance)
    by = r.by_unknown()
    assert by["phi"].unknowns == ["phi"]
    assert by["psi"].coefficient("phi", "euler") == Poly.const(-2)
    assert by["psi"].coefficient("phi", "id") == Poly.const(-1)


@pytest.mark.parametrize("alpha", [0, 2])
def test_phi_equation_matches_first_printed_line(alpha):
    d = reduce_anz2(alpha).by_unknown()["phi"]
    assert d == paper_fixture("reduced3").statement[0]


def test_reduced3_psi_line_differs():
    assert compare_with_paper(reduce_anz2(0), "reduced3", {"alpha": 0}).verdict == "match"
    rep = compare_with_paper(reduce_anz2(2), "reduced3", {"alpha": 2})
    assert rep.verdict == "mismatch"
    assert [(r["term"], r["derived"], r["fixture"]) for r in rep.mismatches] == [("psi", "2", "0")]


def test_reduced4_comparison():
    rep = compare_with_paper(reduce_anz2(1), "reduced4")
    assert rep.verdict == "mismatch"
    assert [(r["term"], r["derived"], r["fixture"]) for r in rep.mismatches] == [("w_a*psi_a", "2", "1")]


@settings(max_examples=20, deadline=None)
@given(st.fractions(-3, 3, max_denominator=3))
def test_split_is_complete(alpha):
    # the split buckets, recombined with their scales, give back the substituted box
    a = ansatz_anz2(alpha)
    box = substitute_ansatz(build_wave(3), a)
    r = split_by_scale(box, 3)
    lnx0 = ne("ln(x0)")
    total = ne("0")
    for (ex, k), raw in zip(r.provenance, r.raw):
        total = total + raw * ne(f"x0^({ex})") * (lnx0 ** k if k else ne("1"))
    assert is_zero(total - box)


# ---------------------------------------------------------------- projections
def test_printed_reduced1_projects_to_printed_reduced2():
    ode = project_ode(paper_fixture("reduced1").statement[0])
    assert is_zero(ode - normalize_ode(paper_fixture("reduced2").statement))


def test_derived_directional_ode():
    ode = project_ode(reduce_anz1(0).equations[0])
    assert is_zero(ode - ne("(w^2-1)*D[phi,1,1](w) + 2*w*D[phi,1](w)"))


def test_radial_projection():
    ode = project_ode(reduce_anz1(0).equations[0], "radial")
    assert is_zero(ode - ne("2*w*(w-1)*D[phi,1,1](w) + (3*w-n)*D[phi,1](w)"))


def test_concrete_projection_agrees_with_index_route():
    f = reduce_anz1(-1).equations[0]
    concrete = project_ode(f.expand(3), "directional", m=(Fraction(3, 5), Fraction(4, 5), 0), n=3)
    assert is_zero(concrete - project_ode(f))


def test_non_unit_direction_rejected():
    with pytest.raises(ReductionError):
        project_ode(ANZ1_BRACKET, m=(1, 1, 0))


def test_unknown_projection_mode():
    with pytest.raises(ReductionError):
        project_ode(ANZ1_BRACKET, "polar")


# ---------------------------------------------------------------- comparison
def test_printed_form_matches_itself():
    fx = paper_fixture("reduced1")
    assert compare_with_paper(list(fx.statement), "reduced1").verdict == "match"


def test_derived_anz1_against_reduced1():
    rep = compare_with_paper(reduce_anz1(convention_beta("alpha", "euler")), "reduced1")
    assert rep.verdict == "mismatch"
    assert "w_a*phi_a" in [r["term"] for r in rep.mismatches]


def test_ode_comparison_reduced2_at_zero():
    rep = compare_with_paper(project_ode(reduce_anz1(0).equations[0]), "reduced2", {"alpha": 0})
    assert rep.verdict == "mismatch"
    assert [r["term"] for r in rep.mismatches] == ["D[phi,1](w)"]


def test_solution_fixture_is_incomparable():
    assert compare_with_paper(reduce_anz1(0), "sol-a0").verdict == "incomparable"
