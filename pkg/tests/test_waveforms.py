"""Equation, condition and operator constructors plus the printed fixtures."""
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from condsym.lie import VectorField, check_invariance_symbolic
from condsym.symcore import is_zero, ndiff, normalize, parse
from condsym.waveforms import (
    ALIASES,
    Op1Spec,
    WaveformError,
    build_condition,
    build_system,
    build_wave,
    check_fixture_solution,
    fixture_ids,
    lorentz,
    op1_antiderivative,
    op1_integrand,
    op2_instances,
    op_D,
    op_op1,
    paper_fixture,
    poincare_generators,
    system_by_name,
    translation,
)

N = 3


def ne(text, **kw):
    return normalize(parse(text, **kw))


def vf(xi, eta="0"):
    return VectorField.make([ne(t) for t in xi], ne(eta))


# ---------------------------------------------------------------- equations
def test_wave_three_spatial_terms():
    (nm, eq), = build_wave(3).equations
    assert nm == "wave" and is_zero(eq - ne("-u_00 + u_11 + u_22 + u_33"))


def test_wave_exponential_nonlinearity():
    (_, eq), = build_wave(2, "exp").equations
    assert is_zero(eq - ne("-u_00 + u_11 + u_22 - lam*exp(u)"))


def test_wave_rejects_one_dimension():
    with pytest.raises(WaveformError):
        build_wave(1)


def test_power_and_general_nonlinearity():
    (_, eq), = build_wave(3, "power").equations
    assert is_zero(eq - ne("-u_00 + u_11 + u_22 + u_33 - lam*u^k"))
    (_, eq), = build_wave(3, "u^3 + x0").equations
    assert "x0" in eq.syms


def test_wave_solved_leading_jet():
    assert "u_00" in build_wave(3).solved


def test_conventional_signature_only_matters_with_F():
    (_, a), = build_wave(3, None, "paper").equations
    (_, b), = build_wave(3, None, "conventional").equations
    assert is_zero(a + b)


# ---------------------------------------------------------------- conditions
def test_add1_alpha_zero():
    (_, eq), = build_condition("add1", 0, N).equations
    assert is_zero(eq - ne("x0*u_0 + x1*u_1 + x2*u_2 + x3*u_3"))


def test_add1_symbolic_solved_form():
    s = build_condition("add1", "alpha", N)
    assert is_zero(s.solved["u_0"] - ne("(-alpha*u - x1*u_1 - x2*u_2 - x3*u_3)/x0"))


def test_add2_alpha_one():
    (_, eq), = build_condition("add2", 1, 2).equations
    expect = "x0^2*u_00 + 2*x0*x1*u_01 + 2*x0*x2*u_02 + x1^2*u_11 + 2*x1*x2*u_12 + x2^2*u_22 + x0*u_0 + x1*u_1 + x2*u_2"
    assert is_zero(eq - ne(expect))


def test_unknown_system_name():
    with pytest.raises(WaveformError):
        system_by_name("wave+add3")


# ---------------------------------------------------------------- operators
def test_D_is_euler_field_at_zero():
    assert op_D(N, 0).equals(vf(["x0", "x1", "x2", "x3"]))


def test_D_annihilates_degree_two():
    f = ne("x0^2*phi(x1/x0, x2/x0, x3/x0)")
    assert is_zero(op_D(N, 0).apply(f) - f.scale(2))
    assert is_zero(op_D(N, -2).apply(ne("u")).scale(1) + ne("2*u"))


def test_D_preserves_add1_manifold():
    assert check_invariance_symbolic(build_system(N, None, [("add1", "alpha")]), op_D(N, "alpha")).invariant


def test_op1_without_phi_is_linear():
    C = [[Fraction(i - k) for k in range(N + 1)] for i in range(N + 1)]
    v = op_op1(Op1Spec(2, [], C=C, d=3), N)
    expect = [" + ".join(f"({i - k})*x{k}" for k in range(N + 1)) + f" + 3*x{i}" for i in range(N + 1)]
    assert v.equals(vf(expect)) and v.eta.is_zero()


def test_op1_phi_u_alpha_one():
    v = op_op1(Op1Spec(1, [(1, 1, (0,) * (N + 1))]), N)
    assert is_zero(op1_antiderivative(Op1Spec(1, [(1, 1, (0,) * (N + 1))]), N) - ne("u"))
    assert v.equals(vf([f"-u^2*x{m}" for m in range(N + 1)], "u"))


def test_op1_theta_monomial_alpha_two():
    spec = Op1Spec(2, [(1, 1, (1, 0, 0, 0))])
    integ = op1_integrand(spec, N)
    assert is_zero(ndiff(op1_antiderivative(spec, N), "u") - integ)


def test_op1_log_case_needs_antiderivative():
    # alpha=2, p=1/2 makes the power of u vanish after integration
    with pytest.raises(WaveformError):
        op_op1(Op1Spec(2, [(1, Fraction(1, 2), (0,) * (N + 1))]), N)


def test_op1_alpha_zero_rejected():
    with pytest.raises(WaveformError):
        Op1Spec(0, [])


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([Fraction(1), Fraction(2), Fraction(-1), Fraction(1, 2), Fraction(-3)]),
       st.fractions(-3, 3, max_denominator=3).filter(lambda p: p != 0),
       st.tuples(*[st.integers(0, 2)] * (N + 1)),
       st.integers(-3, 3).filter(bool))
def test_op1_antiderivative_property(alpha, p, ks, c):
    assume(p + 1 / alpha - 1 != 0)
    spec = Op1Spec(alpha, [(c, p, ks)])
    assert is_zero(ndiff(op1_antiderivative(spec, N), "u") - op1_integrand(spec, N))


def test_op2_instances_are_classical():
    inst = op2_instances(N)
    assert inst["euler"].equals(op_D(N, 0))
    assert inst["u-scaling"].equals(vf(["0"] * (N + 1), "u"))
    assert inst["rotation-12"].equals(lorentz(N, 1, 2))


def test_op2_rejects_raw_coordinates():
    from condsym.waveforms import Op2Spec, op_op2
    with pytest.raises(WaveformError):
        op_op2(Op2Spec(["x1", "0", "0", "0"], "0"), N)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_poincare_count(n):
    gens = poincare_generators(n)
    assert len(gens) == (n + 1) + n * (n + 1) // 2


def test_rotation_sign():
    assert lorentz(N, 1, 2).equals(vf(["0", "-x2", "x1", "0"]))


def test_boost_form():
    assert lorentz(N, 0, 1).equals(vf(["x1", "x0", "0", "0"]))


def test_lorentz_translation_bracket():
    assert lorentz(N, 0, 1).bracket(translation(N, 0)).equals(translation(N, 1).scale(-1))


# ---------------------------------------------------------------- fixtures
def test_fixture_ids_stable():
    assert set(fixture_ids()) == {"reduced1", "reduced2", "sol-a0", "sol-am1", "radial", "reduced3", "reduced4",
                                  "sol-red3", "sol-red4", "anz1", "anz2", "add1-general-solution"}


def test_reduced2_as_printed():
    fx = paper_fixture("reduced2")
    assert is_zero(fx.statement - ne("(1+2*alpha)*w*D[phi,1](w) + (w^2-1)*D[phi,1,1](w) + alpha*(alpha+1)*phi(w)"))


def test_sol_a0_as_printed():
    fx = paper_fixture("sol-α0")
    assert fx.id == "sol-a0" and is_zero(fx.statement["phi"] - ne("c1*ln(abs(w+sqrt(w^2-1))) + c2"))


def test_sol_red3_as_printed():
    fx = paper_fixture("sol-red3")
    assert is_zero(fx.statement["phi"] - ne("c1*ln((w-1)/(w+1))"))
    assert is_zero(fx.statement["psi"]["integrand"] - ne("c3*(w^2-1)^(-alpha)"))


def test_aliases_resolve():
    for alias, target in ALIASES.items():
        assert paper_fixture(alias).id == target


def test_unknown_fixture():
    with pytest.raises(KeyError):
        paper_fixture("reduced9")


def test_fixtures_immutable():
    from condsym.waveforms import FIXTURES
    with pytest.raises(TypeError):
        FIXTURES["reduced1"] = None
    with pytest.raises(AttributeError):
        paper_fixture("reduced1").id = "x"


@pytest.mark.parametrize("sid", ["sol-a0", "sol-am1"])
def test_printed_solutions_satisfy_printed_ode(sid):
    assert check_fixture_solution(sid, "reduced2")
