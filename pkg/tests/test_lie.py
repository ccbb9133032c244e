"""Prolongation, solution manifolds, invariance checkers and flows."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condsym.lie import (
    LieError,
    PDESystem,
    VectorField,
    apply_prolonged,
    check_invariance_numeric,
    check_invariance_symbolic,
    flow_transform,
    jet1,
    jet2,
    prolong2,
    sample_on_manifold,
    total_derivative,
)
from condsym.numerics import ScalarField, SingularSetError
from condsym.symcore import is_zero, ndiff, normalize, parse
from condsym.waveforms import (
    build_system,
    build_wave,
    lorentz,
    op2_arbitrary,
    op2_instances,
    op_D,
    poincare_generators,
    translation,
)

N = 3


def ne(text):
    return normalize(parse(text))


def vf(xi, eta="0", name="X"):
    return VectorField.make([ne(t) for t in xi], ne(eta), name)


def zeros(n=N):
    return ["0"] * (n + 1)


# ---------------------------------------------------------------- prolongation
def test_translation_prolongs_to_zero():
    p = prolong2(translation(N, 1))
    assert all(c.is_zero() for c in p.eta1)
    assert all(c.is_zero() for c in p.eta2.values())


def test_u_scaling_prolongation():
    p = prolong2(vf(zeros(), "u"))
    for mu in range(N + 1):
        assert is_zero(p.eta1[mu] - ne(jet1(mu)))
        for nu in range(mu, N + 1):
            assert is_zero(p.coefficient(mu, nu) - ne(jet2(mu, nu)))


def test_single_axis_scaling_prolongation():
    xi = zeros()
    xi[0] = "x0"
    p = prolong2(vf(xi))
    assert is_zero(p.eta1[0] + ne("u_0"))
    assert is_zero(p.coefficient(0, 0) + ne("2*u_00"))
    for a in range(1, N + 1):
        assert is_zero(p.coefficient(0, a) + ne(jet2(0, a)))
        for b in range(a, N + 1):
            assert p.coefficient(a, b).is_zero()


def test_eta2_affine_in_second_jets_for_linear_fields():
    p = prolong2(lorentz(N, 0, 2) + op_D(N, 1))
    for c in p.eta2.values():
        for s in c.syms:
            if s.startswith("u_") and len(s) == 4:
                assert not any(t.startswith("u_") and len(t) == 4 for t in ndiff(c, s).syms)


def test_total_derivative_rejects_second_order():
    with pytest.raises(LieError):
        total_derivative(ne("u_11"), 0, N)


pool = [translation(N, 1), lorentz(N, 1, 2), op_D(N, 0), vf(zeros(), "u"), vf(["x0^2", "x1*u", "0", "x3"], "u^2")]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(range(len(pool))), st.sampled_from(range(len(pool))),
       st.fractions(-3, 3, max_denominator=4), st.fractions(-3, 3, max_denominator=4))
def test_prolongation_linear(i, j, a, b):
    v, w = pool[i], pool[j]
    lhs = prolong2(v.scale(a) + w.scale(b))
    pv, pw = prolong2(v), prolong2(w)
    for mu in range(N + 1):
        assert is_zero(lhs.eta1[mu] - pv.eta1[mu].scale(a) - pw.eta1[mu].scale(b))
    for k, c in lhs.eta2.items():
        assert is_zero(c - pv.eta2[k].scale(a) - pw.eta2[k].scale(b))


# ---------------------------------------------------------------- action
BOX = "-u_00 + u_11 + u_22 + u_33"


def test_translation_annihilates_box():
    assert apply_prolonged(prolong2(translation(N, 1)), ne(BOX)).is_zero()


def test_u_scaling_reproduces_box():
    assert is_zero(apply_prolonged(prolong2(vf(zeros(), "u")), ne(BOX)) - ne(BOX))


def test_rotation_annihilates_box():
    assert apply_prolonged(prolong2(lorentz(N, 1, 2)), ne(BOX)).is_zero()


def test_third_order_rejected():
    with pytest.raises(LieError):
        apply_prolonged(prolong2(translation(N, 0)), ne("u_111"))


# ---------------------------------------------------------------- systems
def test_wave_add1_closure():
    s = build_system(N, None, [("add1", "alpha")])
    assert s.check_closure() and not s.unresolved
    assert {"u_00", "u_0", "u_01", "u_02", "u_03"} <= set(s.solved)


def test_explicit_solved_forms():
    s = PDESystem(N, [("wave", ne(BOX))], solved={"u_00": ne("u_11 + u_22 + u_33")})
    assert s.check_closure()


def test_unresolved_makes_inconclusive():
    s = PDESystem(N, [("c", ne("u_1^2 + u_2^2 - 1"))])
    assert s.unresolved
    assert check_invariance_symbolic(s, lorentz(N, 0, 1)).status == "inconclusive"


# ---------------------------------------------------------------- symbolic checker
@pytest.mark.parametrize("n", [2, 3])
def test_poincare_invariance_opaque_F(n):
    sys = build_wave(n, "F")
    for g in poincare_generators(n):
        assert check_invariance_symbolic(sys, g).invariant, g.name


def test_dilation_invariant_on_wave_add1():
    for a in (0, Fraction(-1), Fraction(1, 2), "alpha"):
        assert check_invariance_symbolic(build_system(N, None, [("add1", a)]), op_D(N, 0)).invariant


def test_single_axis_scaling_not_invariant():
    xi = zeros()
    xi[1] = "x1"
    v = check_invariance_symbolic(build_wave(N), vf(xi))
    assert v.status == "not-invariant"
    assert is_zero(v.residuals["wave"] + ne("2*u_11"))


# ---------------------------------------------------------------- numeric checker
WAVE_ADD1 = build_system(N, None, [("add1", 0)])


def test_u_scaling_numeric():
    v = check_invariance_numeric(WAVE_ADD1, op2_instances(N)["u-scaling"])
    assert v.invariant and v.max_residual <= 1e-8 and v.samples == 200 and v.seed == 42


@pytest.mark.parametrize("name", ["euler", "u-scaling", "rotation-12"])
def test_numeric_agrees_with_symbolic(name):
    op = op2_instances(N)[name]
    assert check_invariance_numeric(WAVE_ADD1, op).status == check_invariance_symbolic(WAVE_ADD1, op).status


def test_translation_breaks_homogeneity():
    v = check_invariance_numeric(WAVE_ADD1, translation(N, 1))
    assert v.status == "not-invariant" and v.max_residual > 1e-6
    assert v.location is not None and "x1" in v.location


def test_arbitrary_op2_verdicts_agree():
    op = op2_arbitrary(N)
    assert check_invariance_numeric(WAVE_ADD1, op, samples=40).status == check_invariance_symbolic(WAVE_ADD1, op).status


def test_numeric_needs_parameter_values():
    with pytest.raises(LieError):
        check_invariance_numeric(build_system(N, None, [("add1", "alpha")]), op_D(N, 0), samples=3)


def test_numeric_deterministic():
    a = check_invariance_numeric(WAVE_ADD1, translation(N, 2), samples=20, seed=5)
    b = check_invariance_numeric(WAVE_ADD1, translation(N, 2), samples=20, seed=5)
    assert a.max_residual == b.max_residual and a.location == b.location


# ---------------------------------------------------------------- sampling
def test_wave_sample_satisfies_equation():
    p = sample_on_manifold(build_wave(N), seed=3)
    assert abs(-p.u2[0, 0] + sum(p.u2[a, a] for a in range(1, N + 1))) <= 1e-12
    assert np.array_equal(p.u2, p.u2.T)


@pytest.mark.parametrize("alpha", [Fraction(0), Fraction(-2), Fraction(1, 3)])
def test_wave_add1_sample_residuals(alpha):
    sys = build_system(N, None, [("add1", alpha)])
    p = sample_on_manifold(sys, seed=11, params={"alpha": alpha})
    a = float(alpha)
    assert abs(-p.u2[0, 0] + np.trace(p.u2[1:, 1:])) <= 1e-12
    assert abs(p.x @ p.u1 + a * p.u) <= 1e-12
    for nu in range(N + 1):
        assert abs(p.x @ p.u2[:, nu] + (a + 1) * p.u1[nu]) <= 1e-12


def test_singular_region_rejected():
    region = [(-1e-4, 1e-4)] + [(1.0, 2.0)] * N
    with pytest.raises(SingularSetError):
        sample_on_manifold(WAVE_ADD1, region=region)


# ---------------------------------------------------------------- flows
def _f():
    return ScalarField(lambda x: math.sin(x[1]) * math.exp(-x[2]) + x[0] * x[3], N + 1)


def test_translation_flow_shifts():
    f = _f()
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = rng.uniform(0.5, 1.5, N + 1)
        shifted = x.copy()
        shifted[1] -= 0.3
        assert abs(flow_transform(translation(N, 1), f, 0.3, x) - f(shifted)) <= 1e-9


def test_u_scaling_flow_multiplies():
    f = _f()
    x = np.array([1.2, 0.3, 0.4, 0.8])
    for eps in (0.5, 1.0, -0.7):
        assert abs(flow_transform(vf(zeros(), "u"), f, eps, x) - math.exp(eps) * f(x)) <= 1e-7 * abs(f(x)) * math.exp(abs(eps))


def test_euler_flow_keeps_degree_zero():
    f = ScalarField(lambda x: math.atan(x[1] / x[0]) + (x[2] / x[0]) ** 2, N + 1)
    x = np.array([1.5, 0.7, -0.4, 0.2])
    assert abs(flow_transform(op_D(N, 0), f, 0.6, x) - f(x)) <= 1e-7


def test_u_dependent_flow_converges():
    # xi = u e_1 couples the transport to the field value
    f = ScalarField(lambda x: 0.5 + 0.1 * x[0], N + 1)
    v = vf(["0", "u", "0", "0"])
    val = flow_transform(v, f, 0.2, np.array([1.0, 0.0, 0.0, 0.0]))
    assert abs(val - 0.6) <= 1e-12


def test_bracket_lorentz_translation():
    assert lorentz(N, 0, 1).bracket(translation(N, 0)).equals(translation(N, 1).scale(-1))
