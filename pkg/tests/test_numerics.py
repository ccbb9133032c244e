"""Finite-difference operators, quadrature, flow integration and the kernel backends."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condsym import _kernels_py, kernels
from condsym.numerics import (
    FDConfig,
    FlowError,
    ProgramField,
    QuadratureError,
    ScalarField,
    SingularSetError,
    convergence_order,
    dalembert_op,
    euler_op,
    fd_operator_residual,
    flow_integrate,
    quadrature,
    second_euler_op,
)
from condsym.symcore import compile_program, parse


def field(fn, dim=4, **kw):
    return ScalarField(fn, dim, **kw)


# ---------------------------------------------------------------- FD operators
def test_box_of_spatial_square():
    f = field(lambda x: x[1] ** 2)
    assert abs(fd_operator_residual(f, dalembert_op(3), [1.3, 0.4, -0.2, 0.7]) - 2.0) <= 1e-8


def test_box_of_null_square():
    f = field(lambda x: (x[0] + x[1]) ** 2)
    assert abs(fd_operator_residual(f, dalembert_op(3), [1.1, 0.5, 0.3, -0.4])) <= 1e-8


def test_euler_homogeneity():
    f = field(lambda x: x[0] * x[1])
    assert abs(fd_operator_residual(f, euler_op(3, -2.0), [1.5, 0.8, 0.1, 0.2])) <= 1e-8


def test_second_euler_on_linear_function():
    f = field(lambda x: 3 * x[0] - x[2])
    assert abs(fd_operator_residual(f, second_euler_op(3, 2.0), [1.2, 0.3, 0.9, 0.5]) - 2 * f([1.2, 0.3, 0.9, 0.5])) <= 1e-8


def test_conventional_signature_flips():
    f = field(lambda x: x[1] ** 2)
    x = [1.0, 0.5, 0.5, 0.5]
    assert abs(fd_operator_residual(f, dalembert_op(3, signature="conventional"), x) + 2.0) <= 1e-8


def test_stencil_near_singular_set_raises():
    f = field(lambda x: math.log(x[0]), singular_distance=lambda x: abs(x[0]))
    with pytest.raises(SingularSetError):
        fd_operator_residual(f, dalembert_op(3), [1e-5, 0.1, 0.1, 0.1])


def test_operator_dimension_mismatch():
    with pytest.raises(ValueError):
        fd_operator_residual(field(lambda x: x[0], dim=3), dalembert_op(3), [1.0, 0.0, 0.0])


def test_fdconfig_validation():
    with pytest.raises(ValueError):
        FDConfig(h=0)
    with pytest.raises(ValueError):
        FDConfig(levels=0)


quartic_terms = st.lists(
    st.tuples(st.integers(-3, 3), st.tuples(*[st.integers(0, 2)] * 4)).filter(lambda t: sum(t[1]) <= 4),
    min_size=1, max_size=6)


@settings(max_examples=60, deadline=None)
@given(quartic_terms, st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(1e-3, 1e-2))
def test_fd_exact_on_quartics(terms, x, h):
    def f(p):
        return sum(c * np.prod([p[i] ** k[i] for i in range(4)]) for c, k in terms)

    def box(p):
        out = 0.0
        for c, k in terms:
            for i, s in enumerate((-1, 1, 1, 1)):
                if k[i] >= 2:
                    kk = list(k)
                    kk[i] -= 2
                    out += s * c * k[i] * (k[i] - 1) * np.prod([p[j] ** kk[j] for j in range(4)])
        return out

    got = fd_operator_residual(field(f), dalembert_op(3), x, FDConfig(h=h, levels=2, relative_step=False))
    assert abs(got - box(x)) <= 1e-8


# ---------------------------------------------------------------- quadrature
def test_quadrature_log_identity():
    val = quadrature(lambda w: 1 / (w * w - 1), 2.0, 3.0, tol=1e-12, singular=(-1, 1))
    assert abs(val - 0.2027325541) <= 1e-10
    assert abs(val - 0.5 * (math.log(0.5) - math.log(1 / 3))) <= 1e-12


def test_quadrature_polynomial():
    assert abs(quadrature(lambda w: 3 * w * w, 0.0, 1.0, tol=1e-13) - 1.0) <= 1e-12


def test_quadrature_singular_inside():
    with pytest.raises(QuadratureError):
        quadrature(lambda w: 1 / (w * w - 1), 0.0, 2.0, singular=(-1, 1))


def test_quadrature_nonconvergence():
    with pytest.raises(QuadratureError):
        quadrature(lambda w: math.sin(1 / w) / w ** 2, 1e-9, 1.0, tol=1e-14, limit=20)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.1, 4.0), st.floats(0.01, 2.0), st.floats(0.01, 2.0), st.sampled_from([0.5, 1.0, 2.0]))
def test_quadrature_additive(a, d1, d2, alpha):
    g = lambda w: (w * w - 1) ** (-alpha)  # noqa: E731
    tol = 1e-10
    b, c = a + d1, a + d1 + d2
    qac = quadrature(g, a, c, tol, (-1, 1))
    assert abs(qac - quadrature(g, a, b, tol, (-1, 1)) - quadrature(g, b, c, tol, (-1, 1))) <= 3 * tol


# ---------------------------------------------------------------- flows
def test_translation_flow_exact():
    y = flow_integrate(lambda s: np.array([1.0, 0.0]), [0.25, 0.3], 0.5, 4)
    assert np.array_equal(y, np.array([0.75, 0.3]))
    y = flow_integrate(lambda s: np.array([1.0, 0.0]), [0.2, 0.3], 0.5, 7)
    assert np.max(np.abs(y - [0.7, 0.3])) <= 1e-15


def test_exponential_flow():
    assert abs(flow_integrate(lambda s: s, [1.0], 1.0, 100)[0] - math.e) <= 1e-6


def test_rotation_flow():
    y = flow_integrate(lambda s: np.array([-s[1], s[0]]), [1.0, 0.0], math.pi / 2, 100)
    assert np.max(np.abs(y - [0.0, 1.0])) <= 1e-6


def test_flow_blowup_raises():
    with pytest.raises(FlowError), np.errstate(over="ignore"):
        flow_integrate(lambda s: s * s * 1e80, [1e200], 1.0, 4)


def test_flow_steps_validated():
    with pytest.raises(ValueError):
        flow_integrate(lambda s: s, [1.0], 1.0, 0)


@pytest.mark.parametrize("rhs,y0,exact", [
    (lambda s: s, [1.0], lambda e: [math.exp(e)]),
    (lambda s: np.array([-s[1], s[0]]), [1.0, 0.0], lambda e: [math.cos(e), math.sin(e)]),
    (lambda s: s * s, [0.5], lambda e: [0.5 / (1 - 0.5 * e)]),
])
def test_rk4_order(rhs, y0, exact):
    assert convergence_order(rhs, y0, 1.0, np.array(exact(1.0)), steps=8) >= 3.9


def test_compiled_field_matches_python_rhs():
    progs = [compile_program(parse(t), ["x0", "x1"]) for t in ("-x1", "x0")]
    pf = ProgramField(progs)
    a = flow_integrate(pf, [1.0, 0.0], 1.0, 50)
    b = flow_integrate(lambda s: np.array([-s[1], s[0]]), [1.0, 0.0], 1.0, 50)
    assert np.max(np.abs(a - b)) <= 1e-14


# ---------------------------------------------------------------- backends
def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in kernels.available_backends()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.2, 3.0), min_size=3, max_size=3))
def test_backends_agree(x):
    p = compile_program(parse("ln(x0 + x1^2)*sqrt(x2) - exp(x0/3)/x1 + abs(x2 - 1)^(3/2)"), ["x0", "x1", "x2"])
    X = np.array([x, [1.0, 2.0, 0.5]])
    ref = _kernels_py.eval_batch(p.code, p.consts, X)[0]
    for name, mod in kernels.available_backends().items():
        v, stt, _ = mod.eval_one(p.code, p.consts, np.array(x))
        assert stt == 0 and abs(v - ref[0]) <= 1e-12 * max(1, abs(ref[0])), name
        vb = mod.eval_batch(p.code, p.consts, X)[0]
        assert np.allclose(vb, ref, rtol=1e-12, atol=0), name


def test_backends_report_domain_errors():
    p = compile_program(parse("ln(x0)"), ["x0"])
    for mod in kernels.available_backends().values():
        _, stt, _ = mod.eval_one(p.code, p.consts, np.array([-1.0]))
        assert kernels.STATUS[int(stt)] == "log of non-positive value"
