"""Solution catalog, full-field composition, layered verification and transformations."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condsym.numerics import NumericsError, dalembert_op, fd_operator_residual
from condsym.solutions import (
    FIELD_FD,
    QuadratureFunction,
    SolutionError,
    UnknownEvaluator,
    catalog,
    compose_full_solution,
    entry_params,
    get_entry,
    layer_status,
    sample_region,
    transform_and_verify,
    verify,
    verify_three_layer,
)
from condsym.waveforms import op2_instances, translation

IDS = ["anz1-ode-a0", "anz1-ode-am1", "anz1-radial", "red3-phi", "red3-psi", "red4-phi", "red4-psi"]


# ---------------------------------------------------------------- catalog
def test_catalog_ids():
    assert [e.id for e in catalog()] == IDS


def test_unknown_entry():
    with pytest.raises(KeyError):
        get_entry("red5-phi")


def test_red3_phi_value():
    e = get_entry("red3-phi")
    phi = UnknownEvaluator(e.body("phi"), entry_params(e))
    assert abs(phi(3.0) - math.log(0.5)) <= 1e-14


def test_radial_basepoint():
    e = get_entry("anz1-radial")
    assert e.body("phi").basepoint == 2.0 and e.quadrature_backed
    phi = UnknownEvaluator(e.body("phi"), entry_params(e))
    assert phi(2.0) == 0.0


def test_domain_predicate():
    e = get_entry("anz1-ode-a0")
    assert e.domain(1.5) and not e.domain(1.0) and not e.domain(0.3)


@pytest.mark.parametrize("w", [1.5, 2.0, 2.75, 4.0])
def test_red3_psi_alpha_one_quadrature(w):
    e = get_entry("red3-psi")
    q = QuadratureFunction(e.body("psi"), entry_params(e, alpha=1))
    closed = lambda t: 0.5 * math.log((t - 1) / (t + 1))  # noqa: E731
    assert abs(q(w) - (closed(w) - closed(2.0))) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.floats(1.5, 4.0))
def test_quadrature_function_derivative(w):
    e = get_entry("red3-psi")
    q = QuadratureFunction(e.body("psi"), entry_params(e))
    h = 1e-4
    d = (q(w + h) - q(w - h)) / (2 * h)
    assert abs(d - (w * w - 1) ** -2) <= 1e-6


def test_quadrature_across_singular_point():
    e = get_entry("red3-psi")
    q = QuadratureFunction(e.body("psi"), entry_params(e))
    with pytest.raises(NumericsError):
        q(0.5)


# ---------------------------------------------------------------- composition
def test_composed_red3_phi_satisfies_wave():
    e = get_entry("red3-phi")
    f = compose_full_solution(e)
    for x in sample_region(e, 3, 10, 7):
        assert abs(fd_operator_residual(f, dalembert_op(3), x, FIELD_FD)) <= 1e-6


def test_non_unit_direction():
    with pytest.raises(SolutionError):
        compose_full_solution(get_entry("red3-phi"), m=(1, 1, 0))


def test_wrong_branch():
    with pytest.raises(SolutionError):
        compose_full_solution(get_entry("red4-phi"), alpha=2)


def test_sample_region_projection():
    e = get_entry("red3-phi")
    pts = sample_region(e, 3, 50, 1)
    w = pts[:, 1] / pts[:, 0]
    assert pts.shape == (50, 4) and w.min() >= 1.2 and w.max() <= 3.0
    r = sample_region(get_entry("anz1-radial"), 3, 50, 1)
    om = (r[:, 1:] ** 2).sum(axis=1) / r[:, 0] ** 2
    assert om.min() >= 1.2 - 1e-12 and om.max() <= 3.0 + 1e-12


def test_empty_region_rejected():
    with pytest.raises(SolutionError):
        sample_region(get_entry("red3-phi"), 3, 5, 0, omega_range=(0.5, 0.9))


# ---------------------------------------------------------------- verification
def test_red3_phi_all_layers():
    rep = verify_three_layer("red3-phi", samples=100)
    assert rep.checks and all(c.status == "pass" for c in rep.checks)
    wave = [c for c in rep.checks if c.id.endswith("/wave")]
    assert wave[0].max_residual <= 1e-6 and wave[0].samples == 100


def test_printed_anz1_solution_layer1():
    rep = verify_three_layer("anz1-ode-a0", layers=(1,), samples=50)
    assert layer_status(rep, 1) == "pass"


def test_region_override_applies():
    rep = verify_three_layer("red3-phi", layers=(3,), samples=20, region={"w": (1.5, 2.0), "x0": (1.0, 1.5)})
    for c in rep.checks:
        x = c.location["x"]
        assert 1.0 <= x[0] <= 1.5 and 1.5 <= x[1] / x[0] <= 2.0


def test_region_rejects_unknown_key():
    with pytest.raises(SolutionError):
        verify_three_layer("red3-phi", layers=(3,), samples=5, region={"x1": (0, 1)})


def test_verify_single_target():
    checks = verify("red3-phi", "condition", samples=30)
    assert len(checks) == 1 and checks[0].id.endswith("/add2") and checks[0].status == "pass"
    with pytest.raises(SolutionError):
        verify("red3-phi", "nonsense")


@pytest.mark.parametrize("eid", IDS)
def test_derived_pass_implies_full_field_pass(eid):
    rep = verify_three_layer(eid, conventions=("euler",), layers=(2, 3), samples=40)
    if layer_status(rep, 2, "euler") == "pass":
        wave = [c for c in rep.checks if "/layer3" in c.id and c.id.endswith("/wave")]
        assert all(c.status == "pass" for c in wave)


# ---------------------------------------------------------------- transformations
def test_translation_of_red3_phi():
    rep = transform_and_verify("red3-phi", translation(3, 2), 0.4, targets=("wave",), samples=40)
    assert [c.status for c in rep.checks] == ["pass"]
    assert rep.checks[0].max_residual <= 1e-5


def test_u_scaling_of_red3_phi():
    rep = transform_and_verify("red3-phi", op2_instances(3)["u-scaling"], 1.0,
                               targets=("wave", "condition"), samples=40)
    assert [c.id for c in rep.checks] == ["red3-phi/transformed/wave", "red3-phi/transformed/add2"]
    assert all(c.status == "pass" for c in rep.checks)
    assert rep.details[0]["invariance"] == "invariant"


def test_transform_unknown_target():
    with pytest.raises(SolutionError):
        transform_and_verify("red3-phi", translation(3, 1), 0.1, targets=("heat",), samples=3)


def test_transform_deterministic():
    a = transform_and_verify("red3-phi", translation(3, 1), 0.2, samples=10, seed=3)
    b = transform_and_verify("red3-phi", translation(3, 1), 0.2, samples=10, seed=3)
    assert a.checks[0].max_residual == b.checks[0].max_residual
    assert np.isfinite(a.checks[0].location["before"])
