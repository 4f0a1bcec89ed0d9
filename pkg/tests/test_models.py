"""Model family construction, closed forms, named instances."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kscurv import conditions as cond
from kscurv import geometry as geo
from kscurv import models as md
from conftest import DIAG_10, DIAG_11, ZERO2, poly_model


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_zero_profile_is_flat_minkowski():
    spec = poly_model(ZERO2)
    b = geo.curvature_bundle(spec.chart(), (0.2, 0.3, -0.1, 0.5))
    npt.assert_array_equal(b.riemann.value, 0.0)
    assert spec.signature == (3, 1)


def test_trace_free_cahen_wallach_is_ricci_flat():
    spec = md.make_named(md.CahenWallach(((1.0, 0.0), (0.0, -1.0))))
    b = geo.curvature_bundle(spec.chart(), (0.2, 0.3, -0.1, 0.5))
    npt.assert_array_equal(b.ricci.value, 0.0)
    assert np.linalg.norm(b.riemann.value) > 1


def test_ricci_uu_component():
    # Ric = -2 tr_eta(A) du du under the curvature convention used here
    A = ((1.5, 0.2, 0.0), (0.2, -0.5, 0.1), (0.0, 0.1, 2.0))
    eta = (1, 1, -1)
    spec = md.ModelFamilySpec(5, eta, md.ExprProfile.constant(A))
    assert spec.signature == (3, 2)
    b = geo.curvature_bundle(spec.chart(), (0.1,) * 5)
    want = np.zeros((5, 5))
    want[0, 0] = -md.FRAME_CONSTANT * sum(e * A[i][i] for i, e in enumerate(eta))
    npt.assert_allclose(b.ricci.value, want, atol=1e-14)


def test_spec_validation():
    with pytest.raises(md.ModelError):
        md.ModelFamilySpec(4, (1, 2), md.ExprProfile.constant(DIAG_11))
    with pytest.raises(md.ModelError):
        md.ModelFamilySpec(5, (1, 1, 1), md.ExprProfile.constant(DIAG_11))
    with pytest.raises(md.ModelError):
        md.ExprProfile.parse([["u", "1"], ["0", "u"]])
    with pytest.raises(md.ModelError):
        md.make_named(md.Walker("1", DIAG_10))  # constant F


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def test_closed_form_derivative_examples():
    spec = md.ModelFamilySpec(4, (1, 1), md.ExprProfile.parse([["u^2", "0"], ["0", "0"]]))
    npt.assert_allclose(md.closed_form_nabla_k(spec, 0.3, 2), np.diag([2.0, 0.0]))
    walker = md.make_named(md.Walker("exp(u)", DIAG_10))
    npt.assert_allclose(md.closed_form_nabla_k(walker, 0.0, 1), np.diag([1.0, 0.0]))


def _random_poly_spec(rng, n, degree=3):
    m = n - 2
    C = rng.uniform(-1, 1, size=(degree + 1, m, m))
    C = 0.5 * (C + np.swapaxes(C, 1, 2))
    eta = tuple(rng.choice([1, -1], size=m))
    return md.ModelFamilySpec(n, eta, md.ExprProfile.polynomial(C))


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([4, 5]))
def test_jet_pipeline_matches_closed_form(seed, n):
    rng = np.random.default_rng(seed)
    spec = _random_poly_spec(rng, n)
    p = tuple(rng.uniform(-1, 1, n))
    b = geo.curvature_bundle(spec.chart(), p, k_max=4)
    for k in range(5):
        got = b.nabla_riemann(k).value
        want = md.closed_form_curvature(spec, p[0], k)
        assert np.linalg.norm(got - want) <= 1e-9 * max(np.linalg.norm(want), 1.0), k


def test_closed_form_for_ode_profile():
    spec = md.make_named(md.Thompson("1+u^2", 0.7, h0=0.4, hdot0=-0.2))
    p = (0.35, 0.1, -0.4, 0.6)
    b = geo.curvature_bundle(spec.chart(), p, k_max=2)
    for k in range(3):
        want = md.closed_form_curvature(spec, p[0], k)
        npt.assert_allclose(b.nabla_riemann(k).value, want, atol=1e-9 * np.linalg.norm(want))


# ---------------------------------------------------------------------------
# ODE residual
# ---------------------------------------------------------------------------

US = [-0.7, 0.0, 0.4, 0.9]


def test_ode_harmonic_oscillator():
    spec = md.ModelFamilySpec(4, (1, 1), md.ExprProfile.parse([["sin(u)", "0"], ["0", "sin(u)"]]),
                              coefficients=("0", "1"))
    rep = md.ode_residual(spec, US)
    assert rep.passed and rep.max_relative < 1e-14


def test_ode_two_symmetric():
    spec = poly_model(ZERO2, ((1.0, 0.0), (0.0, 2.0)), coefficients=("0", "0"))
    assert md.ode_residual(spec, US).max_relative == 0.0


def test_ode_negative_control():
    spec = md.ModelFamilySpec(4, (1, 1), md.ExprProfile.parse([["u^3", "0"], ["0", "0"]]),
                              coefficients=("0", "0"))
    rep = md.ode_residual(spec, [0.5])
    npt.assert_allclose(rep.residuals[0], 6 * 0.5)
    assert not rep.passed


# ---------------------------------------------------------------------------
# named models
# ---------------------------------------------------------------------------

def test_walker_is_recurrent():
    spec = md.make_named(md.Walker("exp(u)", DIAG_10))
    assert cond.recover_recurrence(spec.chart(), 1, md.sample_points(spec)).passed


def test_cahen_wallach_is_symmetric():
    spec = md.make_named(md.CahenWallach(((1.0, 0.0), (0.0, 2.0))))
    assert cond.check_r_symmetric(spec.chart(), 1, md.sample_points(spec)).passed


def test_thompson_tau_closed_form():
    u = 0.3
    f, fdd = 1 + u * u, 2.0
    npt.assert_allclose(md.thompson_tau("1+u^2", 1.0, u), fdd / f - 1 / f ** 4, rtol=1e-14)


def test_thompson_recurrence_tensor():
    spec = md.make_named(md.Thompson("1+u^2", 1.0))
    pts = md.sample_points(spec, 5)
    res = cond.recover_recurrence(spec.chart(), 2, pts, 1e-6)
    assert res.passed
    for p, T in zip(pts, res.tensors):
        want = md.thompson_tau("1+u^2", 1.0, p[0]) * md.du_power(4, 2)
        npt.assert_allclose(T, want, atol=1e-6 * abs(want[0, 0]))


@pytest.mark.parametrize("h0,hdot0,flat", [(0.0, 0.0, True), (1.0, 0.0, False), (0.0, 0.5, False)])
def test_thompson_ricci_flat_iff_h_zero(h0, hdot0, flat):
    spec = md.make_named(md.Thompson("1+u^2", 1.0, h0=h0, hdot0=hdot0))
    ric = max(np.linalg.norm(geo.curvature_bundle(spec.chart(), p).ricci.value)
              for p in md.sample_points(spec, 5))
    assert (ric < 1e-9) == flat


def test_thompson_rejects_nonpositive_f():
    with pytest.raises(md.ModelError):
        md.make_named(md.Thompson("u", 1.0, u0=0.5), (-1.0, 1.0))


@pytest.mark.parametrize("k", [2, 3])
def test_recurrent_and_k_symmetric(k):
    spec = md.recurrent_and_ksym_instance(k)
    pts = md.sample_points(spec, 5)
    assert cond.recover_recurrence(spec.chart(), 1, pts).passed
    rep = cond.check_r_symmetric(spec.chart(), k, pts)
    assert rep.passed and rep.details["proper"]


def test_poly_symmetric_orders():
    two = md.PolySymmetric(ZERO2, DIAG_11, DIAG_10)
    three = md.PolySymmetric(DIAG_10, ZERO2, ZERO2)
    assert md.poly_symmetry_order(two) == 2 and md.poly_symmetry_order(three) == 3
    with pytest.raises(md.ModelError):
        md.make_named(md.PolySymmetric(ZERO2, ZERO2, DIAG_11))


def test_sample_points_are_deterministic():
    spec = poly_model(ZERO2, DIAG_10, u_range=(0.0, 2.0))
    a, b = md.sample_points(spec, 5, seed=3), md.sample_points(spec, 5, seed=3)
    assert a == b
    us = [p[0] for p in a]
    assert all(0.0 < u < 2.0 for u in us) and us == sorted(us)
