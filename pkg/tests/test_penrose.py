"""Null geodesics, parallel frames and plane-wave (Penrose-limit) profiles."""

import numpy as np
import numpy.testing as npt
import pytest

from kscurv import classify as cl
from kscurv import conditions as cond
from kscurv import geometry as geo
from kscurv import models as md
from kscurv import penrose as pr
from conftest import DIAG_10, DIAG_11, poly_model

ORIGIN = (0.0, 0.0, 0.0, 0.0)
DU = (1.0, 0.0, 0.0, 0.0)
DS_V0 = (0.25, 0.25, 0.0, 0.0)


@pytest.fixture(scope="module")
def de_sitter_limit():
    return pr.penrose_limit(md.de_sitter(4), ORIGIN, DS_V0, (-2.0, 2.0), samples=21)


@pytest.fixture(scope="module")
def poly_wave():
    return poly_model(((0.5, 0.2), (0.2, -1.0)), DIAG_10, ((0.0, 0.1), (0.1, 0.3)),
                      u_range=(-2.0, 2.0))


def test_minkowski_ray_is_straight():
    chart = md.minkowski(4)
    geod = pr.integrate_null_geodesic(chart, ORIGIN, (1.0, 1.0, 0.0, 0.0), (-1.0, 2.0))
    for tau in (-1.0, 0.3, 2.0):
        npt.assert_allclose(geod.position(tau), [tau, tau, 0, 0], atol=1e-13)
    assert geod.null_drift < 1e-14
    frame = pr.transport_frame(geod)
    npt.assert_allclose(frame.at(1.7), frame.initial, atol=1e-14)
    prof = pr.penrose_profile(geod, frame, 9)
    npt.assert_array_equal(prof.P, 0.0)


def test_make_null_keeps_null_vectors():
    g = geo.metric_at(md.minkowski(4), ORIGIN, 0).value
    v = pr.make_null(md.minkowski(4), ORIGIN, (0.3, 0.6, 0.0, 0.0))
    npt.assert_allclose(v @ g @ v, 0.0, atol=1e-15)
    npt.assert_allclose(v[1:], [0.6, 0, 0])
    npt.assert_allclose(pr.make_null(md.minkowski(4), ORIGIN, (1.0, 1.0, 0.0, 0.0)), [1, 1, 0, 0])


def test_riemannian_chart_rejected():
    with pytest.raises(pr.PenroseError):
        pr.integrate_null_geodesic(md.euclidean(4), ORIGIN, DU)


def test_canonical_model_geodesic(poly_wave):
    geod = pr.integrate_null_geodesic(poly_wave.chart(), ORIGIN, DU, (-1.5, 1.5))
    for tau in np.linspace(-1.5, 1.5, 7):
        npt.assert_allclose(geod.position(tau), [tau, 0, 0, 0], atol=1e-12)


def test_model_frame_is_coordinate_frame(poly_wave):
    geod = pr.integrate_null_geodesic(poly_wave.chart(), ORIGIN, DU, (-1.0, 1.0))
    frame = pr.transport_frame(geod)
    assert frame.gram_drift < 1e-12
    E = frame.at(0.8)
    # transverse legs stay d/dx^i (their v-components vanish along x = 0)
    npt.assert_allclose(E[2:, 2:], np.eye(2), atol=1e-12)


def test_de_sitter_geodesic_and_frame(de_sitter_limit):
    geod, frame, _, _ = de_sitter_limit
    assert geod.null_drift < pr.DRIFT_TOL
    assert frame.gram_drift < pr.GRAM_TOL
    G = frame.at(-2.0).T @ geo.metric_at(md.de_sitter(4), geod.position(-2.0), 0).value @ frame.at(-2.0)
    npt.assert_allclose(G, pr.frame_gram_target(4), atol=1e-7)


def test_de_sitter_limit_is_flat(de_sitter_limit):
    _, _, prof, model = de_sitter_limit
    assert np.max(np.abs(prof.P)) < 1e-6
    res = cl.classify_bundle(geo.curvature_bundle(model.chart(), (0.5, 0.0, 0.1, 0.2)))
    assert res.label.name == "flat"


def test_zero_profile_gives_minkowski():
    prof = pr.PlaneWaveProfile(np.linspace(-1, 1, 5), np.zeros((5, 2, 2)))
    model = pr.profile_to_model(prof)
    b = geo.curvature_bundle(model.chart(), (0.1, 0.2, 0.3, 0.4))
    npt.assert_array_equal(b.riemann.value, 0.0)


def test_cahen_wallach_self_reproduction():
    A = ((1.0, 0.5), (0.5, -2.0))
    spec = md.make_named(md.CahenWallach(A), (-2.0, 2.0))
    _, _, prof, model = pr.penrose_limit(spec.chart(), ORIGIN, DU, (-2.0, 2.0), samples=11)
    for P in prof.P:
        npt.assert_allclose(P, A, atol=1e-6)
    for u in (-1.5, 0.0, 1.2):
        npt.assert_allclose(model.profile.value(u), A, atol=1e-6)


def test_polynomial_wave_self_reproduction(poly_wave):
    _, _, prof, model = pr.penrose_limit(poly_wave.chart(), ORIGIN, DU, (-2.0, 2.0), samples=21)
    for u, P in zip(prof.u, prof.P):
        npt.assert_allclose(P, poly_wave.profile.value(u), atol=1e-6)
    for u in np.linspace(-2, 2, 9):
        npt.assert_allclose(model.profile.value(u), poly_wave.profile.value(u), atol=1e-6)
    # the round trip preserves the defining symmetry conditions
    pts = md.sample_points(model, 4)
    assert cond.check_r_symmetric(model.chart(), 3, pts).passed
    assert not cond.check_r_symmetric(model.chart(), 2, pts).passed


def test_walker_profile_tracks_exponential():
    spec = md.make_named(md.Walker("exp(u)", DIAG_11), (-1.0, 1.0))
    geod = pr.integrate_null_geodesic(spec.chart(), ORIGIN, DU, (-1.0, 1.0))
    prof = pr.penrose_profile(geod, pr.transport_frame(geod), 11)
    for u, P in zip(prof.u, prof.P):
        npt.assert_allclose(P, np.exp(u) * np.eye(2), atol=1e-6 * np.exp(u))


def test_limit_models_have_zero_scalar(poly_wave, de_sitter_limit):
    _, _, _, model = pr.penrose_limit(poly_wave.chart(), ORIGIN, DU, (-1.0, 1.0), samples=9)
    for m in (model, de_sitter_limit[3]):
        for p in md.sample_points(m, 3):
            assert geo.curvature_bundle(m.chart(), p).scalar.value == 0.0


def test_tau_range_must_contain_start():
    with pytest.raises(pr.PenroseError):
        pr.integrate_null_geodesic(md.minkowski(4), ORIGIN, DU, (0.5, 1.0))
