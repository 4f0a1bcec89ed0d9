"""Penrose limits by geodesic deviation along a null geodesic.

The geodesic and the parallel propagator ``Phi`` (``dPhi/dtau = -Gamma(gdot) Phi``)
are integrated together, so any initial frame is transported as
``E(tau) = Phi(tau) E(0)``.  The plane-wave profile is read from the tidal
matrix ``R(gdot, E_i, gdot, E_j)`` in a parallel null frame.

For a model plane wave the self-reproducing geodesic is the transverse one,
``x(tau) = (tau, 0, ..., 0)`` with velocity ``d/du``; along geodesics tangent
to the parallel field ``d/dv`` the tidal matrix vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from . import geometry as geo
from .models import FRAME_CONSTANT, ExprProfile, ModelFamilySpec

RTOL = 1e-10
ATOL = 1e-12
MAX_STEP = 0.02
NULL_TOL = 1e-10
DRIFT_TOL = 1e-8
GRAM_TOL = 1e-7

# P_ij = PROFILE_SIGN * R(gdot, E_i, gdot, E_j) / FRAME_CONSTANT reproduces the
# model profile A_ij along the canonical geodesic of a model plane wave
PROFILE_SIGN = -1.0


class PenroseError(RuntimeError):
    pass


@dataclass
class NullGeodesic:
    chart: geo.ChartSpec
    x0: np.ndarray
    v0: np.ndarray
    tau_range: tuple
    taus: np.ndarray
    states: np.ndarray  # (samples, 2n + n*n): position, velocity, propagator
    spline: CubicHermiteSpline
    null_drift: float
    rtol: float = RTOL
    atol: float = ATOL

    @property
    def n(self) -> int:
        return self.chart.dimension

    def position(self, tau) -> np.ndarray:
        return self.spline(tau)[..., : self.n]

    def velocity(self, tau) -> np.ndarray:
        return self.spline(tau)[..., self.n: 2 * self.n]

    def propagator(self, tau) -> np.ndarray:
        n = self.n
        return self.spline(tau)[..., 2 * n:].reshape(np.shape(tau) + (n, n))


@dataclass
class ParallelFrame:
    geodesic: NullGeodesic
    initial: np.ndarray  # columns: E+, E-, E_1..E_{n-2}
    gram_drift: float

    def at(self, tau: float) -> np.ndarray:
        return self.geodesic.propagator(tau) @ self.initial


@dataclass
class PlaneWaveProfile:
    u: np.ndarray
    P: np.ndarray  # (samples, m, m)
    degree: int | None = None
    details: dict = field(default_factory=dict)


def _metric(chart, x):
    return geo.metric_at(chart, x, 0).value


def _christoffel(chart, x) -> np.ndarray:
    return geo.christoffel(chart, x, 1).value


def _rhs(chart):
    n = chart.dimension

    def f(tau, y):
        x, v = y[:n], y[n: 2 * n]
        phi = y[2 * n:].reshape(n, n)
        gam = _christoffel(chart, x)
        acc = -np.einsum("abc,b,c->a", gam, v, v)
        conn = np.einsum("abc,b->ac", gam, v)  # Gamma^a_{bc} v^b acting on c
        dphi = -conn @ phi
        return np.concatenate([v, acc, dphi.ravel()])

    return f


def make_null(chart: geo.ChartSpec, x0, v0) -> np.ndarray:
    """Rescale the timelike part of ``v0`` so that it becomes exactly null."""
    g = _metric(chart, x0)
    v = np.asarray(v0, dtype=float)
    w, V = np.linalg.eigh(g)
    neg = np.flatnonzero(w < 0)
    if len(neg) != 1:
        raise PenroseError("null geodesics need a Lorentzian chart")
    T = V[:, neg[0]] / np.sqrt(-w[neg[0]])  # g(T, T) = -1
    a = -float(T @ g @ v)
    s = v - a * T
    ss = float(s @ g @ s)
    if ss <= 0:
        raise PenroseError("initial velocity has no spatial part")
    a_new = np.copysign(np.sqrt(ss), a if a != 0 else 1.0)
    out = a_new * T + s
    if abs(out @ g @ out) > NULL_TOL * float(out @ out):
        raise PenroseError("could not make the initial velocity null")
    return out


def integrate_null_geodesic(chart: geo.ChartSpec, x0, v0, tau_range=(-2.0, 2.0),
                            rtol: float = RTOL, atol: float = ATOL,
                            max_step: float = MAX_STEP) -> NullGeodesic:
    n = chart.dimension
    if geo.signature(chart, x0)[1] != 1:
        raise PenroseError("chart is not Lorentzian at the initial point")
    x0 = np.asarray(x0, dtype=float)
    v0 = make_null(chart, x0, v0)
    lo, hi = map(float, tau_range)
    if not lo <= 0.0 <= hi or lo == hi:
        raise PenroseError("tau range must contain the initial parameter 0")
    f = _rhs(chart)
    y0 = np.concatenate([x0, v0, np.eye(n).ravel()])
    ts, ys = [], []
    for end in (lo, hi):
        if end == 0.0:
            continue
        sol = solve_ivp(f, (0.0, end), y0, method="DOP853", rtol=rtol, atol=atol,
                        max_step=max_step)
        if not sol.success:
            raise PenroseError(f"geodesic integration failed: {sol.message}")
        ts.append(sol.t)
        ys.append(sol.y.T)
    if len(ts) == 2:
        t = np.concatenate([ts[0][::-1], ts[1][1:]])
        y = np.concatenate([ys[0][::-1], ys[1][1:]])
    else:
        t, y = ts[0], ys[0]
        if t[0] > t[-1]:
            t, y = t[::-1], y[::-1]
    dy = np.array([f(ti, yi) for ti, yi in zip(t, y)])
    drift = 0.0
    scale = float(v0 @ v0)
    for yi in y:
        x, v = yi[:n], yi[n: 2 * n]
        drift = max(drift, abs(v @ _metric(chart, x) @ v) / scale)
    if drift > DRIFT_TOL:
        raise PenroseError(f"null constraint drift {drift:.3e} exceeds {DRIFT_TOL:g}")
    spline = CubicHermiteSpline(t, y, dy, axis=0)
    return NullGeodesic(chart, x0, v0, (lo, hi), t, y, spline, drift, rtol, atol)


def initial_null_frame(g: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Columns ``k, l, e_1..e_{n-2}`` with ``g(k,l) = 1``, ``l`` null, ``e_i`` orthonormal."""
    n = len(k)
    basis = np.eye(n)
    gk = g @ k
    w = basis[np.argmax(np.abs(gk))]
    l = w / float(w @ gk)
    l = l - 0.5 * float(l @ g @ l) * k
    gl = g @ l
    spatial = []
    cands = sorted(range(n), key=lambda i: -abs(basis[i] @ g @ basis[i]))
    for i in cands:
        y = basis[i] - float(basis[i] @ gl) * k - float(basis[i] @ gk) * l
        for e in spatial:
            y = y - float(y @ g @ e) * e
        nn = float(y @ g @ y)
        if nn > 1e-8:
            spatial.append(y / np.sqrt(nn))
        if len(spatial) == n - 2:
            break
    if len(spatial) != n - 2:
        raise PenroseError("could not complete the null frame")
    return np.column_stack([k, l] + spatial)


def frame_gram_target(n: int) -> np.ndarray:
    G = np.eye(n)
    G[:2, :2] = [[0.0, 1.0], [1.0, 0.0]]
    return G


def transport_frame(geod: NullGeodesic, check_points: int = 41) -> ParallelFrame:
    chart = geod.chart
    n = geod.n
    E0 = initial_null_frame(_metric(chart, geod.x0), geod.v0)
    target = frame_gram_target(n)
    drift = 0.0
    for tau in np.linspace(*geod.tau_range, check_points):
        E = geod.propagator(tau) @ E0
        G = E.T @ _metric(chart, geod.position(tau)) @ E
        drift = max(drift, float(np.max(np.abs(G - target))))
    if drift > GRAM_TOL:
        raise PenroseError(f"frame Gram drift {drift:.3e} exceeds {GRAM_TOL:g}")
    return ParallelFrame(geod, E0, drift)


def penrose_profile(geod: NullGeodesic, frame: ParallelFrame, samples: int = 41) -> PlaneWaveProfile:
    taus = np.linspace(*geod.tau_range, samples)
    n = geod.n
    P = np.empty((samples, n - 2, n - 2))
    for k, tau in enumerate(taus):
        x = geod.position(tau)
        v = geod.velocity(tau)
        E = frame.at(tau)[:, 2:]
        R = geo.curvature_bundle(geod.chart, x, k_max=0).riemann.value
        tidal = np.einsum("abcd,a,bi,c,dj->ij", R, v, E, v, E)
        Pk = PROFILE_SIGN * tidal / FRAME_CONSTANT
        P[k] = 0.5 * (Pk + Pk.T)
    return PlaneWaveProfile(taus, P, details={"gram_drift": frame.gram_drift,
                                              "null_drift": geod.null_drift})


def profile_to_model(profile: PlaneWaveProfile, max_degree: int = 8) -> ModelFamilySpec:
    """Plane wave with ``eta = 1`` and polynomial ``A_ij`` fitted to the samples."""
    u = np.asarray(profile.u, dtype=float)
    if len(u) < 2:
        raise PenroseError("need at least two profile samples")
    deg = min(len(u) - 1, max_degree)
    m = profile.P.shape[1]
    coefs = np.zeros((deg + 1, m, m))
    for i in range(m):
        for j in range(i, m):
            c = np.polynomial.polynomial.polyfit(u, profile.P[:, i, j], deg)
            # drop coefficients at round-off level of the data
            scale = max(np.max(np.abs(profile.P[:, i, j])), 1e-300)
            c[np.abs(c) < 1e-14 * scale] = 0.0
            if np.max(np.abs(profile.P[:, i, j])) == 0:
                c[:] = 0.0
            coefs[:, i, j] = coefs[:, j, i] = c
    profile.degree = deg
    lo, hi = float(u.min()), float(u.max())
    return ModelFamilySpec(m + 2, (1,) * m, ExprProfile.polynomial(coefs), label="penrose-limit",
                           u_range=(lo, hi))


def penrose_limit(chart: geo.ChartSpec, x0, v0, tau_range=(-2.0, 2.0), samples: int = 41):
    """Geodesic, frame, profile and fitted model in one call."""
    geod = integrate_null_geodesic(chart, x0, v0, tau_range)
    frame = transport_frame(geod)
    prof = penrose_profile(geod, frame, samples)
    return geod, frame, prof, profile_to_model(prof)
