"""The plane-wave model family and its named special cases.

A model is the metric ``g = 2 du (dv + A_ij(u) x^i x^j du) + eta_ij dx^i dx^j``
on coordinates ``(u, v, x^1, ..., x^{n-2})``.  In coordinates the only
independent curvature component is ``R_{u i j u} = FRAME_CONSTANT * A_ij``
and ``nabla^k R = du^(x)k (x) model_tensor(A^{(k)})``; this closed form is the
oracle against which the generic pipeline is checked.

Profiles are objects exposing ``taylor(u, K)``, the Taylor coefficients of
``A_ij`` about ``u`` through order ``K`` (shape ``(m, m, K+1)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from . import expr as ex
from . import geometry as geo
from . import jets
from .conditions import ConditionSpec, ResidualReport, DEFAULT_TOL

# R_{uiju} = FRAME_CONSTANT * A_ij in coordinates (curvature conventions of geometry)
FRAME_CONSTANT = 2.0

TRANSVERSE_NAMES = ("x", "y", "z", "w")


class ModelError(ValueError):
    pass


def transverse_names(m: int) -> tuple:
    if m <= len(TRANSVERSE_NAMES):
        return TRANSVERSE_NAMES[:m]
    return tuple(f"x{i}" for i in range(1, m + 1))


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

def _scaled(c: float, e: ex.Expr) -> ex.Expr:
    if c == 0:
        return ex.ZERO
    if c == 1:
        return e
    if c == -1:
        return ex.Neg(e)
    node = ex.Mul(ex.Const(abs(float(c))), e)
    return ex.Neg(node) if c < 0 else node


@dataclass(frozen=True)
class ExprProfile:
    """Symmetric matrix of expressions in the single variable ``u``."""

    entries: tuple
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        m = len(self.entries)
        if any(len(row) != m for row in self.entries):
            raise ModelError("profile must be a square matrix")
        for i in range(m):
            for j in range(i):
                if ex.to_source(self.entries[i][j]) != ex.to_source(self.entries[j][i]):
                    raise ModelError("profile matrix must be symmetric")
            for e in self.entries[i]:
                if ex.coordinates_used(e) - {0}:
                    raise ModelError("profile entries may depend on u only")

    @classmethod
    def parse(cls, sources, parameters: Mapping[str, float] | None = None) -> "ExprProfile":
        parameters = dict(parameters or {})
        rows = tuple(tuple(s if not isinstance(s, str) else ex.parse(s, ["u"], list(parameters))
                           for s in row) for row in sources)
        return cls(rows, parameters)

    @classmethod
    def constant(cls, matrix) -> "ExprProfile":
        M = np.asarray(matrix, dtype=float)
        return cls(tuple(tuple(_scaled(v, ex.ONE) for v in row) for row in M))

    @classmethod
    def times(cls, F: ex.Expr, matrix, parameters=None) -> "ExprProfile":
        M = np.asarray(matrix, dtype=float)
        return cls(tuple(tuple(_scaled(v, F) for v in row) for row in M), dict(parameters or {}))

    @classmethod
    def polynomial(cls, coefs, parameters=None) -> "ExprProfile":
        """``coefs[k]`` is the matrix multiplying ``u^k``."""
        C = np.asarray(coefs, dtype=float)
        u = ex.Coord(0, "u")
        m = C.shape[1]
        return cls(tuple(tuple(ex.polynomial(C[:, i, j], u) for j in range(m)) for i in range(m)),
                   dict(parameters or {}))

    @property
    def size(self) -> int:
        return len(self.entries)

    def taylor(self, u: float, K: int) -> np.ndarray:
        lay = jets.layout(1, K)
        m = self.size
        out = np.empty((m, m, K + 1))
        for i in range(m):
            for j in range(i, m):
                out[i, j] = out[j, i] = ex.eval_jet_array(self.entries[i][j], [u], self.parameters, lay)
        return out

    def value(self, u: float) -> np.ndarray:
        return self.taylor(u, 0)[..., 0]


@dataclass
class OdeProfile:
    """Profile built from ODE solutions, with exact jets by recursive differentiation.

    ``state_taylor(u, K)`` returns the Taylor coefficients of the profile
    from the integrated state at ``u``; nothing is differentiated numerically.
    """

    size: int
    u_range: tuple
    solution: object
    taylor_fn: object
    order: int
    description: str = ""

    def _check(self, u):
        lo, hi = self.u_range
        if not lo - 1e-12 <= u <= hi + 1e-12:
            raise ModelError(f"u = {u} outside the integrated range [{lo}, {hi}]")

    def taylor(self, u: float, K: int) -> np.ndarray:
        self._check(u)
        return self.taylor_fn(u, self.solution(u), K)

    def value(self, u: float) -> np.ndarray:
        return self.taylor(u, 0)[..., 0]


Profile = Union[ExprProfile, OdeProfile]


# ---------------------------------------------------------------------------
# the family
# ---------------------------------------------------------------------------

@dataclass
class ModelFamilySpec:
    n: int
    eta: tuple
    profile: Profile
    inhomogeneity: Profile | None = None
    coefficients: tuple | None = None  # a_1(u), ..., a_r(u) as Exprs in u
    parameters: Mapping[str, float] = field(default_factory=dict)
    label: str = ""
    u_range: tuple = (-1.0, 1.0)

    def __post_init__(self):
        self.eta = tuple(int(e) for e in self.eta)
        if self.n < 3:
            raise ModelError("model family needs n >= 3")
        if len(self.eta) != self.n - 2 or any(e not in (1, -1) for e in self.eta):
            raise ModelError("eta must be a diagonal of n-2 entries equal to +1 or -1")
        if self.profile.size != self.n - 2:
            raise ModelError("profile size must be n-2")
        if self.inhomogeneity is not None and self.inhomogeneity.size != self.n - 2:
            raise ModelError("inhomogeneity size must be n-2")
        if self.coefficients is not None:
            self.coefficients = tuple(
                ex.parse(a, ["u"], list(self.parameters)) if isinstance(a, str) else a
                for a in self.coefficients)

    @property
    def transverse(self) -> int:
        return self.n - 2

    @property
    def coordinates(self) -> tuple:
        return ("u", "v") + transverse_names(self.n - 2)

    @property
    def signature(self) -> tuple:
        p = sum(1 for e in self.eta if e > 0)
        return (p + 1, self.n - 2 - p + 1)

    @property
    def r(self) -> int:
        return 0 if self.coefficients is None else len(self.coefficients)

    def chart(self) -> geo.ChartSpec:
        return build_model(self)


def _guu_expr(profile: ExprProfile) -> ex.Expr:
    m = profile.size
    xs = [ex.Coord(2 + i, nm) for i, nm in enumerate(transverse_names(m))]
    node = None
    for i in range(m):
        for j in range(i, m):
            a = profile.entries[i][j]
            if isinstance(a, ex.Const) and a.value == 0:
                continue
            mono = ex.Pow(xs[i], 2) if i == j else ex.Mul(xs[i], xs[j])
            c = 2.0 if i == j else 4.0
            term = ex.Mul(ex.Mul(ex.Const(c), a), mono)
            node = term if node is None else ex.Add(node, term)
    return node if node is not None else ex.ZERO


def _guu_callable(profile: Profile, n: int):
    m = n - 2

    def component(point, lay):
        K = lay.order
        coefs = profile.taylor(point[0], K)
        idx = [lay.index[(k,) + (0,) * (n - 1)] for k in range(K + 1)]
        a = np.zeros((m, m, lay.size))
        a[..., idx] = coefs
        xs = np.stack([jets.variable(2 + i, point[2 + i], lay) for i in range(m)])
        ax = jets.einsum("ij,j->i", a, xs, lay)
        return 2.0 * jets.einsum("i,i->", xs, ax, lay)

    return component


def build_model(spec: ModelFamilySpec) -> geo.ChartSpec:
    """Chart for ``g_uv = 1``, ``g_uu = 2 A_ij x^i x^j``, ``g_ij = eta_ij``."""
    n = spec.n
    comps = {(0, 1): ex.ONE}
    for i, e in enumerate(spec.eta):
        comps[(2 + i, 2 + i)] = ex.Const(1.0) if e > 0 else ex.Neg(ex.Const(1.0))
    if isinstance(spec.profile, ExprProfile):
        comps[(0, 0)] = _guu_expr(spec.profile)
        params = dict(spec.profile.parameters)
    else:
        comps[(0, 0)] = _guu_callable(spec.profile, n)
        params = {}
    params.update(spec.parameters)
    return geo.ChartSpec.from_components(spec.coordinates, comps, params, spec.label)


def model_tensor(n: int, M: np.ndarray, constant: float = FRAME_CONSTANT) -> np.ndarray:
    """All-covariant curvature-type tensor with ``T_{uiju} = constant * M_ij``."""
    T = np.zeros((n,) * 4)
    blk = constant * np.asarray(M, dtype=float)
    s = slice(2, n)
    T[0, s, s, 0] = blk
    T[0, s, 0, s] = -blk
    T[s, 0, 0, s] = blk
    T[s, 0, s, 0] = -blk
    return T


def du_power(n: int, k: int) -> np.ndarray:
    e = np.zeros(n)
    e[0] = 1.0
    out = np.ones(())
    for _ in range(k):
        out = np.multiply.outer(out, e)
    return out


def closed_form_nabla_k(spec: ModelFamilySpec, u: float, k: int) -> np.ndarray:
    """``d^k A / du^k`` at ``u``."""
    return spec.profile.taylor(u, k)[..., k] * math.factorial(k)


def closed_form_curvature(spec: ModelFamilySpec, u: float, k: int) -> np.ndarray:
    """Full ``nabla^k R`` at any point with first coordinate ``u``."""
    return np.multiply.outer(du_power(spec.n, k), model_tensor(spec.n, closed_form_nabla_k(spec, u, k)))


def _coefficient_values(spec: ModelFamilySpec, u: float) -> list:
    if spec.coefficients is None:
        raise ModelError("model has no ODE coefficients a_m")
    return [ex.evaluate(a, [u], spec.parameters) for a in spec.coefficients]


def ldc_condition(spec: ModelFamilySpec, target: str = "riemann") -> ConditionSpec:
    """Condition with ``t_m = a_m(u) du^(x)m`` and ``B = du^(x)r (x) model_tensor(B(u))``."""
    r = spec.r
    if r < 1:
        raise ModelError("model has no ODE coefficients a_m")
    n = spec.n

    def t_field(m):
        a = spec.coefficients[m - 1]

        def fld(point):
            return ex.evaluate(a, [point[0]], spec.parameters) * du_power(n, m)

        return fld

    B = None
    if spec.inhomogeneity is not None:
        prof = spec.inhomogeneity

        def b_field(point):
            return np.multiply.outer(du_power(n, r), model_tensor(n, prof.value(point[0])))

        B = b_field

    return ConditionSpec(r, tuple(t_field(m) for m in range(1, r + 1)), B, target)


def ode_residual(spec: ModelFamilySpec, u_samples: Sequence[float],
                 tol: float = DEFAULT_TOL) -> ResidualReport:
    """``A^{(r)} + sum_m a_m A^{(r-m)} - B`` per sample, scaled by the largest term."""
    r = spec.r
    if r < 1:
        raise ModelError("model has no ODE coefficients a_m")
    residuals, scales = [], []
    for u in u_samples:
        co = spec.profile.taylor(u, r)
        derivs = [co[..., k] * math.factorial(k) for k in range(r + 1)]
        a = _coefficient_values(spec, u)
        terms = [derivs[r]] + [a[m - 1] * derivs[r - m] for m in range(1, r + 1)]
        total = sum(terms)
        if spec.inhomogeneity is not None:
            Bv = spec.inhomogeneity.value(u)
            terms.append(Bv)
            total = total - Bv
        floor = max(np.linalg.norm(d) for d in derivs[:r])
        residuals.append(np.linalg.norm(total))
        scales.append(max(max(np.linalg.norm(t) for t in terms), floor))
    return ResidualReport(f"ode[r={r}]", np.array(residuals), np.array(scales), tol,
                          [(float(u),) for u in u_samples])


def chebyshev_samples(u_range: tuple, count: int = 7) -> np.ndarray:
    lo, hi = u_range
    k = np.arange(count)
    nodes = np.cos((2 * k + 1) * np.pi / (2 * count))[::-1]
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes


def sample_points(spec: ModelFamilySpec, count: int = 7, seed: int = 0) -> list:
    """Points with Chebyshev-spaced ``u`` and pseudo-random ``(v, x)`` in [-1, 1]."""
    rng = np.random.default_rng(seed)
    us = chebyshev_samples(spec.u_range, count)
    return [tuple([float(u)] + list(rng.uniform(-1, 1, spec.n - 1))) for u in us]


# ---------------------------------------------------------------------------
# named models
# ---------------------------------------------------------------------------

def _as_expr(src, parameters=()):
    return ex.parse(src, ["u"], list(parameters)) if isinstance(src, str) else src


@dataclass(frozen=True)
class CahenWallach:
    A: tuple


@dataclass(frozen=True)
class Walker:
    F: object
    M: tuple


@dataclass(frozen=True)
class PolySymmetric:
    D: tuple
    B: tuple
    C: tuple


@dataclass(frozen=True)
class Thompson:
    f: object
    kappa: float
    h0: float = 0.0
    hdot0: float = 0.0
    beta0: float = 0.0
    u0: float = 0.0


NamedModelParams = Union[CahenWallach, Walker, PolySymmetric, Thompson]


def _square(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ModelError(f"{name} must be a square matrix")
    if not np.allclose(M, M.T):
        raise ModelError(f"{name} must be symmetric")
    return M


def make_named(params: NamedModelParams, u_range: tuple = (-1.0, 1.0),
               eta: Sequence[int] | None = None) -> ModelFamilySpec:
    if isinstance(params, CahenWallach):
        A = _square(params.A, "A")
        m = A.shape[0]
        return ModelFamilySpec(m + 2, tuple(eta or (1,) * m), ExprProfile.constant(A),
                               label="cahen-wallach", u_range=u_range)
    if isinstance(params, Walker):
        M = _square(params.M, "M")
        if np.linalg.matrix_rank(M) < 1:
            raise ModelError("Walker model needs rank(M) >= 1")
        F = _as_expr(params.F)
        if not ex.coordinates_used(F):
            raise ModelError("Walker model needs a non-constant F(u)")
        m = M.shape[0]
        return ModelFamilySpec(m + 2, tuple(eta or (1,) * m), ExprProfile.times(F, M),
                               label="walker", u_range=u_range)
    if isinstance(params, PolySymmetric):
        D, B, C = (_square(x, nm) for x, nm in ((params.D, "D"), (params.B, "B"), (params.C, "C")))
        if np.linalg.matrix_rank(D) < 1 and np.linalg.matrix_rank(B) < 1:
            raise ModelError("2-symmetry needs rank(B) >= 1, 3-symmetry needs rank(D) >= 1")
        m = D.shape[0]
        return ModelFamilySpec(m + 2, tuple(eta or (1,) * m), ExprProfile.polynomial([C, B, D]),
                               label="poly-symmetric", u_range=u_range)
    if isinstance(params, Thompson):
        return thompson_model(params, u_range)
    raise ModelError(f"unknown named model {params!r}")


def poly_symmetry_order(params: PolySymmetric) -> int:
    if np.linalg.matrix_rank(np.asarray(params.D, dtype=float)) >= 1:
        return 3
    return 2


def recurrent_and_ksym_instance(k: int, u_range: tuple = (0.5, 2.0)) -> ModelFamilySpec:
    """Walker model with monic ``F = u^{k-1}``: recurrent and k-symmetric."""
    if k not in (2, 3):
        raise ModelError("k must be 2 or 3")
    F = ex.Coord(0, "u") if k == 2 else ex.Pow(ex.Coord(0, "u"), k - 1)
    spec = make_named(Walker(F, ((1.0, 0.0), (0.0, 0.0))), u_range)
    spec.label = f"recurrent-{k}-symmetric"
    return spec


# --- Thompson-McLenaghan ------------------------------------------------------

def _thompson_taylor(f_expr, kappa, parameters):
    def taylor(u, state, K):
        beta, h, hdot = state
        L = K + 2
        lay = jets.layout(1, L)
        fj = ex.eval_jet_array(f_expr, [u], parameters, lay)
        low = jets.layout(1, K)
        fddot = np.array([fj[k + 2] * (k + 2) * (k + 1) for k in range(K + 1)])
        fK = fj[: K + 1]
        inv_f = jets.reciprocal(fK, low)
        inv_f2 = jets.mul(inv_f, inv_f, low)
        tau = jets.mul(fddot, inv_f, low) - kappa ** 2 * jets.mul(inv_f2, inv_f2, low)
        rate = kappa * inv_f2  # beta' = kappa / f^2
        b = np.zeros(K + 1)
        b[0] = beta
        for k in range(1, K + 1):
            b[k] = rate[k - 1] / k
        hc = np.zeros(K + 1)
        hc[0] = h
        if K >= 1:
            hc[1] = hdot
        for k in range(K - 1):
            # (tau h)_k depends on h_0..h_k only
            th = sum(tau[i] * hc[k - i] for i in range(k + 1))
            hc[k + 2] = th / ((k + 2) * (k + 1))
        cb = jets.compose("cos", b, low)
        sb = jets.compose("sin", b, low)
        two_f_cos = 2.0 * jets.mul(fK, cb, low)
        two_f_sin = 2.0 * jets.mul(fK, sb, low)
        out = np.empty((2, 2, K + 1))
        out[0, 0] = hc + two_f_cos
        out[1, 1] = hc - two_f_cos
        out[0, 1] = out[1, 0] = -two_f_sin
        return out

    return taylor


def thompson_tau(f_expr, kappa: float, u: float, parameters=None) -> float:
    """``f''/f - kappa^2 / f^4`` at ``u``."""
    lay = jets.layout(1, 2)
    fj = ex.eval_jet_array(_as_expr(f_expr), [u], parameters or {}, lay)
    f, fdd = fj[0], 2 * fj[2]
    return fdd / f - kappa ** 2 / f ** 4


def thompson_model(params: Thompson, u_range: tuple = (-1.0, 1.0), rtol: float = 1e-10,
                   atol: float = 1e-12) -> ModelFamilySpec:
    """Integrate ``beta' = kappa/f^2`` and ``h'' = (f''/f - kappa^2/f^4) h`` over ``u_range``.

    The profile is ``A = h 1 + 2f [[cos b, -sin b], [-sin b, -cos b]]``, read off
    from the wave profile function
    ``H = h (x^2 + y^2) + 2f ((x^2 - y^2) cos b - 2 x y sin b)``.
    """
    f_expr = _as_expr(params.f)
    kappa = float(params.kappa)
    lo, hi = map(float, u_range)
    u0 = float(params.u0)
    if not lo <= u0 <= hi:
        raise ModelError("initial point u0 must lie in the u-range")
    grid = np.linspace(lo, hi, 257)
    fvals = np.array([ex.evaluate(f_expr, [u]) for u in grid])
    if np.any(fvals <= 0):
        raise ModelError("Thompson model needs f > 0 on the u-range")

    def rhs(u, y):
        lay = jets.layout(1, 2)
        fj = ex.eval_jet_array(f_expr, [u], {}, lay)
        f, fdd = fj[0], 2 * fj[2]
        tau = fdd / f - kappa ** 2 / f ** 4
        return [kappa / f ** 2, y[2], tau * y[1]]

    y0 = [params.beta0, params.h0, params.hdot0]
    pieces = []
    for end in (lo, hi):
        if end == u0:
            continue
        sol = solve_ivp(rhs, (u0, end), y0, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True)
        if not sol.success:
            raise ModelError(f"integration failed: {sol.message}")
        pieces.append((min(u0, end), max(u0, end), sol.sol))

    def solution(u):
        if u == u0:
            return np.array(y0, dtype=float)
        for a, b, s in pieces:
            if a <= u <= b:
                return s(u)
        raise ModelError(f"u = {u} outside the integrated range")

    prof = OdeProfile(2, (lo, hi), solution, _thompson_taylor(f_expr, kappa, {}), 2,
                      description="thompson-mclenaghan")
    return ModelFamilySpec(4, (1, 1), prof, label="thompson", u_range=(lo, hi))


# ---------------------------------------------------------------------------
# standard charts
# ---------------------------------------------------------------------------

def euclidean(n: int) -> geo.ChartSpec:
    names = [f"x{i}" for i in range(1, n + 1)]
    return geo.ChartSpec.from_components(names, {(i, i): "1" for i in range(n)}, label=f"R{n}")


def minkowski(n: int) -> geo.ChartSpec:
    names = ["t"] + [f"x{i}" for i in range(1, n)]
    comps = {(0, 0): "-1"}
    comps.update({(i, i): "1" for i in range(1, n)})
    return geo.ChartSpec.from_components(names, comps, label=f"minkowski{n}")


def sphere(n: int, radius: float = 1.0) -> geo.ChartSpec:
    """Round ``S^n`` in hyperspherical angles ``a1..an``."""
    names = [f"a{i}" for i in range(1, n + 1)]
    comps = {}
    for i in range(n):
        factors = [f"sin({names[j]})^2" for j in range(i)]
        comps[(i, i)] = "*".join(["r^2"] + factors)
    return geo.ChartSpec.from_components(names, comps, {"r": float(radius)}, label=f"S{n}")


def de_sitter(n: int = 4, radius: float = 1.0) -> geo.ChartSpec:
    """Flat slicing ``-dt^2 + exp(2t/l) |dx|^2``."""
    names = ["t"] + [f"x{i}" for i in range(1, n)]
    comps = {(0, 0): "-1"}
    comps.update({(i, i): "exp(2*t/l)" for i in range(1, n)})
    return geo.ChartSpec.from_components(names, comps, {"l": float(radius)}, label=f"dS{n}")


def sphere_product(radius: float = 1.0) -> geo.ChartSpec:
    """``S^2 x R^2``: a Riemannian space whose curvature lives on a 2-plane."""
    comps = {(0, 0): "r^2", (1, 1): "r^2*sin(th)^2", (2, 2): "1", (3, 3): "1"}
    return geo.ChartSpec.from_components(["th", "ph", "x", "y"], comps, {"r": float(radius)},
                                         label="S2xR2")
