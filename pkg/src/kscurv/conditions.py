"""Residuals for linear differential curvature conditions.

Everything here works on the all-covariant curvature ``R_{abcd}`` and its
covariant derivatives ``nabla^k R`` (derivative slots in front, outermost
first).  A condition of order ``r`` reads

    nabla^r R + t1 (x) nabla^{r-1} R + ... + tr (x) R = B

and is evaluated pointwise.  Residuals are measured in the auxiliary
Euclidean norm of the coordinate components and divided by a scale: the
largest norm among the summands, floored by a curvature reference built from
the lower derivatives of R so that a single vanishing term is not compared
with itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from . import geometry as geo
from . import jets

DEFAULT_TOL = 1e-9
ODE_TOL = 1e-6
TARGETS = ("riemann", "ricci", "scalar", "weyl")


class ConditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class ResidualReport:
    name: str
    residuals: np.ndarray
    scales: np.ndarray
    tolerance: float
    points: list
    details: dict = field(default_factory=dict)

    @property
    def relative(self) -> np.ndarray:
        r = np.asarray(self.residuals, dtype=float)
        s = np.asarray(self.scales, dtype=float)
        out = np.zeros_like(r)
        nz = s > 0
        out[nz] = r[nz] / s[nz]
        out[~nz & (r > 0)] = np.inf
        return out

    @property
    def max_relative(self) -> float:
        rel = self.relative
        return float(rel.max()) if rel.size else 0.0

    @property
    def passed(self) -> bool:
        return bool(np.all(self.relative < self.tolerance))


@dataclass
class RecurrenceResult:
    r: int
    tensors: list
    residuals: np.ndarray
    scales: np.ndarray
    proper: bool
    tolerance: float
    points: list

    @property
    def relative(self) -> np.ndarray:
        return np.where(self.scales > 0, self.residuals / np.where(self.scales > 0, self.scales, 1), 0.0)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.relative < self.tolerance))

    @property
    def ldc_tensors(self) -> list:
        """The coefficient in ``nabla^r R + t (x) R = 0`` form, i.e. minus the fit."""
        return [-t for t in self.tensors]

    @property
    def sigma(self) -> list:
        if self.r != 1:
            raise ConditionError("sigma is only defined for r = 1")
        return self.tensors


@dataclass
class HomothetyResult:
    c: np.ndarray
    residuals: np.ndarray
    scales: np.ndarray
    tolerance: float
    lightlike: bool
    parallel: bool
    points: list
    lemma_residuals: dict = field(default_factory=dict)

    @property
    def relative(self) -> np.ndarray:
        return np.where(self.scales > 0, self.residuals / np.where(self.scales > 0, self.scales, 1), 0.0)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.relative < self.tolerance))


@dataclass
class ParallelSquareReport:
    selector: str
    f: np.ndarray
    gradient: list
    hessian: list
    c: np.ndarray
    labels: list
    tolerance: float
    points: list

    @property
    def case(self) -> str:
        return self.labels[0] if len(set(self.labels)) == 1 else "inconsistent"


# ---------------------------------------------------------------------------
# tensor-field inputs
# ---------------------------------------------------------------------------

def expr_field(components, chart: geo.ChartSpec) -> Callable:
    """Wrap an object array of Exprs (or source strings) as a field ``point -> values``."""
    arr = np.asarray(components, dtype=object)
    flat = [ex.parse(c, chart.coordinates, list(chart.parameters)) if isinstance(c, str) else c
            for c in arr.ravel()]

    def field_at(point):
        vals = [geo.component_value(c, point, chart.parameters) for c in flat]
        return np.array(vals, dtype=float).reshape(arr.shape)

    field_at.shape = arr.shape
    return field_at


def constant_field(values) -> Callable:
    values = np.asarray(values, dtype=float)

    def field_at(point):
        return values

    field_at.shape = values.shape
    return field_at


def evaluate_field(fld, point, chart: geo.ChartSpec, rank: int) -> np.ndarray:
    n = chart.dimension
    if fld is None:
        return np.zeros((n,) * rank)
    if callable(fld):
        val = np.asarray(fld(point), dtype=float)
    else:
        val = np.asarray(expr_field(fld, chart)(point))
    if val.shape != (n,) * rank:
        raise jets.ShapeMismatch(
            f"tensor field has shape {val.shape}, expected {(n,) * rank} for this chart")
    return val


@dataclass(frozen=True)
class ConditionSpec:
    """``nabla^r X + sum_m t[m-1] (x) nabla^{r-m} X = B`` for the target object X.

    ``t`` holds r fields (rank m for entry m-1), each a callable returning
    component values, an object array of Exprs, or ``None`` for zero.  ``B``
    has the shape of ``nabla^r R`` (all slots covariant); for contracted
    targets it is contracted the same way as the curvature.
    """

    r: int
    t: tuple = ()
    B: object = None
    target: str = "riemann"

    def __post_init__(self):
        if self.r < 1:
            raise ConditionError("condition order r must be >= 1")
        if len(self.t) not in (0, self.r):
            raise ConditionError(f"expected {self.r} tensor fields t, got {len(self.t)}")
        if self.target not in TARGETS:
            raise ConditionError(f"unknown target {self.target!r}; expected one of {TARGETS}")


# ---------------------------------------------------------------------------
# target projections (act on the last four slots of nabla^k R values)
# ---------------------------------------------------------------------------

def _ricci_part(T: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    # Ric_{bd} = g^{ac} R_{abcd} on the trailing four slots
    return np.einsum("ac,...abcd->...bd", ginv, T)


def project_target(T: np.ndarray, target: str, g: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    if target == "riemann":
        return T
    if target == "ricci":
        return _ricci_part(T, ginv)
    if target == "scalar":
        return np.einsum("bd,...bd->...", ginv, _ricci_part(T, ginv))
    if target == "weyl":
        n = g.shape[0]
        if n < 3:
            return np.zeros_like(T)
        ric = _ricci_part(T, ginv)
        s = np.einsum("bd,...bd->...", ginv, ric)
        kul = (np.einsum("ac,...bd->...abcd", g, ric) - np.einsum("ad,...bc->...abcd", g, ric)
               - np.einsum("bc,...ad->...abcd", g, ric) + np.einsum("bd,...ac->...abcd", g, ric))
        gg = np.einsum("ac,bd->abcd", g, g) - np.einsum("ad,bc->abcd", g, g)
        return T - kul / (n - 2) + s[..., None, None, None, None] * gg / ((n - 1) * (n - 2))
    raise ConditionError(f"unknown target {target!r}")


def derivative_order_floor(norms: Sequence[float], d: int) -> float:
    """Curvature reference for a quantity with ``d`` derivatives of R.

    ``nabla^k R`` scales like length^-(2+k); raising its norm to
    ``(2+d)/(2+k)`` gives a number with the dimensions of ``nabla^d R``.
    """
    ref = [nk ** ((2.0 + d) / (2.0 + k)) for k, nk in enumerate(norms) if nk > 0]
    return max(ref) if ref else 0.0


def _bundles(chart, points, k_max, extra_order=0):
    return [geo.curvature_bundle(chart, p, k_max=k_max, extra_order=extra_order) for p in points]


# ---------------------------------------------------------------------------
# the general condition
# ---------------------------------------------------------------------------

def ldc_residual(chart: geo.ChartSpec, cond: ConditionSpec, points, tol: float = DEFAULT_TOL,
                 bundles=None) -> ResidualReport:
    r = cond.r
    points = [tuple(map(float, p)) for p in points]
    bundles = bundles or _bundles(chart, points, r)
    residuals, scales = [], []
    for p, b in zip(points, bundles):
        g, ginv = b.metric.value, b.metric_inv.value
        chain = [project_target(b.nabla_riemann(k).value, cond.target, g, ginv) for k in range(r + 1)]
        terms = [chain[r]]
        for m in range(1, r + 1):
            if not cond.t or cond.t[m - 1] is None:
                continue
            tm = evaluate_field(cond.t[m - 1], p, chart, m)
            terms.append(np.multiply.outer(tm, chain[r - m]))
        total = sum(terms)
        if cond.B is not None:
            Bv = evaluate_field(cond.B, p, chart, r + 4)
            Bv = project_target(Bv, cond.target, g, ginv)
            terms.append(Bv)
            total = total - Bv
        floor = derivative_order_floor([np.linalg.norm(c) for c in chain[:r]], r)
        residuals.append(np.linalg.norm(total))
        scales.append(max(max(np.linalg.norm(t) for t in terms), floor))
    return ResidualReport(f"ldc[{cond.target}, r={r}]", np.array(residuals), np.array(scales),
                          tol, points)


def check_r_symmetric(chart: geo.ChartSpec, r: int, points, tol: float = DEFAULT_TOL,
                      bundles=None) -> ResidualReport:
    """Residual of ``nabla^r R``; ``details['proper']`` is set when ``nabla^{r-1} R`` is not zero."""
    if r < 1:
        raise ConditionError("r must be >= 1")
    points = [tuple(map(float, p)) for p in points]
    bundles = bundles or _bundles(chart, points, r)
    residuals, scales, lower = [], [], []
    for b in bundles:
        norms = [np.linalg.norm(b.nabla_riemann(k).value) for k in range(r + 1)]
        floor = derivative_order_floor(norms[:r], r)
        residuals.append(norms[r])
        scales.append(max(norms[r], floor))
        lower.append(norms[r - 1] / max(derivative_order_floor(norms[: r - 1], r - 1), norms[r - 1])
                     if norms[r - 1] > 0 else 0.0)
    proper = bool(max(lower) > tol)
    return ResidualReport(f"r_symmetric[r={r}]", np.array(residuals), np.array(scales), tol, points,
                          {"proper": proper, "lower_norm": max(lower)})


def recover_recurrence(chart: geo.ChartSpec, r: int, points, tol: float = DEFAULT_TOL,
                       bundles=None) -> RecurrenceResult:
    """Least-squares fit of ``nabla^r R = T (x) R`` at each point.

    ``T`` is the recurrence form itself (sigma for r = 1); the coefficient in
    the ``nabla^r R + t (x) R = 0`` normalization is ``-T``.
    """
    points = [tuple(map(float, p)) for p in points]
    bundles = bundles or _bundles(chart, points, r)
    tensors, residuals, scales, lower = [], [], [], []
    for b in bundles:
        R = b.riemann.value
        nR = np.linalg.norm(R)
        if nR == 0 or nR < 1e-14 * max(1.0, np.linalg.norm(b.metric.value)):
            raise ConditionError("curvature vanishes at the point; recurrence fit undefined")
        top = b.nabla_riemann(r).value
        T = np.tensordot(top, R, axes=R.ndim) / nR ** 2
        resid = top - np.multiply.outer(T, R)
        norms = [np.linalg.norm(b.nabla_riemann(k).value) for k in range(r + 1)]
        tensors.append(T)
        residuals.append(np.linalg.norm(resid))
        scales.append(max(norms[r], derivative_order_floor(norms[:r], r)))
        lower.append(norms[r - 1] / max(derivative_order_floor(norms[: r - 1], r - 1), norms[r - 1])
                     if r > 1 and norms[r - 1] > 0 else (1.0 if r == 1 else 0.0))
    proper = bool(max(lower) > tol)
    return RecurrenceResult(r, tensors, np.array(residuals), np.array(scales), proper, tol, points)


# ---------------------------------------------------------------------------
# semi-symmetry and its higher analogues
# ---------------------------------------------------------------------------

def curvature_action(Rup: np.ndarray, T: np.ndarray) -> np.ndarray:
    """``(R(e_l, e_m) . T)`` for all-covariant ``T``: leading slots (l, m).

    Acting as a derivation, ``R(X, Y)`` sends ``T_{a...}`` to
    ``-sum_slots R^r_{a l m} T_{..r..}``.
    """
    n = Rup.shape[0]
    out = np.zeros((n, n) + T.shape)
    for k in range(T.ndim):
        # R^r_{a l m} T_{..r..}  ->  [l, m, ..., a, ...]
        c = np.tensordot(Rup, T, axes=([0], [k]))  # (a, l, m, rest...)
        c = np.moveaxis(c, 0, 2 + k)
        out -= c
    return out


def _antisymmetrize_pairs(T: np.ndarray, pairs: int) -> np.ndarray:
    for q in range(pairs):
        T = 0.5 * (T - np.swapaxes(T, 2 * q, 2 * q + 1))
    return T


def check_semi_symmetric(chart: geo.ChartSpec, points, tol: float = DEFAULT_TOL,
                         bundles=None) -> ResidualReport:
    """``R(X, Y) . R = 0`` via the four-term action and via commuted derivatives.

    The reported residual is the larger of the two relative residuals;
    both are kept in ``details``.
    """
    points = [tuple(map(float, p)) for p in points]
    bundles = bundles or _bundles(chart, points, 2)
    four, comm, scales, residuals = [], [], [], []
    for b in bundles:
        R = b.riemann.value
        act = curvature_action(b.riemann_up.value, R)
        d2 = b.nabla_riemann(2).value
        anti = d2 - np.swapaxes(d2, 0, 1)
        n0, n1, n2 = (np.linalg.norm(b.nabla_riemann(k).value) for k in range(3))
        scale = max(n2, derivative_order_floor([n0, n1], 2))
        four.append(np.linalg.norm(act) / scale if scale else 0.0)
        comm.append(np.linalg.norm(anti) / scale if scale else 0.0)
        # consistency of the two routes: Ricci identity for covariant tensors
        residuals.append(max(four[-1], comm[-1]) * scale)
        scales.append(scale)
    return ResidualReport("semi_symmetric", np.array(residuals), np.array(scales), tol, points,
                          {"four_term": np.array(four), "commutator": np.array(comm)})


def check_half_2p_symmetric(chart: geo.ChartSpec, p: int, points, tol: float = DEFAULT_TOL,
                            bundles=None) -> ResidualReport:
    """Residual of ``nabla_[l1 nabla_l2] ... nabla_[l(2p-1) nabla_l(2p)] R``."""
    if p < 1:
        raise ConditionError("p must be >= 1")
    points = [tuple(map(float, q)) for q in points]
    bundles = bundles or _bundles(chart, points, 2 * p)
    residuals, scales = [], []
    for b in bundles:
        top = b.nabla_riemann(2 * p).value
        norms = [np.linalg.norm(b.nabla_riemann(k).value) for k in range(2 * p + 1)]
        residuals.append(np.linalg.norm(_antisymmetrize_pairs(top, p)))
        scales.append(max(norms[-1], derivative_order_floor(norms[:-1], 2 * p)))
    return ResidualReport(f"half_2p_symmetric[p={p}]", np.array(residuals), np.array(scales),
                          tol, points)


# ---------------------------------------------------------------------------
# vector-field conditions
# ---------------------------------------------------------------------------

def _vector_jets(X, chart, point, order):
    n = chart.dimension
    if len(X) != n:
        raise jets.ShapeMismatch(f"vector field has {len(X)} components, chart has {n}")
    lay = jets.layout(n, order)
    comps = [ex.parse(c, chart.coordinates, list(chart.parameters)) if isinstance(c, str) else c
             for c in X]
    data = np.stack([geo.component_jet(c, point, chart.parameters, lay) for c in comps])
    return geo.Tensor(("u",), data, order)


def fit_homothety(chart: geo.ChartSpec, X: Sequence, points, tol: float = DEFAULT_TOL,
                  lemma_orders: int = 2) -> HomothetyResult:
    """Fit ``nabla X = c 1`` pointwise; on success also check the curvature identities

    ``nabla_X R + 2c R = 0`` and ``nabla_X nabla^r R + (r+2) c nabla^r R = 0``.
    """
    points = [tuple(map(float, p)) for p in points]
    n = chart.dimension
    cs, residuals, scales = [], [], []
    null_flags, par_flags = [], []
    lemma = {r: [] for r in range(lemma_orders + 1)}
    for p in points:
        b = geo.curvature_bundle(chart, p, k_max=lemma_orders + 1)
        Xj = _vector_jets(X, chart, p, b.christoffel.order + 1)
        dX = geo.covariant_derivative(Xj, b.christoffel).value  # [a, b] = nabla_a X^b
        c = np.trace(dX) / n
        resid = np.linalg.norm(dX - c * np.eye(n))
        cs.append(c)
        residuals.append(resid)
        scales.append(max(np.linalg.norm(dX), abs(c) * np.sqrt(n)))
        xv = Xj.value
        xnorm2 = float(xv @ xv)
        null_flags.append(abs(xv @ b.metric.value @ xv) < tol * max(xnorm2, 1e-300))
        par_flags.append(np.linalg.norm(dX) <= tol * max(np.linalg.norm(xv), 1e-300))
        for r in range(lemma_orders + 1):
            nr = b.nabla_riemann(r).value
            along = np.tensordot(xv, b.nabla_riemann(r + 1).value, axes=([0], [0]))
            res = along + (r + 2) * c * nr
            sc = max(np.linalg.norm(along), abs((r + 2) * c) * np.linalg.norm(nr))
            lemma[r].append(np.linalg.norm(res) / sc if sc > 0 else 0.0)
    return HomothetyResult(np.array(cs), np.array(residuals), np.array(scales), tol,
                           bool(all(null_flags)), bool(all(par_flags)), points,
                           {r: np.array(v) for r, v in lemma.items()})


def _selected_tensor(bundle: geo.CurvatureBundle, selector: str) -> geo.Tensor:
    if selector == "metric":
        return bundle.metric
    if selector == "riemann":
        return bundle.riemann
    if selector.startswith("nabla"):
        return bundle.nabla_riemann(int(selector[5:]))
    raise ConditionError(f"unknown tensor selector {selector!r}")


def classify_parallel_square(chart: geo.ChartSpec, selector: str, points,
                             tol: float = DEFAULT_TOL) -> ParallelSquareReport:
    """Case analysis for ``f = g(T, T)/2``, ``X = grad f``, ``Hess f = c g``.

    (i): ``c != 0`` and the Hessian is pure trace; (ii): X is a nonzero
    parallel lightlike field; (iii): X vanishes (f locally constant).
    """
    points = [tuple(map(float, p)) for p in points]
    k = int(selector[5:]) if selector.startswith("nabla") else 0
    fs, grads, hessians, cs, labels = [], [], [], [], []
    for p in points:
        b = geo.curvature_bundle(chart, p, k_max=k, extra_order=2)
        T = _selected_tensor(b, selector)
        if selector == "metric":
            T = T.truncated(b.riemann.order)
        fj = 0.5 * geo.full_contraction(T, b.metric, b.metric_inv)
        S = geo.Tensor((), fj, T.order)
        dX = geo.scalar_gradient(S)
        H = geo.covariant_derivative(dX, b.christoffel).value
        X = dX.value
        g, ginv = b.metric.value, b.metric_inv.value
        f = float(fj[0])
        c = float(np.tensordot(H, g, axes=2) / np.tensordot(g, g, axes=2))
        Tn = np.linalg.norm(T.value)
        # reference magnitudes: |f| ~ |T|^2, |X| ~ |T| |nabla T|
        ref = max(abs(f), 0.5 * Tn ** 2)
        xvec = ginv @ X
        x_zero = np.linalg.norm(X) <= tol * max(ref, 1e-300)
        h_norm = np.linalg.norm(H)
        if x_zero:
            label = "iii"
        elif abs(X @ xvec) <= tol * (X @ X) and h_norm <= tol * max(ref, np.linalg.norm(X)):
            label = "ii"
        elif abs(c) > tol * max(ref, h_norm) and np.linalg.norm(H - c * g) <= tol * max(h_norm, 1e-300):
            label = "i"
        else:
            label = "none"
        fs.append(f)
        grads.append(X)
        hessians.append(H)
        cs.append(c)
        labels.append(label)
    return ParallelSquareReport(selector, np.array(fs), grads, hessians, np.array(cs), labels,
                                tol, points)
