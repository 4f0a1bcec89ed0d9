"""Charts, jet-valued tensors and the Levi-Civita curvature pipeline.

Sign conventions follow the Ricci identity
``(nabla_l nabla_m - nabla_m nabla_l) X^a = R^a_{b l m} X^b`` which gives

    R^a_{bcd} = d_c G^a_{db} - d_d G^a_{cb} + G^a_{ce} G^e_{db} - G^a_{de} G^e_{cb}

with ``Ric_{bd} = R^a_{bad}``.  The unit round sphere then has ``S > 0`` and
``R_{theta phi theta phi} > 0``.

Every tensor carries jets: ``data`` has one axis of extent ``n`` per slot and a
trailing axis of Taylor coefficients.  Taking a covariant derivative consumes
one jet order, so ``nabla^k R`` needs the metric to order ``k + 2``.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from . import expr as ex
from . import jets

DEGENERACY_TOL = 1e-12

# A metric component is either an expression or a callable returning the
# coefficient array of its jet: ``component(point, layout) -> ndarray``.
Component = Union[ex.Expr, Callable]


class DegenerateMetric(ValueError):
    pass


class JetOrderExhausted(ValueError):
    pass


class SlotError(IndexError):
    pass


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartSpec:
    coordinates: tuple
    metric: tuple
    parameters: Mapping[str, float] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        n = len(self.coordinates)
        if n < 2:
            raise ValueError("a chart needs at least two coordinates")
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            raise ValueError("metric must be an n x n array of components")
        for i in range(n):
            for j in range(i):
                if self.metric[i][j] is not self.metric[j][i]:
                    raise ValueError("metric components must be symmetric")
        for row in self.metric:
            for comp in row:
                if not _is_expr(comp):
                    continue
                if any(k >= n for k in ex.coordinates_used(comp)):
                    raise ValueError("metric references a coordinate outside the chart")
                missing = ex.parameters_used(comp) - set(self.parameters)
                if missing:
                    raise ex.UnknownIdentifier(sorted(missing)[0])

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    @classmethod
    def from_components(cls, coordinates: Sequence[str], components: Mapping,
                        parameters: Mapping[str, float] | None = None, label: str = ""):
        """Build a chart from ``{(i, j): source-or-Expr-or-callable}``; unset entries are 0."""
        coordinates = tuple(coordinates)
        parameters = dict(parameters or {})
        n = len(coordinates)
        grid = [[ex.ZERO] * n for _ in range(n)]
        seen = set()
        for (i, j), comp in components.items():
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"metric component {key} given twice")
            seen.add(key)
            if isinstance(comp, str):
                comp = ex.parse(comp, coordinates, list(parameters))
            grid[i][j] = comp
            grid[j][i] = comp
        return cls(coordinates, tuple(tuple(r) for r in grid), parameters, label)


def _is_expr(obj) -> bool:
    return isinstance(obj, (ex.Const, ex.Coord, ex.Param, ex.Neg, ex.Add, ex.Sub,
                            ex.Mul, ex.Div, ex.Pow, ex.Func))


def component_jet(comp: Component, point, parameters, lay: jets.JetLayout) -> np.ndarray:
    if _is_expr(comp):
        return ex.eval_jet_array(comp, point, parameters, lay)
    return np.asarray(comp(point, lay), dtype=float)


def component_value(comp: Component, point, parameters) -> float:
    if _is_expr(comp):
        return ex.evaluate(comp, point, parameters)
    lay = jets.layout(len(point), 0)
    return float(np.asarray(comp(point, lay))[0])


# ---------------------------------------------------------------------------
# tensors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Tensor:
    """Jet-valued tensor; ``variance[k]`` is ``'u'`` or ``'d'`` for slot ``k``."""

    variance: tuple
    data: np.ndarray
    order: int

    def __post_init__(self):
        if self.data.ndim != len(self.variance) + 1:
            raise ValueError("data rank does not match the number of slots")
        if any(v not in ("u", "d") for v in self.variance):
            raise ValueError("variance entries must be 'u' or 'd'")

    @property
    def n(self) -> int:
        return self.data.shape[0] if self.variance else self.layout_nvars

    @property
    def layout_nvars(self) -> int:
        # order and coefficient count determine nvars only with a known n; the
        # coefficient axis alone is ambiguous for rank-0 tensors
        for nv in range(1, 64):
            if jets.ncoef(nv, self.order) == self.data.shape[-1]:
                return nv
        raise ValueError("cannot infer the number of variables")

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def value(self) -> np.ndarray:
        return self.data[..., 0]

    def truncated(self, order: int) -> "Tensor":
        if order > self.order:
            raise JetOrderExhausted(f"tensor only known to order {self.order}, need {order}")
        n = self.data.shape[0] if self.variance else self.layout_nvars
        return Tensor(self.variance, self.data[..., : jets.ncoef(n, order)], order)


def _letters(k: int, skip: str = "") -> str:
    pool = [c for c in string.ascii_lowercase if c not in skip and c != "z"]
    return "".join(pool[:k])


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------

def metric_at(chart: ChartSpec, point: Sequence[float], order: int) -> Tensor:
    n = chart.dimension
    point = [float(x) for x in point]
    if len(point) != n:
        raise ValueError(f"point has {len(point)} coordinates, chart has {n}")
    lay = jets.layout(n, order)
    data = np.zeros((n, n, lay.size))
    cache = {}
    for i in range(n):
        for j in range(i, n):
            comp = chart.metric[i][j]
            key = id(comp)
            if key not in cache:
                cache[key] = component_jet(comp, point, chart.parameters, lay)
            data[i, j] = data[j, i] = cache[key]
    _check_nondegenerate(data[..., 0])
    return Tensor(("d", "d"), data, order)


def _check_nondegenerate(g0: np.ndarray) -> None:
    n = g0.shape[0]
    scale = np.max(np.abs(g0))
    if scale == 0 or abs(np.linalg.det(g0)) < DEGENERACY_TOL * scale ** n:
        raise DegenerateMetric("metric is degenerate at the point")


def inverse_metric(g: Tensor) -> Tensor:
    """Jet inverse by the Neumann fixed point ``X = g0^-1 - g0^-1 N X``."""
    n = g.data.shape[0]
    lay = jets.layout(n, g.order)
    g0inv = np.linalg.inv(g.data[..., 0])
    nil = g.data.copy()
    nil[..., 0] = 0.0
    base = jets.constant(g0inv, lay)
    left = np.einsum("ab,bcz->acz", g0inv, nil)
    x = base
    for _ in range(g.order):
        x = base - jets.einsum("ab,bc->ac", left, x, lay)
    x = 0.5 * (x + np.swapaxes(x, 0, 1))
    return Tensor(("u", "u"), x, g.order)


def signature(chart: ChartSpec, point: Sequence[float]) -> tuple[int, int]:
    g = metric_at(chart, point, 0).value
    ev = np.linalg.eigvalsh(g)
    return int(np.sum(ev > 0)), int(np.sum(ev < 0))


# ---------------------------------------------------------------------------
# connection and curvature
# ---------------------------------------------------------------------------

def christoffel_from_metric(g: Tensor, ginv: Tensor) -> Tensor:
    if g.order < 1:
        raise JetOrderExhausted("Christoffel symbols need metric jets of order >= 1")
    n = g.data.shape[0]
    lay = jets.layout(n, g.order)
    out_lay = jets.layout(n, g.order - 1)
    dg = jets.gradient(g.data, lay)  # dg[c, a, b] = d_c g_ab
    # low[d,b,c] = 1/2 (d_b g_dc + d_c g_db - d_d g_bc)
    low = 0.5 * (np.einsum("bdcz->dbcz", dg) + np.einsum("cdbz->dbcz", dg)
                 - np.einsum("dbcz->dbcz", dg))
    gam = jets.einsum("ad,dbc->abc", ginv.data[..., : out_lay.size], low, out_lay)
    return Tensor(("u", "d", "d"), gam, g.order - 1)


def christoffel(chart: ChartSpec, point: Sequence[float], order: int) -> Tensor:
    """Christoffel symbols as jets of order ``order - 1`` (metric jets of ``order``)."""
    if order < 1:
        raise JetOrderExhausted("Christoffel symbols need metric jets of order >= 1")
    g = metric_at(chart, point, order)
    return christoffel_from_metric(g, inverse_metric(g))


def riemann_from_christoffel(gam: Tensor) -> Tensor:
    """``R^a_{bcd}`` as jets of order ``gam.order - 1``."""
    if gam.order < 1:
        raise JetOrderExhausted("curvature needs Christoffel jets of order >= 1")
    n = gam.data.shape[0]
    lay = jets.layout(n, gam.order)
    out_lay = jets.layout(n, gam.order - 1)
    dgam = jets.gradient(gam.data, lay)  # dgam[c, a, d, b] = d_c G^a_{db}
    g_t = gam.data[..., : out_lay.size]
    part = np.einsum("cadbz->abcdz", dgam)
    part = part + jets.einsum("ace,edb->abcd", g_t, g_t, out_lay)
    return Tensor(("u", "d", "d", "d"), part - np.swapaxes(part, 2, 3), gam.order - 1)


def covariant_derivative(T: Tensor, gam: Tensor) -> Tensor:
    """``nabla T`` with the new derivative slot in front; consumes one jet order."""
    if T.order < 1:
        raise JetOrderExhausted("jet order exhausted: cannot take another covariant derivative")
    n = gam.data.shape[0]
    lay_in = jets.layout(n, T.order)
    lay_out = jets.layout(n, T.order - 1)
    if gam.order < T.order - 1:
        raise JetOrderExhausted("Christoffel jets too short for this derivative")
    out = np.stack([jets.partial(T.data, i, lay_in) for i in range(n)])
    G = gam.data[..., : lay_out.size]
    Tt = T.data[..., : lay_out.size]
    targets = lay_out.mul_targets
    for p in range(lay_out.size):
        Gp = G[..., p]
        if not Gp.any():
            continue
        t = targets[p]
        Tp = Tt[..., : len(t)]
        for k, var in enumerate(T.variance):
            if var == "d":
                c = np.tensordot(Gp, Tp, axes=([0], [k]))
                c = np.moveaxis(c, 1, 1 + k)
                out[..., t] -= c
            else:
                c = np.tensordot(Gp, Tp, axes=([2], [k]))
                c = np.moveaxis(c, 0, 1 + k)
                out[..., t] += c
    return Tensor(("d",) + T.variance, out, T.order - 1)


def nabla_chain(T: Tensor, gam: Tensor, k_max: int) -> list[Tensor]:
    chain = [T]
    for _ in range(k_max):
        chain.append(covariant_derivative(chain[-1], gam))
    return chain


def scalar_gradient(S: Tensor) -> Tensor:
    n = S.layout_nvars
    lay = jets.layout(n, S.order)
    return Tensor(("d",), jets.gradient(S.data, lay), S.order - 1)


def scalar_chain(S: Tensor, gam: Tensor, k_max: int) -> list[Tensor]:
    chain = [S]
    if k_max >= 1:
        chain.append(scalar_gradient(S))
        for _ in range(k_max - 1):
            chain.append(covariant_derivative(chain[-1], gam))
    return chain


@dataclass(eq=False)
class CurvatureBundle:
    chart: ChartSpec
    point: tuple
    metric: Tensor
    metric_inv: Tensor
    christoffel: Tensor
    riemann_up: Tensor
    riemann: Tensor
    ricci: Tensor
    scalar: Tensor
    weyl: Tensor
    nabla: list
    orders: dict

    @property
    def n(self) -> int:
        return self.chart.dimension

    def nabla_riemann(self, k: int) -> Tensor:
        if k >= len(self.nabla):
            raise JetOrderExhausted(f"bundle holds nabla^k R only up to k={len(self.nabla) - 1}")
        return self.nabla[k]


def ricci_from_riemann(Rup: Tensor) -> Tensor:
    return Tensor(("d", "d"), np.einsum("abadz->bdz", Rup.data), Rup.order)


def lower_riemann(Rup: Tensor, g: Tensor) -> Tensor:
    n = Rup.data.shape[0]
    lay = jets.layout(n, Rup.order)
    data = jets.einsum("ae,ebcd->abcd", g.data[..., : lay.size], Rup.data, lay)
    return Tensor(("d",) * 4, data, Rup.order)


def scalar_from_ricci(Ric: Tensor, ginv: Tensor) -> Tensor:
    n = Ric.data.shape[0]
    lay = jets.layout(n, Ric.order)
    return Tensor((), jets.einsum("bd,bd->", ginv.data[..., : lay.size], Ric.data, lay),
                  Ric.order)


def weyl_tensor(R: Tensor, Ric: Tensor, S: Tensor, g: Tensor) -> Tensor:
    """Standard Weyl decomposition; identically zero in dimension 2."""
    n = R.data.shape[0]
    if n < 3:
        return Tensor(("d",) * 4, np.zeros_like(R.data), R.order)
    lay = jets.layout(n, R.order)
    gt = g.data[..., : lay.size]
    gR = jets.einsum("ac,bd->abcd", gt, Ric.data, lay)
    # g_ac R_bd - g_ad R_bc - g_bc R_ad + g_bd R_ac
    kul_gr = (gR - np.swapaxes(gR, 2, 3) - np.swapaxes(gR, 0, 1)
              + np.swapaxes(np.swapaxes(gR, 0, 1), 2, 3))
    gg = jets.einsum("ac,bd->abcd", gt, gt, lay)
    gg = gg - np.swapaxes(gg, 2, 3)
    ggS = jets.mul(gg, S.data, lay)
    data = R.data - kul_gr / (n - 2) + ggS / ((n - 1) * (n - 2))
    return Tensor(("d",) * 4, data, R.order)


def curvature_bundle(chart: ChartSpec, point: Sequence[float], k_max: int = 0,
                     extra_order: int = 0) -> CurvatureBundle:
    """All curvature objects at ``point`` with ``nabla^k R`` for ``k <= k_max``.

    ``extra_order`` keeps that many additional jet orders on every object,
    for callers that differentiate bundle quantities further.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    K = k_max + 2 + extra_order
    g = metric_at(chart, point, K)
    ginv = inverse_metric(g)
    gam = christoffel_from_metric(g, ginv)
    Rup = riemann_from_christoffel(gam)
    R = lower_riemann(Rup, g)
    Ric = ricci_from_riemann(Rup)
    S = scalar_from_ricci(Ric, ginv)
    C = weyl_tensor(R, Ric, S, g)
    chain = nabla_chain(R, gam, k_max)
    orders = {"metric": K, "christoffel": K - 1, "riemann": K - 2}
    orders.update({f"nabla{k}": K - 2 - k for k in range(1, k_max + 1)})
    return CurvatureBundle(chart, tuple(float(x) for x in point), g, ginv, gam, Rup, R,
                           Ric, S, C, chain, orders)


# ---------------------------------------------------------------------------
# index algebra
# ---------------------------------------------------------------------------

def _apply_matrix(M: np.ndarray, T: Tensor, slot: int, lay: jets.JetLayout) -> np.ndarray:
    r = T.rank
    idx = _letters(r + 1)
    t_sub = idx[:r]
    new = idx[r]
    out_sub = t_sub[:slot] + new + t_sub[slot + 1:]
    return jets.einsum(f"{new}{t_sub[slot]},{t_sub}->{out_sub}", M, T.data, lay)


def _check_slot(T: Tensor, slot: int) -> None:
    if not 0 <= slot < T.rank:
        raise SlotError(f"slot {slot} out of range for rank-{T.rank} tensor")


def raise_index(T: Tensor, slot: int, ginv: Tensor) -> Tensor:
    _check_slot(T, slot)
    if T.variance[slot] != "d":
        raise SlotError(f"slot {slot} is already contravariant")
    n = T.data.shape[0]
    lay = jets.layout(n, T.order)
    data = _apply_matrix(ginv.data[..., : lay.size], T, slot, lay)
    var = T.variance[:slot] + ("u",) + T.variance[slot + 1:]
    return Tensor(var, data, T.order)


def lower_index(T: Tensor, slot: int, g: Tensor) -> Tensor:
    _check_slot(T, slot)
    if T.variance[slot] != "u":
        raise SlotError(f"slot {slot} is already covariant")
    n = T.data.shape[0]
    lay = jets.layout(n, T.order)
    data = _apply_matrix(g.data[..., : lay.size], T, slot, lay)
    var = T.variance[:slot] + ("d",) + T.variance[slot + 1:]
    return Tensor(var, data, T.order)


def contract(T: Tensor, s1: int, s2: int, g: Tensor | None = None,
             ginv: Tensor | None = None) -> Tensor:
    _check_slot(T, s1)
    _check_slot(T, s2)
    if s1 == s2:
        raise SlotError("cannot contract a slot with itself")
    v1, v2 = T.variance[s1], T.variance[s2]
    if v1 == v2:
        metric = ginv if v1 == "d" else g
        if metric is None:
            raise SlotError("contracting two slots of equal variance needs the metric")
        T = raise_index(T, s1, metric) if v1 == "d" else lower_index(T, s1, metric)
    idx = list(_letters(T.rank))
    idx[s2] = idx[s1]
    keep = [c for k, c in enumerate(idx) if k not in (s1, s2)]
    data = np.einsum("".join(idx) + "z->" + "".join(keep) + "z", T.data)
    var = tuple(v for k, v in enumerate(T.variance) if k not in (s1, s2))
    return Tensor(var, data, T.order)


def tensor_product(A: Tensor, B: Tensor) -> Tensor:
    order = min(A.order, B.order)
    n = A.data.shape[0] if A.rank else B.data.shape[0]
    lay = jets.layout(n, order)
    ia = _letters(A.rank)
    ib = _letters(A.rank + B.rank)[A.rank:]
    data = jets.einsum(f"{ia},{ib}->{ia}{ib}", A.data[..., : lay.size], B.data[..., : lay.size], lay)
    return Tensor(A.variance + B.variance, data, order)


def full_contraction(T: Tensor, g: Tensor, ginv: Tensor) -> np.ndarray:
    """Jet of ``g(T, T)``: every slot of one copy is moved and contracted."""
    n = g.data.shape[0]
    lay = jets.layout(n, T.order)
    other = T
    for k, var in enumerate(T.variance):
        other = raise_index(other, k, ginv) if var == "d" else lower_index(other, k, g)
    sub = _letters(T.rank)
    if T.rank == 0:
        return jets.mul(T.data, T.data, lay)
    return jets.einsum(f"{sub},{sub}->", T.data, other.data, lay)


def full_contraction_norm(T: Tensor, g: Tensor, ginv: Tensor) -> float:
    """``g(T, T)`` at the point (may be negative or zero in indefinite signature)."""
    return float(full_contraction(T, g, ginv)[0])


def abs_contraction(T: Tensor, g: Tensor, ginv: Tensor) -> float:
    """Magnitude scale for ``g(T, T)``: the same sum with every term made positive."""
    a = np.abs(T.value)
    gi = np.abs(ginv.value)
    gl = np.abs(g.value)
    other = a
    for k, var in enumerate(T.variance):
        m = gi if var == "d" else gl
        other = np.moveaxis(np.tensordot(m, other, axes=([1], [k])), 0, k)
    return float(np.sum(a * other)) if T.rank else float(a * a)


# ---------------------------------------------------------------------------
# finite-difference oracle (independent check of the jet pipeline)
# ---------------------------------------------------------------------------

def _metric_values(chart: ChartSpec, point) -> np.ndarray:
    n = chart.dimension
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = component_value(chart.metric[i][j], point, chart.parameters)
    return g


def fd_oracle_curvature(chart: ChartSpec, point: Sequence[float], step: float = 1e-3) -> Tensor:
    """``R_{abcd}`` from second-order central differences of the metric values."""
    n = chart.dimension
    x = np.asarray(point, dtype=float)
    h = float(step)
    e = np.eye(n) * h

    g0 = _metric_values(chart, x)
    dg = np.empty((n, n, n))  # dg[c] = d_c g
    ddg = np.empty((n, n, n, n))  # ddg[c, d] = d_c d_d g
    plus = [_metric_values(chart, x + e[c]) for c in range(n)]
    minus = [_metric_values(chart, x - e[c]) for c in range(n)]
    for c in range(n):
        dg[c] = (plus[c] - minus[c]) / (2 * h)
        ddg[c, c] = (plus[c] - 2 * g0 + minus[c]) / h ** 2
    for c, d in itertools.combinations(range(n), 2):
        pp = _metric_values(chart, x + e[c] + e[d])
        pm = _metric_values(chart, x + e[c] - e[d])
        mp = _metric_values(chart, x - e[c] + e[d])
        mm = _metric_values(chart, x - e[c] - e[d])
        ddg[c, d] = ddg[d, c] = (pp - pm - mp + mm) / (4 * h * h)

    ginv = np.linalg.inv(g0)
    # first-kind symbols and their derivatives
    low = 0.5 * (np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - dg)
    dlow = 0.5 * (np.einsum("ebdc->edbc", ddg) + np.einsum("ecdb->edbc", ddg)
                  - ddg)  # dlow[e, d, b, c] = d_e low[d, b, c]
    gam = np.einsum("ad,dbc->abc", ginv, low)
    dginv = -np.einsum("ap,epq,qb->eab", ginv, dg, ginv)
    dgam = np.einsum("ead,dbc->eabc", dginv, low) + np.einsum("ad,edbc->eabc", ginv, dlow)
    part = np.einsum("cadb->abcd", dgam) + np.einsum("ace,edb->abcd", gam, gam)
    rup = part - np.swapaxes(part, 2, 3)
    R = np.einsum("ae,ebcd->abcd", g0, rup)
    return Tensor(("d",) * 4, R[..., None], 0)


def second_bianchi_residual(bundle: CurvatureBundle) -> float:
    """Relative size of ``nabla_[l R_ab]cd`` (cyclic sum over the first three slots)."""
    dR = bundle.nabla_riemann(1).value
    cyc = dR + np.transpose(dR, (1, 2, 0, 3, 4)) + np.transpose(dR, (2, 0, 1, 3, 4))
    scale = max(np.linalg.norm(dR), np.linalg.norm(bundle.riemann.value) ** 1.5)
    return float(np.linalg.norm(cyc) / scale) if scale > 0 else 0.0
