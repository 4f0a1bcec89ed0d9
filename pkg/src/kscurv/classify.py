"""Pointwise algebraic classification of the curvature tensor.

The space ``L`` of one-forms with ``w_[c R_ab]lm = 0`` has dimension 0, 1 or
2 at a non-flat point, giving Type 0, I or II.  Sub-types come from the
causal character of ``L`` under the inverse metric.  Also here: the ``Q``
decomposition ``R_{ablm} = 4 w_[a Q_b][l w_m]``, the contraction identities
that Type I/II curvature must satisfy, the Gauss-Bonnet scalar, the generic
point test on 2-forms and a constant-curvature fit.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo

RANK_CUTOFF = 1e-8
NULL_CUTOFF = 1e-8
FLAT_CUTOFF = 1e-12
DEFAULT_TOL = 1e-9
GENERIC_COND_MAX = 1e10


class ClassificationError(RuntimeError):
    """Computed L-space contradicts the dimension bound (dim L <= 2 when R != 0)."""


class FlatPoint(ValueError):
    pass


@dataclass
class LSpaceResult:
    point: tuple
    dimension: int
    basis: np.ndarray  # (n, dim) columns are one-forms, g-orthogonal when dim = 2
    gram: np.ndarray
    singular_values: np.ndarray
    flat: bool = False

    @property
    def anomalous(self) -> bool:
        return not self.flat and self.dimension > 2


@dataclass
class TypeLabel:
    name: str
    family: str
    eps: tuple = ()
    rank_cutoff: float = RANK_CUTOFF
    null_cutoff: float = NULL_CUTOFF

    def __str__(self):
        return self.name


@dataclass
class QDecomposition:
    omega: np.ndarray
    xbar: np.ndarray
    Q: np.ndarray
    residual: float
    rho: np.ndarray | None = None
    A: float | None = None
    tau: np.ndarray | None = None


@dataclass
class GenericPointReport:
    matrix: np.ndarray
    condition: float
    generic: bool
    inverse_residual: float | None


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _norm(x) -> float:
    return float(np.linalg.norm(x))


def _rel(diff, *terms, floor: float = 0.0) -> float:
    scale = max(max((_norm(t) for t in terms), default=0.0), floor)
    d = _norm(diff)
    if scale == 0:
        return 0.0 if d == 0 else np.inf
    return d / scale


def is_flat(bundle: geo.CurvatureBundle) -> bool:
    return _norm(bundle.riemann.value) <= FLAT_CUTOFF * max(1.0, _norm(bundle.metric.value))


def wedge_condition(omega: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``w_[c R_ab]lm`` (antisymmetrization over the first three slots)."""
    t = np.multiply.outer(omega, R)  # [c, a, b, l, m]
    return (t + np.transpose(t, (1, 2, 0, 3, 4)) + np.transpose(t, (2, 0, 1, 3, 4))) / 3.0


def assemble(omega: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """``4 w_[a Q_b][l w_m]``."""
    t = np.einsum("a,bl,m->ablm", omega, Q, omega)
    return t - np.swapaxes(t, 0, 1) - np.swapaxes(t, 2, 3) + np.swapaxes(np.swapaxes(t, 0, 1), 2, 3)


def two_form(omega, rho) -> np.ndarray:
    return np.multiply.outer(omega, rho) - np.multiply.outer(rho, omega)


# ---------------------------------------------------------------------------
# L and the type label
# ---------------------------------------------------------------------------

def l_space(bundle: geo.CurvatureBundle) -> LSpaceResult:
    R = bundle.riemann.value
    n = R.shape[0]
    ginv = bundle.metric_inv.value
    if is_flat(bundle):
        return LSpaceResult(bundle.point, n, np.eye(n), ginv.copy(), np.zeros(n), flat=True)
    eye = np.eye(n)
    cols = [wedge_condition(eye[c], R).ravel() for c in range(n)]
    M = np.stack(cols, axis=1)
    _, sv, vt = np.linalg.svd(M, full_matrices=True)
    sv_full = np.zeros(n)
    sv_full[: len(sv)] = sv
    keep = sv_full <= RANK_CUTOFF * sv_full.max()
    basis = vt[keep].T
    dim = basis.shape[1]
    gram = basis.T @ ginv @ basis
    if dim == 2:
        # rotate to a g-orthogonal pair; eigh keeps the columns unit-norm
        w, V = np.linalg.eigh(gram)
        order = np.argsort(-np.abs(w), kind="stable")
        basis = basis @ V[:, order]
        gram = basis.T @ ginv @ basis
    elif dim == 1:
        # fix the overall sign so the largest component is positive
        k = np.argmax(np.abs(basis[:, 0]))
        basis = basis * np.sign(basis[k, 0])
        gram = basis.T @ ginv @ basis
    return LSpaceResult(bundle.point, dim, basis, gram, sv_full)


def _sign(x: float) -> int:
    return 1 if x > 0 else -1


def classify_point(bundle: geo.CurvatureBundle, l: LSpaceResult) -> TypeLabel:
    if l.flat:
        return TypeLabel("flat", "flat")
    if l.dimension > 2:
        raise ClassificationError(
            f"dim L = {l.dimension} at a non-flat point {l.point}; expected at most 2")
    if l.dimension == 0:
        return TypeLabel("Type0", "0")
    if l.dimension == 1:
        w = l.basis[:, 0]
        e = float(l.gram[0, 0])
        if abs(e) < NULL_CUTOFF * float(w @ w):
            return TypeLabel("I_N", "I")
        return TypeLabel(f"I_{_sign(e)}", "I", (_sign(e),))
    ev = np.diag(l.gram)
    nonnull = [float(x) for x in ev if abs(x) >= NULL_CUTOFF]
    if len(nonnull) == 2:
        s = sorted((_sign(x) for x in nonnull), reverse=True)
        if s[0] == s[1]:
            return TypeLabel(f"II_{s[0]}", "II", tuple(s))
        return TypeLabel("II_(1,-1)", "II", tuple(s))
    if len(nonnull) == 1:
        s = _sign(nonnull[0])
        return TypeLabel(f"II_N{s}", "II", (s,))
    return TypeLabel("II_0", "II")


# ---------------------------------------------------------------------------
# Q decomposition
# ---------------------------------------------------------------------------

def extract_q(bundle: geo.CurvatureBundle, l: LSpaceResult, tol: float = DEFAULT_TOL) -> QDecomposition:
    """Recover ``Q`` (Type I) or ``A`` (Type II) and check the reconstruction.

    With ``Xbar = w/|w|^2`` (so ``w(Xbar) = 1``) the contraction
    ``-R(., Xbar, ., Xbar)`` equals ``Q`` up to the gauge
    ``Q -> Q + w (x) tau + tau (x) w``, which leaves ``R`` unchanged.
    """
    if l.flat:
        raise FlatPoint("curvature vanishes; no decomposition")
    if l.dimension not in (1, 2):
        raise ValueError(f"Q decomposition needs dim L in {{1, 2}}, got {l.dimension}")
    R = bundle.riemann.value
    ginv = bundle.metric_inv.value
    label = classify_point(bundle, l)
    if l.dimension == 1:
        w = l.basis[:, 0]
        xbar = w / float(w @ w)
        Q = -np.einsum("arbs,r,s->ab", R, xbar, xbar)
        tau = None
        if label.name != "I_N":
            wsharp = ginv @ w
            e = float(w @ wsharp)
            q = Q @ wsharp
            s = -float(wsharp @ q) / (2 * e)
            tau = -(q + s * w) / e
            Q = Q + np.multiply.outer(w, tau) + np.multiply.outer(tau, w)
        res = _rel(assemble(w, Q) - R, R)
        if res > tol:
            raise ValueError(f"Q reconstruction residual {res:.3e} exceeds {tol:g}")
        return QDecomposition(w, xbar, Q, res, tau=tau)
    w, rho = l.basis[:, 0], l.basis[:, 1]
    # null direction first when the plane is degenerate
    if abs(l.gram[0, 0]) > abs(l.gram[1, 1]):
        w, rho = rho, w
    F = two_form(w, rho)
    FF = np.multiply.outer(F, F)
    A = -float(np.tensordot(R, FF, axes=4) / np.tensordot(FF, FF, axes=4))
    res = _rel(R + A * FF, R)
    if res > tol:
        raise ValueError(f"Type II reconstruction residual {res:.3e} exceeds {tol:g}")
    xbar = w / float(w @ w)
    Q = -np.einsum("arbs,r,s->ab", R, xbar, xbar)
    return QDecomposition(w, xbar, Q, res, rho=rho, A=A)


# ---------------------------------------------------------------------------
# invariants and identities
# ---------------------------------------------------------------------------

def _raised(bundle):
    ginv = bundle.metric_inv.value
    R = bundle.riemann.value
    Rup = np.einsum("ap,bq,lr,ms,pqrs->ablm", ginv, ginv, ginv, ginv, R)
    Ric = bundle.ricci.value
    Ricup = ginv @ Ric @ ginv
    return R, Rup, Ric, Ricup, float(bundle.scalar.value)


def gauss_bonnet(bundle: geo.CurvatureBundle) -> float:
    """``|Riem|^2 - 4 |Ric|^2 + S^2``."""
    R, Rup, Ric, Ricup, S = _raised(bundle)
    return float(np.tensordot(Rup, R, axes=4) - 4 * np.tensordot(Ricup, Ric, axes=2) + S * S)


def gauss_bonnet_scale(bundle: geo.CurvatureBundle) -> float:
    """Sum of the magnitudes of every product entering the Gauss-Bonnet scalar."""
    R, Rup, Ric, Ricup, S = _raised(bundle)
    return float(np.sum(np.abs(Rup * R)) + 4 * np.sum(np.abs(Ricup * Ric)) + S * S)


def identity_suite(bundle: geo.CurvatureBundle, l: LSpaceResult, label: TypeLabel) -> dict:
    """Relative residuals of the contraction identities implied by the type."""
    if label.family not in ("I", "II"):
        return {}
    R, Rup, Ric, Ricup, S = _raised(bundle)
    g, ginv = bundle.metric.value, bundle.metric_inv.value
    out = {}
    nR = _norm(R)
    for k in range(l.dimension):
        w = l.basis[:, k]
        ws = ginv @ w
        lhs = np.einsum("r,rabl->abl", ws, R)
        rhs = np.einsum("al,b->abl", Ric, w) - np.einsum("ab,l->abl", Ric, w)
        out[f"contracted_bianchi[{k}]"] = _rel(lhs - rhs, lhs, rhs, floor=nR * _norm(ws))
        lhs = ws @ Ric
        out[f"ricci_eigen[{k}]"] = _rel(lhs - 0.5 * S * w, lhs, 0.5 * S * w, floor=nR * _norm(ws))
    out["gauss_bonnet"] = abs(gauss_bonnet(bundle)) / max(gauss_bonnet_scale(bundle), 1e-300)
    Ricmix = Ric @ ginv  # R_a^r
    rr = Ricmix @ Ric  # R_ar R^r_b
    ricsq = float(np.tensordot(Ricup, Ric, axes=2))
    rsq = float(np.tensordot(Rup, R, axes=4))
    ric_scale = float(np.sum(np.abs(Ricup * Ric)))
    r_scale = float(np.sum(np.abs(Rup * R)))
    name = label.name
    if name.startswith("II_") and label.eps and len(label.eps) == 2:
        rr_ = np.einsum("al,bm->ablm", Ric, Ric) - np.einsum("am,bl->ablm", Ric, Ric)
        out["A11"] = _rel(0.5 * S * R - rr_, 0.5 * S * R, rr_, floor=nR ** 2)
        up = ginv @ Ric  # R^a_b
        out["A12"] = _rel(up @ up - 0.5 * S * up, up @ up, 0.5 * S * up)
        out["A13"] = abs(ricsq - 0.5 * S * S) / max(ric_scale, 0.5 * S * S, 1e-300)
        rr4 = np.einsum("abrs,rslm->ablm", R, np.einsum("rp,sq,pqlm->rslm", ginv, ginv, R))
        out["A14"] = _rel(rr4 - S * R, rr4, S * R)
        out["A15"] = abs(rsq - S * S) / max(r_scale, S * S, 1e-300)
        out["scalar_nonzero"] = float(abs(S))
    elif name.startswith("II_N"):
        dec = extract_q(bundle, l, tol=np.inf)
        w = dec.omega
        # Ric = -A g(rho, rho) w (x) w; equals -eps A w (x) w once rho is normalized
        target = -dec.A * float(dec.rho @ ginv @ dec.rho) * np.multiply.outer(w, w)
        out["scalar"] = abs(S) / max(float(np.sum(np.abs(ginv * Ric))), 1e-300)
        out["ricci_form"] = _rel(Ric - target, Ric, target, floor=nR)
        out["ricci_square"] = _rel(rr, np.abs(Ricmix) @ np.abs(Ric), floor=nR ** 2)
        out["ricci_norm"] = abs(ricsq) / max(ric_scale, 1e-300)
        out["riemann_norm"] = abs(rsq) / max(r_scale, 1e-300)
    elif name == "II_0":
        out["ricci"] = _rel(Ric, R)
        out["weyl"] = _rel(R - bundle.weyl.value, R)
        Rmix = np.einsum("rp,pmns->rmns", ginv, R)
        prod = np.einsum("ablr,rmns->ablmns", R, Rmix)
        sc = np.einsum("ablr,rmns->ablmns", np.abs(R), np.abs(Rmix))
        out["riemann_square"] = _rel(prod, sc)
    if name != "II_0" and _rel(Ric, R) < DEFAULT_TOL:
        out["weyl"] = _rel(R - bundle.weyl.value, R)
    # Einstein sub-case
    lam = np.tensordot(Ric, g, axes=2) / np.tensordot(g, g, axes=2)
    if bundle.n > 2 and _norm(Ric) > 0 and _rel(Ric - lam * g, Ric) < DEFAULT_TOL:
        out["einstein_scalar"] = abs(S) / max(float(np.sum(np.abs(ginv * Ric))), 1e-300)
        out["einstein_riemann_norm"] = abs(rsq) / max(r_scale, 1e-300)
    return out


# ---------------------------------------------------------------------------
# generic points and constant curvature
# ---------------------------------------------------------------------------

def pair_indices(n: int) -> list:
    return list(itertools.combinations(range(n), 2))


def curvature_operator(bundle: geo.CurvatureBundle) -> np.ndarray:
    """Matrix of ``W_lm -> R^{ab}_{lm} W_ab`` on 2-forms, in the basis ``a < b``."""
    ginv = bundle.metric_inv.value
    Rmix = np.einsum("ap,bq,pqlm->ablm", ginv, ginv, bundle.riemann.value)
    pairs = pair_indices(ginv.shape[0])
    # W_ab = sum over a<b of 2 W_[ab]; the factor 2 keeps the identity exact on S^n
    return np.array([[Rmix[a, b, l, m] for (a, b) in pairs] for (l, m) in pairs])


def generic_test(bundle: geo.CurvatureBundle, tol: float = DEFAULT_TOL) -> GenericPointReport:
    """Invertibility of the curvature endomorphism on 2-forms.

    When generic, the inverse ``Rinv`` with ``R^{ab}_{rs} Rinv^{rs}_{lm} = (1/2) delta``
    is built and the contraction is re-evaluated with full index sums.
    """
    Rm = curvature_operator(bundle)
    if not np.any(Rm):
        return GenericPointReport(Rm, np.inf, False, None)
    cond = float(np.linalg.cond(Rm))
    generic = cond < GENERIC_COND_MAX
    if not generic:
        return GenericPointReport(Rm, cond, False, None)
    n = bundle.n
    pairs = pair_indices(n)
    # pair-basis inverse: full index sums double every pair contraction
    inv = 0.25 * np.linalg.inv(Rm.T)
    # expand the pair matrices to full antisymmetric 4-index arrays
    full_R = np.zeros((n,) * 4)
    full_I = np.zeros((n,) * 4)
    ginv = bundle.metric_inv.value
    Rmix = np.einsum("ap,bq,pqlm->ablm", ginv, ginv, bundle.riemann.value)
    for P, (l, m) in enumerate(pairs):
        for Qi, (a, b) in enumerate(pairs):
            v = inv[Qi, P]  # Rinv^{ab}_{lm}
            full_I[a, b, l, m] = v
            full_I[b, a, l, m] = -v
            full_I[a, b, m, l] = -v
            full_I[b, a, m, l] = v
    full_R[...] = Rmix
    prod = np.einsum("abrs,rslm->ablm", full_R, full_I)
    eye = np.eye(n)
    delta = np.einsum("al,bm->ablm", eye, eye) - np.einsum("am,bl->ablm", eye, eye)
    res = _rel(prod - 0.5 * delta, 0.5 * delta)
    return GenericPointReport(Rm, cond, True, res)


def constant_curvature_check(bundle: geo.CurvatureBundle, tol: float = DEFAULT_TOL) -> tuple:
    g = bundle.metric.value
    R = bundle.riemann.value
    G = np.einsum("al,bm->ablm", g, g) - np.einsum("am,bl->ablm", g, g)
    k = float(np.tensordot(R, G, axes=4) / np.tensordot(G, G, axes=4))
    res = _norm(R - k * G)
    scale = max(_norm(R), 1e-300)
    fits = res / scale < tol if _norm(R) > 0 else True
    return bool(fits), k


# ---------------------------------------------------------------------------
# per-point driver
# ---------------------------------------------------------------------------

@dataclass
class PointClassification:
    point: tuple
    l: LSpaceResult
    label: TypeLabel
    scalar: float
    ricci_rank: int
    gauss_bonnet: float
    identities: dict = field(default_factory=dict)
    decomposition: QDecomposition | None = None


def classify_bundle(bundle: geo.CurvatureBundle, tol: float = DEFAULT_TOL) -> PointClassification:
    l = l_space(bundle)
    label = classify_point(bundle, l)
    Ric = bundle.ricci.value
    sv = np.linalg.svd(Ric, compute_uv=False)
    rank = int(np.sum(sv > RANK_CUTOFF * max(sv.max(), 1e-300))) if sv.max() > 0 else 0
    ids = identity_suite(bundle, l, label)
    dec = extract_q(bundle, l, tol=np.inf) if label.family in ("I", "II") else None
    return PointClassification(bundle.point, l, label, float(bundle.scalar.value), rank,
                               gauss_bonnet(bundle), ids, dec)


def classify_points(chart: geo.ChartSpec, points, tol: float = DEFAULT_TOL) -> tuple:
    """Classify each point; the second value is True when all labels agree."""
    results = [classify_bundle(geo.curvature_bundle(chart, p, k_max=0), tol) for p in points]
    labels = Counter(r.label.name for r in results)
    return results, len(labels) <= 1
