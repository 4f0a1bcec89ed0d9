"""Dense truncated multivariate Taylor series ("jets").

A jet of order ``K`` in ``nvars`` variables stores the Taylor coefficients
``d^alpha f / alpha!`` for every multi-index ``alpha`` with ``|alpha| <= K``.
Coefficients are laid out by total degree, lexicographically inside each
degree, so the coefficients of a lower-order truncation are always a prefix
of the higher-order array.  Every array-level routine in this module works on
the *last* axis and broadcasts over leading axes, which is how tensor-valued
jets are handled elsewhere in the package.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 10

UNIVARIATE = ("sin", "cos", "exp", "log", "sqrt", "sinh", "cosh")


class DomainError(ArithmeticError):
    """A jet operation left the domain of the function being expanded."""


class ShapeMismatch(ValueError):
    pass


class JetLayout:
    """Index bookkeeping for jets with fixed ``nvars`` and ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise ValueError("nvars must be >= 1")
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in [0, {MAX_ORDER}], got {order}")
        self.nvars = nvars
        self.order = order
        exps = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                e = [0] * nvars
                for v in combo:
                    e[v] += 1
                exps.append(tuple(e))
        self.exponents = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
        self.index = {e: i for i, e in enumerate(exps)}
        self.size = len(exps)
        self.degrees = self.exponents.sum(axis=1)
        # prefix[m] = number of coefficients of total degree <= m
        self.prefix = [math.comb(nvars + m, m) for m in range(order + 1)]
        self.factorials = np.array(
            [math.prod(math.factorial(int(k)) for k in e) for e in exps], dtype=float
        )
        self._targets = None

    @property
    def mul_targets(self) -> list[np.ndarray]:
        """``mul_targets[p][q]`` is the index of ``alpha_p + alpha_q``."""
        if self._targets is None:
            targets = []
            for p, ep in enumerate(self.exponents):
                m = self.prefix[self.order - self.degrees[p]]
                tgt = [self.index[tuple(ep + eq)] for eq in self.exponents[:m]]
                targets.append(np.array(tgt, dtype=np.int64))
            self._targets = targets
        return self._targets

    @functools.lru_cache(maxsize=None)
    def partial_map(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        """Source indices and factors producing the ``d/dx_var`` jet of order K-1."""
        if self.order < 1:
            raise ValueError("cannot differentiate a jet of order 0")
        lower = layout(self.nvars, self.order - 1)
        src = np.empty(lower.size, dtype=np.int64)
        fac = np.empty(lower.size)
        for i, e in enumerate(lower.exponents):
            shifted = e.copy()
            shifted[var] += 1
            src[i] = self.index[tuple(shifted)]
            fac[i] = shifted[var]
        return src, fac


@functools.lru_cache(maxsize=None)
def layout(nvars: int, order: int) -> JetLayout:
    return JetLayout(nvars, order)


def ncoef(nvars: int, order: int) -> int:
    return math.comb(nvars + order, order)


def order_of(size: int, nvars: int) -> int:
    for k in range(MAX_ORDER + 1):
        if ncoef(nvars, k) == size:
            return k
    raise ShapeMismatch(f"{size} coefficients is not a complete jet in {nvars} variables")


# ---------------------------------------------------------------------------
# array-level kernels (coefficient axis last)
# ---------------------------------------------------------------------------

def truncate(a: np.ndarray, lay: JetLayout) -> np.ndarray:
    return a[..., : lay.size]


def constant(value, lay: JetLayout) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    out = np.zeros(value.shape + (lay.size,))
    out[..., 0] = value
    return out


def variable(var: int, value: float, lay: JetLayout) -> np.ndarray:
    out = np.zeros(lay.size)
    out[0] = value
    if lay.order >= 1:
        out[1 + var] = 1.0
    return out


def mul(a: np.ndarray, b: np.ndarray, lay: JetLayout) -> np.ndarray:
    """Truncated Cauchy product, broadcasting over leading axes."""
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (lay.size,)
    out = np.zeros(shape)
    targets = lay.mul_targets
    for p in range(lay.size):
        ap = a[..., p]
        if not np.any(ap):
            continue
        t = targets[p]
        out[..., t] += ap[..., None] * b[..., : len(t)]
    return out


def _nilpotent(a: np.ndarray) -> np.ndarray:
    h = a.copy()
    h[..., 0] = 0.0
    return h


def _horner(coefs: np.ndarray, h: np.ndarray, lay: JetLayout) -> np.ndarray:
    """Evaluate ``sum_k coefs[..., k] h^k`` with ``h`` nilpotent."""
    K = coefs.shape[-1] - 1
    out = constant(coefs[..., K], lay)
    for k in range(K - 1, -1, -1):
        out = mul(out, h, lay)
        out[..., 0] += coefs[..., k]
    return out


def reciprocal(b: np.ndarray, lay: JetLayout) -> np.ndarray:
    b0 = b[..., 0]
    if np.any(b0 == 0.0):
        raise DomainError("division by a jet with zero constant term")
    K = lay.order
    k = np.arange(K + 1)
    coefs = ((-1.0) ** k) / b0[..., None] ** (k + 1)
    return _horner(coefs, _nilpotent(b), lay)


def div(a: np.ndarray, b: np.ndarray, lay: JetLayout) -> np.ndarray:
    return mul(a, reciprocal(b, lay), lay)


def power(a: np.ndarray, k: int, lay: JetLayout) -> np.ndarray:
    """Integer power by repeated squaring (valid at zero base for k >= 0)."""
    if k < 0:
        return power(reciprocal(a, lay), -k, lay)
    result = constant(np.ones(a.shape[:-1]), lay)
    base = a
    while k:
        if k & 1:
            result = mul(result, base, lay)
        k >>= 1
        if k:
            base = mul(base, base, lay)
    return result


def taylor_coefficients(fname: str, x0: np.ndarray, K: int) -> np.ndarray:
    """``f^(k)(x0)/k!`` for k = 0..K, stacked on a new last axis."""
    x0 = np.asarray(x0, dtype=float)
    k = np.arange(K + 1)
    fact = np.array([math.factorial(int(i)) for i in k], dtype=float)
    if fname == "exp":
        return np.exp(x0)[..., None] / fact
    if fname in ("sin", "cos"):
        s, c = np.sin(x0)[..., None], np.cos(x0)[..., None]
        shift = 0 if fname == "sin" else 1
        cycle = np.stack([s, c, -s, -c], axis=-1)[..., 0, :]
        return cycle[..., (k + shift) % 4] / fact
    if fname in ("sinh", "cosh"):
        sh, ch = np.sinh(x0)[..., None], np.cosh(x0)[..., None]
        even, odd = (sh, ch) if fname == "sinh" else (ch, sh)
        return np.where(k % 2 == 0, even, odd) / fact
    if fname == "log":
        if np.any(x0 <= 0):
            raise DomainError("log of a non-positive value")
        out = np.empty(x0.shape + (K + 1,))
        out[..., 0] = np.log(x0)
        kk = k[1:]
        out[..., 1:] = ((-1.0) ** (kk - 1)) / (kk * x0[..., None] ** kk)
        return out
    if fname == "sqrt":
        if np.any(x0 < 0) or (K > 0 and np.any(x0 == 0)):
            raise DomainError("sqrt outside its (differentiable) domain")
        binom = np.ones(K + 1)
        for i in range(1, K + 1):
            binom[i] = binom[i - 1] * (0.5 - (i - 1)) / i
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.sqrt(x0)[..., None] * binom / x0[..., None] ** k
        if K == 0:
            out = np.sqrt(x0)[..., None]
        return out
    raise ValueError(f"unknown univariate function {fname!r}")


def compose(fname: str, a: np.ndarray, lay: JetLayout) -> np.ndarray:
    """``f(a)`` by Horner composition of the Taylor series on the nilpotent part."""
    coefs = taylor_coefficients(fname, a[..., 0], lay.order)
    return _horner(coefs, _nilpotent(a), lay)


def partial(a: np.ndarray, var: int, lay: JetLayout) -> np.ndarray:
    """Jet of order K-1 holding ``d a / d x_var``."""
    if lay.order < 1:
        raise ValueError("jet order exhausted: cannot differentiate an order-0 jet")
    src, fac = lay.partial_map(var)
    return a[..., src] * fac


def gradient(a: np.ndarray, lay: JetLayout) -> np.ndarray:
    """All first partials stacked on a new leading axis."""
    return np.stack([partial(a, i, lay) for i in range(lay.nvars)])


def derivative_values(a: np.ndarray, lay: JetLayout) -> np.ndarray:
    """Convert Taylor coefficients to plain partial derivatives ``d^alpha f``."""
    return a * lay.factorials


def einsum(subscripts: str, a: np.ndarray, b: np.ndarray, lay: JetLayout) -> np.ndarray:
    """Tensor contraction of jet-valued arrays with a truncated jet product.

    ``subscripts`` only names the tensor axes; the coefficient axis of both
    operands is handled implicitly.
    """
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    spec = f"{sa},{sb}Z->{out}Z"
    result = None
    targets = lay.mul_targets
    for p in range(lay.size):
        ap = a[..., p]
        if not np.any(ap):
            continue
        t = targets[p]
        term = np.einsum(spec, ap, b[..., : len(t)])
        if result is None:
            result = np.zeros(term.shape[:-1] + (lay.size,))
        result[..., t] += term
    if result is None:
        shape = np.einsum(f"{sa},{sb}->{out}", a[..., 0], b[..., 0]).shape
        result = np.zeros(shape + (lay.size,))
    return result


# ---------------------------------------------------------------------------
# scalar Jet value type
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Jet:
    nvars: int
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (ncoef(self.nvars, self.order),):
            raise ShapeMismatch(
                f"expected {ncoef(self.nvars, self.order)} coefficients, got {c.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    @property
    def layout(self) -> JetLayout:
        return layout(self.nvars, self.order)

    @classmethod
    def constant(cls, value: float, nvars: int, order: int) -> "Jet":
        return cls(nvars, order, constant(value, layout(nvars, order)))

    @classmethod
    def variable(cls, var: int, value: float, nvars: int, order: int) -> "Jet":
        return cls(nvars, order, variable(var, value, layout(nvars, order)))

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def coefficient(self, alpha) -> float:
        return float(self.coeffs[self.layout.index[tuple(alpha)]])

    def derivative(self, alpha) -> float:
        """Plain partial derivative ``d^alpha f`` at the expansion point."""
        return self.coefficient(alpha) * math.prod(math.factorial(k) for k in alpha)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Jet):
            if (other.nvars, other.order) != (self.nvars, self.order):
                raise ShapeMismatch(
                    f"jets differ in shape: ({self.nvars},{self.order}) vs "
                    f"({other.nvars},{other.order})"
                )
            return other.coeffs
        return constant(float(other), self.layout)

    def _new(self, c: np.ndarray) -> "Jet":
        return Jet(self.nvars, self.order, c)

    def __add__(self, other):
        return self._new(self.coeffs + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._new(self.coeffs - self._coerce(other))

    def __rsub__(self, other):
        return self._new(self._coerce(other) - self.coeffs)

    def __neg__(self):
        return self._new(-self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self._new(self.coeffs * float(other))
        return self._new(mul(self.coeffs, self._coerce(other), self.layout))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            if other == 0:
                raise DomainError("division by zero")
            return self._new(self.coeffs / float(other))
        return self._new(div(self.coeffs, self._coerce(other), self.layout))

    def __rtruediv__(self, other):
        return self._new(div(self._coerce(other), self.coeffs, self.layout))

    def __pow__(self, k: int):
        if int(k) != k:
            raise ValueError("only integer powers are supported")
        return self._new(power(self.coeffs, int(k), self.layout))

    def partial(self, var: int) -> "Jet":
        if not 0 <= var < self.nvars:
            raise IndexError(f"variable index {var} out of range")
        return Jet(self.nvars, self.order - 1, partial(self.coeffs, var, self.layout))

    def compose(self, fname: str) -> "Jet":
        return self._new(compose(fname, self.coeffs, self.layout))

    def allclose(self, other: "Jet", rtol=1e-12, atol=1e-14) -> bool:
        return np.allclose(self.coeffs, self._coerce(other), rtol=rtol, atol=atol)

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, order={self.order}, coeffs={self.coeffs!r})"


def jet_add(a: Jet, b) -> Jet:
    return a + b


def jet_sub(a: Jet, b) -> Jet:
    return a - b


def jet_scale(a: Jet, s: float) -> Jet:
    return a * float(s)


def jet_mul(a: Jet, b: Jet) -> Jet:
    return a * b


def jet_div(a: Jet, b: Jet) -> Jet:
    return a / b


def jet_compose_univariate(fname: str, a: Jet) -> Jet:
    if fname not in UNIVARIATE:
        raise ValueError(f"unsupported function {fname!r}")
    return a.compose(fname)


def jet_partial(a: Jet, var: int) -> Jet:
    return a.partial(var)
