"""Truncated Taylor jets: arithmetic, composition, partials, layout bookkeeping."""

import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kscurv import jets
from kscurv.jets import Jet


def x_jet(order, nvars=1, value=0.0, var=0):
    return Jet.variable(var, value, nvars, order)


def coeff_list(j: Jet, var=0):
    """Univariate coefficient sequence of a jet in one variable."""
    return [j.coefficient(tuple(k if v == var else 0 for v in range(j.nvars)))
            for k in range(j.order + 1)]


# ---------------------------------------------------------------------------
# layout
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("nvars,order", [(1, 0), (1, 5), (2, 3), (4, 4), (6, 6)])
def test_layout_size_is_binomial(nvars, order):
    lay = jets.layout(nvars, order)
    assert lay.size == math.comb(nvars + order, order) == jets.ncoef(nvars, order)
    # graded: degrees never decrease along the coefficient axis
    assert np.all(np.diff(lay.degrees) >= 0)


def test_lower_order_is_prefix():
    hi, lo = jets.layout(3, 4), jets.layout(3, 2)
    for e, i in lo.index.items():
        assert hi.index[e] == i


def test_order_out_of_range():
    with pytest.raises(ValueError):
        jets.layout(2, jets.MAX_ORDER + 1)


# ---------------------------------------------------------------------------
# arithmetic examples
# ---------------------------------------------------------------------------

def test_add_and_scale():
    x = x_jet(2)
    npt.assert_allclose(((1 + x) + (1 - x)).coeffs, Jet.constant(2.0, 1, 2).coeffs)
    y = Jet.variable(1, 0.0, 2, 2)
    x2 = Jet.variable(0, 0.0, 2, 2)
    assert (3 * (x2 + y)).allclose(3 * x2 + 3 * y)
    a = Jet.variable(0, 0.4, 2, 3) * Jet.variable(1, -1.3, 2, 3)
    npt.assert_array_equal((a - a).coeffs, 0.0)


def test_product_truncates():
    x = x_jet(2)
    assert coeff_list((1 + x) * (1 - x)) == [1.0, 0.0, -1.0]
    xy = Jet.variable(0, 0.0, 2, 1) * Jet.variable(1, 0.0, 2, 1)
    npt.assert_array_equal(xy.coeffs, 0.0)


def test_reciprocal_geometric_series():
    x = x_jet(3)
    npt.assert_allclose(coeff_list(1 / (1 - x)), [1, 1, 1, 1])
    a = Jet.variable(0, 0.7, 1, 4) ** 3 + 2.0
    npt.assert_allclose((a / a).coeffs, Jet.constant(1.0, 1, 4).coeffs, atol=1e-14)


def test_reciprocal_of_zero_is_domain_error():
    with pytest.raises(jets.DomainError):
        1 / x_jet(2)


def test_compose_examples():
    x = x_jet(2)
    npt.assert_allclose(coeff_list(x.compose("exp")), [1, 1, 0.5])
    npt.assert_allclose(Jet.constant(1.0, 1, 3).compose("sqrt").coeffs, [1, 0, 0, 0])


@pytest.mark.parametrize("fname,x0", [("log", 0.0), ("log", -1.0), ("sqrt", -0.5)])
def test_compose_outside_domain(fname, x0):
    with pytest.raises(jets.DomainError):
        Jet.constant(x0, 1, 2).compose(fname)


def test_cos_of_square_matches_finite_differences():
    # independent oracle: central differences of the scalar function
    u0, h = 0.7, 1e-4
    f = lambda u: math.cos(u * u)
    j = (x_jet(2, value=u0) ** 2).compose("cos")
    d1 = (f(u0 + h) - f(u0 - h)) / (2 * h)
    d2 = (f(u0 + h) - 2 * f(u0) + f(u0 - h)) / h ** 2
    npt.assert_allclose(j.derivative((1,)), d1, rtol=1e-6)
    npt.assert_allclose(j.derivative((2,)), d2, rtol=1e-6)


def test_partial_examples():
    x = Jet.variable(0, 0.3, 2, 2)
    y = Jet.variable(1, -0.2, 2, 2)
    dx = (x * x).partial(0)
    assert dx.order == 1
    npt.assert_allclose(dx.coeffs, (2 * Jet.variable(0, 0.3, 2, 1)).coeffs)
    npt.assert_array_equal(x.partial(1).coeffs, 0.0)
    npt.assert_array_equal(y.partial(0).coeffs, 0.0)


def test_shape_mismatch():
    with pytest.raises(jets.ShapeMismatch):
        Jet.variable(0, 0.0, 2, 2) + Jet.variable(0, 0.0, 2, 3)


# ---------------------------------------------------------------------------
# array-level routines broadcast over leading axes
# ---------------------------------------------------------------------------

def test_mul_broadcasts_over_tensor_axes():
    lay = jets.layout(2, 3)
    rng = np.random.default_rng(1)
    a = rng.normal(size=(3, 4, lay.size))
    b = rng.normal(size=(4, lay.size))
    full = jets.mul(a, b, lay)
    for i in range(3):
        for j in range(4):
            npt.assert_allclose(full[i, j], jets.mul(a[i, j], b[j], lay), rtol=1e-14)


def test_einsum_is_contraction_of_jet_products():
    lay = jets.layout(2, 2)
    rng = np.random.default_rng(2)
    a = rng.normal(size=(3, 3, lay.size))
    b = rng.normal(size=(3, lay.size))
    got = jets.einsum("ij,j->i", a, b, lay)
    want = sum(jets.mul(a[:, j], b[j], lay) for j in range(3))
    npt.assert_allclose(got, want, rtol=1e-13, atol=1e-14)


def test_gradient_stacks_partials():
    lay = jets.layout(3, 3)
    rng = np.random.default_rng(3)
    a = rng.normal(size=(lay.size,))
    g = jets.gradient(a, lay)
    for v in range(3):
        npt.assert_array_equal(g[v], jets.partial(a, v, lay))


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

small = st.floats(-2.0, 2.0, allow_nan=False)


def random_jet(seed, nvars=2, order=3):
    rng = np.random.default_rng(seed)
    return Jet(nvars, order, rng.normal(size=jets.ncoef(nvars, order)))


seeds = st.integers(0, 2 ** 31 - 1)


@settings(max_examples=50, deadline=None)
@given(seeds, seeds, seeds)
def test_ring_axioms(s1, s2, s3):
    a, b, c = random_jet(s1), random_jet(s2), random_jet(s3)
    assert (a * b).allclose(b * a)
    assert ((a * b) * c).allclose(a * (b * c), rtol=1e-10, atol=1e-12)
    assert (a * (b + c)).allclose(a * b + a * c, rtol=1e-10, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds, seeds)
def test_product_rule_for_partials(s1, s2):
    a, b = random_jet(s1), random_jet(s2)
    for v in range(2):
        lhs = (a * b).partial(v)
        rhs = a.partial(v) * Jet(2, 2, b.coeffs[:jets.ncoef(2, 2)]) + \
            Jet(2, 2, a.coeffs[:jets.ncoef(2, 2)]) * b.partial(v)
        assert lhs.allclose(rhs, rtol=1e-10, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(small, st.sampled_from(["sin", "cos", "exp", "sinh", "cosh"]))
def test_compose_matches_closed_taylor_series(x0, fname):
    j = x_jet(5, value=x0).compose(fname)
    npt.assert_allclose(j.coeffs, jets.taylor_coefficients(fname, np.array(x0), 5),
                        rtol=1e-12, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 3.0))
def test_log_inverts_exp(x0):
    j = x_jet(4, value=x0)
    assert j.compose("log").compose("exp").allclose(j, rtol=1e-11, atol=1e-12)
    assert (j.compose("sqrt") ** 2).allclose(j, rtol=1e-11, atol=1e-12)
