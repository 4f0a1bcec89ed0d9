"""Expression parser, printer, symbolic differentiation and evaluation."""

import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from kscurv import expr as ex
from kscurv import jets
from kscurv.expr import Add, Const, Coord, Func, Mul, Neg, Param, Pow, Sub

COORDS = ["x", "y"]


def test_literal():
    assert ex.parse("0") == Const(0.0)


def test_precedence():
    got = ex.parse("2*u^3 - 1", ["u"])
    u = Coord(0, "u")
    assert got == Sub(Mul(Const(2.0), Pow(u, 3)), Const(1.0))


def test_parameter_reference():
    e = ex.parse("cos(b*u)*(x^2 - y^2)", ["u", "x", "y"], ["b"])
    assert ex.parameters_used(e) == {"b"}
    assert ex.coordinates_used(e) == {0, 1, 2}


def test_unary_minus_binds_looser_than_power():
    assert ex.evaluate(ex.parse("-u^2", ["u"]), [3.0]) == -9.0


@pytest.mark.parametrize("src", ["2*", "u +* 3", "(u", "u)", "sin()", "u^1.5", ""])
def test_syntax_errors(src):
    with pytest.raises(ex.ExprSyntaxError):
        ex.parse(src, ["u"])


def test_unknown_identifier_is_named():
    with pytest.raises(ex.UnknownIdentifier) as info:
        ex.parse("2*z*x^2", ["u", "v", "x", "y"])
    assert info.value.name == "z"


@pytest.mark.parametrize("src,var,want", [
    ("u^3", 0, "3 * u^2"),
    ("cos(x)", 0, "-sin(x)"),
    ("b^2 + 7", 0, "0"),
])
def test_derivative_examples(src, var, want):
    coords = ["u"] if "u" in src else ["x"]
    d = ex.differentiate(ex.parse(src, coords, ["b"]), var)
    assert ex.to_source(d) == want


def test_jet_examples():
    j = ex.eval_jet(ex.parse("u^2", ["u"]), [3.0], None, 2)
    npt.assert_allclose(j.coeffs, [9, 6, 1])
    j = ex.eval_jet(ex.parse("sin(u)", ["u"]), [0.0], None, 3)
    npt.assert_allclose(j.coeffs, [0, 1, 0, -1 / 6], atol=1e-16)


def test_jet_matches_finite_differences():
    e = ex.parse("cos(2*u)*x", ["u", "x"])
    p, h = np.array([0.5, 1.2]), 1e-4
    j = ex.eval_jet(e, p, None, 2)
    f = lambda q: ex.evaluate(e, q)
    for a in range(2):
        da = np.eye(2)[a] * h
        fd = (f(p + da) - f(p - da)) / (2 * h)
        npt.assert_allclose(j.derivative(tuple(np.eye(2, dtype=int)[a])), fd, rtol=1e-6)
    # mixed second derivative
    d = h * np.ones(2)
    e2 = np.array([h, -h])
    fd = (f(p + d) - f(p + e2) - f(p - e2) + f(p - d)) / (4 * h * h)
    npt.assert_allclose(j.derivative((1, 1)), fd, rtol=1e-6)


def test_domain_error_propagates():
    with pytest.raises(ArithmeticError):
        ex.evaluate(ex.parse("log(x)", ["x"]), [-1.0])


def test_polynomial_builder():
    e = ex.polynomial([1.0, 0.0, -2.0, 0.5], Coord(0, "u"))
    assert ex.evaluate(e, [2.0]) == pytest.approx(1 - 8 + 4)


# ---------------------------------------------------------------------------
# properties on random well-behaved expressions
# ---------------------------------------------------------------------------

leaves = st.one_of(
    st.sampled_from([Coord(0, "x"), Coord(1, "y"), Param("b")]),
    st.floats(-3, 3, allow_nan=False).map(lambda v: Const(round(v, 3))),
)


def _extend(children):
    return st.one_of(
        st.builds(Add, children, children),
        st.builds(Sub, children, children),
        st.builds(Mul, children, children),
        st.builds(Neg, children),
        st.builds(Pow, children, st.integers(0, 3)),
        st.builds(Func, st.sampled_from(["sin", "cos", "exp"]), children),
    )


exprs = st.recursive(leaves, _extend, max_leaves=8)
points = st.tuples(st.floats(-1, 1), st.floats(-1, 1))
PARAMS = {"b": 0.7}


def _safe_eval(e, p):
    try:
        v = ex.evaluate(e, p, PARAMS)
    except (ArithmeticError, OverflowError):
        return None
    return v if math.isfinite(v) and abs(v) < 1e8 else None


@settings(max_examples=100, deadline=None)
@given(exprs, points)
def test_print_parse_round_trip(e, p):
    v = _safe_eval(e, p)
    assume(v is not None)
    again = ex.parse(ex.to_source(e), COORDS, ["b"])
    npt.assert_allclose(ex.evaluate(again, p, PARAMS), v, rtol=1e-12, atol=1e-12)
    assert ex.to_source(again) == ex.to_source(ex.parse(ex.to_source(again), COORDS, ["b"]))


@settings(max_examples=100, deadline=None)
@given(exprs, points)
def test_symbolic_derivative_matches_jet(e, p):
    assume(_safe_eval(e, p) is not None)
    lay = jets.layout(2, 1)
    j = ex.eval_jet_array(e, p, PARAMS, lay)
    assume(np.all(np.isfinite(j)) and np.max(np.abs(j)) < 1e8)
    for var in range(2):
        d = ex.evaluate(ex.differentiate(e, var), p, PARAMS)
        grad = j[lay.index[tuple(np.eye(2, dtype=int)[var])]]
        npt.assert_allclose(d, grad, rtol=1e-9, atol=1e-9 * (1 + abs(grad)))


@settings(max_examples=100, deadline=None)
@given(exprs, points)
def test_jet_value_matches_float_evaluation(e, p):
    v = _safe_eval(e, p)
    assume(v is not None)
    j = ex.eval_jet_array(e, p, PARAMS, jets.layout(2, 2))
    npt.assert_allclose(j[0], v, rtol=1e-12, atol=1e-12)
