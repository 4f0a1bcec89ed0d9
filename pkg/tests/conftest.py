"""Shared charts and model instances for the test suite."""

import sys

import numpy as np
import pytest

from kscurv import geometry as geo
from kscurv import models as md


def poly_model(*coefs, eta=None, u_range=(-1.0, 1.0), coefficients=None):
    """Model family with ``A(u) = sum_k coefs[k] u^k`` (matrices)."""
    C = np.asarray(coefs, dtype=float)
    m = C.shape[1]
    return md.ModelFamilySpec(m + 2, tuple(eta or (1,) * m), md.ExprProfile.polynomial(C),
                              coefficients=coefficients, u_range=u_range)


def perturbed_chart(seed=0, n=4, amplitude=0.1):
    """Euclidean metric plus a random symmetric quadratic perturbation (generic curvature)."""
    rng = np.random.default_rng(seed)
    names = [f"x{i}" for i in range(n)]
    comps = {}
    for i in range(n):
        for j in range(i, n):
            terms = ["1"] if i == j else []
            for a in range(n):
                for b in range(a, n):
                    c = amplitude * rng.uniform(-1, 1)
                    terms.append(f"{c!r}*{names[a]}*{names[b]}")
            comps[(i, j)] = " + ".join(terms)
    return geo.ChartSpec.from_components(names, comps, label=f"perturbed{seed}")


DIAG_10 = ((1.0, 0.0), (0.0, 0.0))
DIAG_11 = ((1.0, 0.0), (0.0, 1.0))
ZERO2 = ((0.0, 0.0), (0.0, 0.0))


@pytest.fixture
def rank1_model():
    return poly_model(ZERO2, DIAG_10)  # A = u diag(1, 0)


@pytest.fixture
def rank2_model():
    return poly_model(ZERO2, ZERO2, ((1.0, 0.3), (0.3, 2.0)))  # A = u^2 B, rank 2


@pytest.fixture
def s2():
    return md.sphere(2)


@pytest.fixture
def s4():
    return md.sphere(4)


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, collected by tests/test_acceptance.py
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
