from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypolie import quadrature as quad


@given(st.integers(1, 20), st.floats(-3, 3), st.floats(0.1, 4))
def test_gauss_legendre_exact_for_polynomials(order, a, width):
    b = a + width
    x, w = quad.rule(a, b, order)
    k = 2 * order - 1
    assert np.dot(w, x ** k) == pytest.approx((b ** (k + 1) - a ** (k + 1)) / (k + 1), rel=1e-9, abs=1e-9)


def test_composite_respects_breakpoints_and_width():
    x, w = quad.composite(-2.0, 3.0, 4, max_width=1.0, breakpoints=(0.5,))
    assert w.sum() == pytest.approx(5.0)
    assert len(x) % 4 == 0 and len(x) >= 24


def test_box_integrate_gaussian():
    val = quad.box_integrate(lambda X: np.exp(-np.sum(X ** 2, axis=1)), [-8, -8], [8, 8], order=32, max_width=4)
    assert val == pytest.approx(math.pi, rel=1e-12)


def test_box_integrate_kink_with_breakpoint():
    f = lambda X: np.abs(X[:, 0] - 0.3)
    val = quad.box_integrate(f, [-1], [1], order=8, breakpoints=[(0.3,)])
    assert val == pytest.approx((1.3 ** 2 + 0.7 ** 2) / 2, rel=1e-14)


def test_adaptive_array_valued():
    got = quad.adaptive(lambda s: np.array([np.exp(s), np.sin(s)]), 0.0, 2.0)
    assert np.allclose(got, [math.exp(2) - 1, 1 - math.cos(2)], rtol=1e-12)
