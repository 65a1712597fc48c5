from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from vessiot_kit.polynomial import monomial_basis


def test_graded_order():
    b = monomial_basis(2, 2)
    assert [tuple(e) for e in b.exponents] == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert b.of_degree(1).tolist() == [1, 2]
    assert b.up_to(1).tolist() == [0, 1, 2]
    assert monomial_basis(2, 2) is b


def test_variable_and_constant():
    b = monomial_basis(3, 2)
    y = np.array([0.3, -0.2, 0.5])
    assert b.evaluate(b.variable(1), y) == -0.2
    assert b.evaluate(b.constant(2.5), y) == 2.5


coeffs = st.lists(st.floats(-2, 2), min_size=10, max_size=10).map(np.array)
point = st.tuples(st.floats(-1, 1), st.floats(-1, 1)).map(np.array)


@settings(max_examples=50, deadline=None)
@given(coeffs, coeffs, point)
def test_truncated_product_matches_pointwise(a, b, y):
    basis = monomial_basis(2, 3)
    low = basis.degrees <= 1
    a = np.where(basis.degrees <= 2, a, 0.0)
    b = np.where(low, b, 0.0)  # product of degree <= 3 is exact
    prod = basis.mul(a, b)
    assert np.isclose(basis.evaluate(prod, y), basis.evaluate(a, y) * basis.evaluate(b, y), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(coeffs, point)
def test_derivative_matches_difference(a, y):
    basis = monomial_basis(2, 3)
    h = 1e-6
    for var in range(2):
        e = np.zeros(2)
        e[var] = h
        fd = (basis.evaluate(a, y + e) - basis.evaluate(a, y - e)) / (2 * h)
        assert np.isclose(basis.evaluate(basis.derivative(a, var), y), fd, atol=1e-7)


def test_stacked_product():
    basis = monomial_basis(1, 3)
    a = np.array([[1.0, 1.0, 0, 0], [0, 2.0, 0, 0]])
    b = np.array([1.0, -1.0, 0, 0])
    assert np.allclose(basis.mul(a, b), [[1, 0, -1, 0], [0, 2, -2, 0]])
