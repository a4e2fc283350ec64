import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tracefem.quadrature import QuadratureOrderError, tet_rule, triangle_rule

REF_TRI = np.array([[0, 0.0], [1, 0], [0, 1]])
REF_TET = np.array([[0, 0, 0.0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def tri_int(f, order):
    bary, w = triangle_rule(order)
    x = bary @ REF_TRI
    return 0.5 * np.sum(w * f(x[:, 0], x[:, 1]))


def tet_int(f, order):
    bary, w = tet_rule(order)
    x = bary @ REF_TET
    return np.sum(w * f(x[:, 0], x[:, 1], x[:, 2])) / 6.0


def test_triangle_examples():
    assert tri_int(lambda x, y: 1.0 + 0 * x, 2) == pytest.approx(0.5, abs=1e-15)
    assert tri_int(lambda x, y: x * x * y * y, 4) == pytest.approx(1.0 / 180.0, rel=1e-13)


def test_tet_examples():
    assert tet_int(lambda x, y, z: 1.0 + 0 * x, 1) == pytest.approx(1.0 / 6.0)
    assert tet_int(lambda x, y, z: x, 2) == pytest.approx(1.0 / 24.0, rel=1e-13)


def test_unsupported_order():
    with pytest.raises(QuadratureOrderError):
        triangle_rule(3)
    with pytest.raises(QuadratureOrderError):
        tet_rule(7)


def _fact(n):
    return float(np.prod(np.arange(1, n + 1)))


# exact monomial integrals over the reference simplices
def tri_exact(a, b):
    return _fact(a) * _fact(b) / _fact(a + b + 2)


def tet_exact(a, b, c):
    return _fact(a) * _fact(b) * _fact(c) / _fact(a + b + c + 3)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([2, 4, 6]), st.integers(0, 6), st.integers(0, 6))
def test_triangle_exactness(order, a, b):
    if a + b > order:
        return
    assert tri_int(lambda x, y: x ** a * y ** b, order) == pytest.approx(tri_exact(a, b), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([1, 2, 4]), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4))
def test_tet_exactness(order, a, b, c):
    if a + b + c > order:
        return
    got = tet_int(lambda x, y, z: x ** a * y ** b * z ** c, order)
    assert got == pytest.approx(tet_exact(a, b, c), rel=1e-12)


@pytest.mark.parametrize("order", [2, 4, 6])
def test_triangle_weights_positive(order):
    bary, w = triangle_rule(order)
    assert np.all(w > 0) and np.all(bary >= 0)
    np.testing.assert_allclose(bary.sum(axis=1), 1.0)
