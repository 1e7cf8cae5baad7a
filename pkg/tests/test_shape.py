import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdcfem.shape import lagrange_1d, reference_element_nodes, reference_nodes_1d, shape_eval


@pytest.mark.parametrize("q", [1, 2, 3])
@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_nodal_kronecker_property(q, p):
    xi = reference_element_nodes(q, p)
    N = shape_eval(q, p, xi, 0)
    np.testing.assert_allclose(N, np.eye((p + 1) ** q), atol=1e-12)


def test_first_coordinate_runs_fastest():
    xi = reference_element_nodes(2, 2)
    np.testing.assert_allclose(xi[:3], [[-1, -1], [0, -1], [1, -1]])
    np.testing.assert_allclose(xi[3], [-1, 0])


@settings(max_examples=30, deadline=None)
@given(p=st.integers(1, 6), x=st.lists(st.floats(-1, 1), min_size=1, max_size=5))
def test_partition_of_unity(p, x):
    L, dL, d2L = lagrange_1d(p, np.array(x), 2)
    np.testing.assert_allclose(L.sum(-1), 1.0, atol=1e-11)
    np.testing.assert_allclose(dL.sum(-1), 0.0, atol=1e-9)
    np.testing.assert_allclose(d2L.sum(-1), 0.0, atol=1e-8)


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_reproduces_polynomials_of_order_p(p, rng):
    coeff = rng.normal(size=(p + 1, p + 1))
    f = lambda x, y: np.polynomial.polynomial.polyval2d(x, y, coeff)
    fx = lambda x, y: np.polynomial.polynomial.polyval2d(x, y, np.polynomial.polynomial.polyder(coeff, axis=0))
    fyy = lambda x, y: np.polynomial.polynomial.polyval2d(x, y, np.polynomial.polynomial.polyder(coeff, 2, axis=1))
    nodes = reference_element_nodes(2, p)
    vals = f(nodes[:, 0], nodes[:, 1])
    xi = rng.uniform(-1, 1, size=(7, 2))
    N, dN, d2N = shape_eval(2, p, xi, 2)
    np.testing.assert_allclose(N @ vals, f(xi[:, 0], xi[:, 1]), atol=1e-10)
    np.testing.assert_allclose(dN[:, :, 0] @ vals, fx(xi[:, 0], xi[:, 1]), atol=1e-9)
    np.testing.assert_allclose(d2N[:, :, 1, 1] @ vals, fyy(xi[:, 0], xi[:, 1]), atol=1e-8)


def test_derivatives_match_finite_differences(rng):
    xi = rng.uniform(-0.9, 0.9, size=(4, 3))
    N, dN, d2N = shape_eval(3, 2, xi, 2)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        Np = shape_eval(3, 2, xi + e, 0)
        Nm = shape_eval(3, 2, xi - e, 0)
        np.testing.assert_allclose(dN[:, :, k], (Np - Nm) / (2 * h), atol=1e-8)
        _, dNp = shape_eval(3, 2, xi + e, 1)
        _, dNm = shape_eval(3, 2, xi - e, 1)
        np.testing.assert_allclose(d2N[:, :, :, k], (dNp - dNm) / (2 * h), atol=1e-6)


def test_invalid_order_and_dimension():
    with pytest.raises(ValueError):
        reference_nodes_1d(0)
    with pytest.raises(ValueError):
        shape_eval(2, 1, np.zeros((1, 3)))
