import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdcfem.errors import EmptyTrace
from tdcfem.harness import fit_slope
from tdcfem.geometry.implicit import ImplicitGeometry, LevelSet
from tdcfem.mechanics import MaterialModel
from tdcfem.quadrature import TensorPoly, cut_element_quadrature, gauss_rule, line_points, surface_points
from tdcfem.shape import reference_element_nodes
from tdcfem.trace import BackgroundMesh, TraceModel, detect_active


@pytest.mark.parametrize("q", [1, 2, 3])
@pytest.mark.parametrize("n", [1, 2, 4])
def test_gauss_rule_exact_for_degree(q, n):
    rule = gauss_rule(q, n)
    assert rule.order == 2 * n - 1
    deg = 2 * n - 1
    val = np.prod(rule.points ** deg + rule.points ** (deg - 1), axis=1) @ rule.weights
    # int_{-1}^{1} x^deg + x^(deg-1) dx = 2/deg when deg-1 is even
    assert val == pytest.approx((2.0 / deg) ** q, rel=1e-13)


def _nodal(fun, q, p, lower, upper):
    xi = reference_element_nodes(q, p)
    X = lower + (xi + 1) * 0.5 * (np.asarray(upper) - lower)
    return fun(X)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.2, 1.0), b=st.floats(-1.0, 1.0), c=st.floats(-0.3, 0.3))
def test_straight_line_length_in_square(a, b, c):
    # a x + b y + c = 0 in [-1, 1]^2; exact length from the clipped segment
    lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    phi = lambda X: a * X[:, 0] + b * X[:, 1] + c
    q = cut_element_quadrature(0, lo, hi, _nodal(phi, 2, 1, lo, hi), 1, 4)
    ys = np.linspace(-1, 1, 200001)
    xs = -(b * ys + c) / a
    inside = np.abs(xs) <= 1
    exact = np.sum(inside) * (ys[1] - ys[0]) * np.hypot(1, b / a)
    assert q.measure == pytest.approx(exact, abs=1e-4)
    np.testing.assert_allclose(phi(q.X), 0, atol=1e-12)


def _sphere_like(radius):
    return LevelSet(lambda X: np.linalg.norm(X, axis=-1) - radius,
                    lambda X: X / np.linalg.norm(X, axis=-1, keepdims=True))


def _trace_measure(geom, lower, upper, cells, p):
    _, quads = detect_active(BackgroundMesh(lower, upper, cells, p), geom)
    return sum(q.measure for q in quads)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_cut_points_approach_circle_at_order_p_plus_one(p):
    geom = ImplicitGeometry(d=2, phi=(_sphere_like(0.7),), domain_box=((-1, -1), (1, 1)))
    h, err = [], []
    for n in (8, 16, 32):
        _, quads = detect_active(BackgroundMesh([-1, -1], [1, 1], (n, n), p), geom)
        X = np.concatenate([q.X for q in quads])
        h.append(2.0 / n)
        err.append(np.max(np.abs(np.linalg.norm(X, axis=1) - 0.7)))
    assert fit_slope(h, err) >= p + 0.4


def test_circle_length_high_order():
    geom = ImplicitGeometry(d=2, phi=(_sphere_like(0.7),), domain_box=((-1, -1), (1, 1)))
    assert _trace_measure(geom, [-1, -1], [1, 1], (8, 8), 4) == pytest.approx(2 * np.pi * 0.7, rel=1e-6)


def test_sphere_area_with_tangential_box_contacts():
    # the unit sphere touches the box faces at isolated points
    geom = ImplicitGeometry(d=3, phi=(_sphere_like(1.0),), domain_box=((-1, -1, 0), (1, 1, 1)))
    errs = [abs(_trace_measure(geom, [-1, -1, 0], [1, 1, 1], (2 * n, 2 * n, n), 2) - 2 * np.pi) for n in (2, 4)]
    assert errs[1] < 1e-3
    assert np.log2(errs[0] / errs[1]) >= 2.7


def test_curve_as_intersection_of_two_level_sets():
    sphere = _sphere_like(1.0)
    plane = LevelSet(lambda X: X[..., 2] - 0.3 * X[..., 0] - 0.1,
                     lambda X: np.broadcast_to([-0.3, 0.0, 1.0], X.shape))
    geom = ImplicitGeometry(d=3, phi=(sphere, plane), domain_box=((-1.2,) * 3, (1.2,) * 3))
    bm = BackgroundMesh([-1.2] * 3, [1.2] * 3, (6, 6, 6), 4)
    _, quads = detect_active(bm, geom)
    dist = 0.1 / np.sqrt(1 + 0.3 ** 2)
    assert sum(q.measure for q in quads) == pytest.approx(2 * np.pi * np.sqrt(1 - dist ** 2), rel=1e-4)


def test_empty_trace_raises():
    ls = LevelSet(lambda X: np.linalg.norm(X, axis=-1) - 5.0, lambda X: X)
    geom = ImplicitGeometry(d=2, phi=(ls,), domain_box=((-1, -1), (1, 1)))
    with pytest.raises(EmptyTrace):
        TraceModel(geom, BackgroundMesh([-1, -1], [1, 1], (2, 2), 1), MaterialModel.rope(1.0, 1.0))


def test_line_points_half_open_ownership():
    poly = TensorPoly.from_element_vector(np.array([-1.0, 0.0, 1.0]), 1, 2)
    assert line_points(poly, -1.0, 0.0).size == 0
    np.testing.assert_allclose(line_points(poly, -1.0, 0.0, own_hi=True), [0.0])
    np.testing.assert_allclose(line_points(poly, -1.0, 1.0), [0.0])


def test_surface_points_empty_without_sign_change():
    poly = TensorPoly.from_element_vector(np.ones(4), 2, 1)
    pts, w = surface_points(poly, -np.ones(2), np.ones(2), 3, 0.0)
    assert pts.shape == (0, 2) and w.size == 0
