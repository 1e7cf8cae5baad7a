import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdcfem.errors import DegenerateDeformation, ParallelGradients, SingularMetric, ZeroGradient
from tdcfem.geometry.implicit import ImplicitGeometry, LevelSet, extend_normal_field, frame_codim1, frame_codim2
from tdcfem.geometry.parametric import (ParametricPatch, fd_jacobian, frame_from_jacobian, metric_operators,
                                        stretch_from_tangents)


def test_metric_of_scaled_plane():
    J = np.array([[2.0, 0.0], [0.0, 3.0], [0.0, 0.0]])
    G, Q = metric_operators(J)
    np.testing.assert_allclose(G, np.diag([4.0, 9.0]))
    np.testing.assert_allclose(Q.T @ J, np.eye(2), atol=1e-15)


def test_singular_metric_raises():
    with pytest.raises(SingularMetric):
        metric_operators(np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]]))


def test_fd_jacobian_matches_analytic():
    f = lambda r: np.stack([np.cos(r[..., 0]) * r[..., 1], np.sin(r[..., 0]) * r[..., 1], r[..., 1] ** 2], -1)
    r = np.array([[0.3, 1.2]])
    exact = np.array([[[-np.sin(0.3) * 1.2, np.cos(0.3)], [np.cos(0.3) * 1.2, np.sin(0.3)], [0.0, 2.4]]])
    np.testing.assert_allclose(fd_jacobian(f, r, 2), exact, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(s1=st.floats(0.5, 2.0), s2=st.floats(0.5, 2.0))
def test_homogeneous_stretch_of_flat_membrane(s1, s2):
    J = np.array([[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]])
    grad_r_u = np.array([[[s1 - 1, 0.0], [0.0, s2 - 1], [0.0, 0.0]]])
    fr = frame_from_jacobian(J, grad_r_u)
    assert fr.Lambda[0] == pytest.approx(s1 * s2, rel=1e-13)
    assert stretch_from_tangents(fr)[0] == pytest.approx(s1 * s2, rel=1e-13)


def test_collapsed_deformation_raises():
    J = np.array([[[1.0], [0.0]]])
    with pytest.raises(DegenerateDeformation):
        frame_from_jacobian(J, np.array([[[-1.0], [0.0]]]))


def test_patch_validation():
    with pytest.raises(ValueError):
        ParametricPatch(q=3, d=2, map=lambda r: r, reference_domain=((0, 1),) * 3)
    with pytest.raises(ValueError):
        ParametricPatch(q=1, d=2, map=lambda r: r, dirichlet_parts=("r0",), neumann_parts=("r0",))


def test_implicit_frame_of_rotation_keeps_stretch_one(rng):
    N = rng.normal(size=(5, 3))
    theta = 0.4
    R = np.array([[np.cos(theta), -np.sin(theta), 0], [np.sin(theta), np.cos(theta), 0], [0, 0, 1]])
    fr = frame_codim1(N, np.broadcast_to(R - np.eye(3), (5, 3, 3)))
    np.testing.assert_allclose(fr.Lambda, 1.0, atol=1e-14)
    n_expected = (R @ (N / np.linalg.norm(N, axis=1, keepdims=True)).T).T
    np.testing.assert_allclose(fr.n[0], n_expected, atol=1e-14)


def test_implicit_error_conditions():
    with pytest.raises(ZeroGradient):
        frame_codim1(np.zeros((1, 3)))
    with pytest.raises(ParallelGradients):
        frame_codim2(np.array([[1.0, 0, 0]]), np.array([[2.0, 0, 0]]))
    ls = LevelSet(lambda X: X[..., 0], lambda X: np.zeros_like(X))
    geom = ImplicitGeometry(d=2, phi=(ls,), domain_box=((0, 0), (1, 1)))
    with pytest.raises(ZeroGradient):
        extend_normal_field(geom, np.zeros((1, 2)))


def test_geometry_validation():
    ls = LevelSet(lambda X: X[..., 0], lambda X: X)
    with pytest.raises(ValueError):
        ImplicitGeometry(d=2, phi=(ls, ls), domain_box=((0, 0), (1, 1)))
    assert ImplicitGeometry(d=3, phi=(ls, ls), domain_box=((0,) * 3, (1,) * 3)).q == 1


def test_level_set_hessian_fallback():
    ls = LevelSet(lambda X: np.sum(X ** 2, -1), lambda X: 2 * X)
    np.testing.assert_allclose(ls.hess(np.array([[0.3, -0.2]])), 2 * np.eye(2)[None], atol=1e-6)
