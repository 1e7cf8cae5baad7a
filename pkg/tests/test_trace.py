import numpy as np
import pytest
from scipy.integrate import quad

from tdcfem.cases import build_rope_stretch, build_tc2, rope_end_displacement, tc2_level_set
from tdcfem.geometry.implicit import ImplicitGeometry
from tdcfem.mechanics import MaterialModel
from tdcfem.trace import BackgroundMesh, TraceModel, assemble_trace, nitsche_slip, stabilization


def test_background_mesh_layout():
    bm = BackgroundMesh([0, 0], [2, 1], (4, 2), 2)
    assert bm.nodes.shape == (9 * 5, 2) and bm.n_elems == 8
    assert bm.h == pytest.approx(0.5)
    np.testing.assert_allclose(bm.nodes[bm.elements[0]][[0, 2, 6, 8]], [[0, 0], [0.5, 0], [0, 0.5], [0.5, 0.5]])


def test_rope_length_matches_arc_length_integral():
    exact, _ = quad(lambda x: np.hypot(1.0, 0.5 + np.pi / 7 * np.cos(np.pi * x)), 0.0, 1.0, epsabs=1e-14)
    model = build_tc2("trace", 4, 8, {}).model
    assert model.measure() == pytest.approx(exact, rel=1e-9)


def test_boundary_points_found_at_both_rope_ends():
    for n in (2, 4, 8):
        model = build_rope_stretch("trace", 2, n, {}).model
        X = np.sort(model.boundary["X"][:, 0])
        np.testing.assert_allclose(X, [0.0, 1.0], atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_exact_stretch_is_discrete_equilibrium(p):
    model = build_rope_stretch("trace", p, 4, {}).model
    u = model.interpolate(rope_end_displacement)
    R, _ = model.residual_tangent(u)
    assert np.max(np.abs(R)) < 1e-10


def test_stabilization_is_symmetric_and_scaled_by_rho():
    model = build_rope_stretch("trace", 2, 4, {}).model
    K = model.K_stab
    assert abs(K - K.T).max() < 1e-12 * abs(K).max()
    doubled = build_rope_stretch("trace", 2, 4, {"rho": 2 * model.rho}).model
    assert abs(doubled.K_stab - 2 * K).max() < 1e-10 * abs(K).max()
    u = np.ones(model.ndof)
    np.testing.assert_allclose(stabilization(model, u), K @ u)


def test_default_rho_scales_with_inverse_h():
    m4 = build_rope_stretch("trace", 1, 4, {}).model
    m8 = build_rope_stretch("trace", 1, 8, {}).model
    assert m4.rho == pytest.approx(1000 * 4) and m8.rho == pytest.approx(1000 * 8)


def test_slip_helper_and_system_wrapper():
    geom = ImplicitGeometry(d=2, phi=(tc2_level_set(),), domain_box=((0, 0), (1, 0.5)), dirichlet_parts=("x0", "x1"))
    bm = BackgroundMesh([0, 0], [1, 0.5], (4, 2), 1)
    model = TraceModel(geom, bm, MaterialModel.rope(1.0, 1.0))
    assert model.boundary is None
    nitsche_slip(model, "x0", [0.0, 1.0])
    assert model.boundary["constrained"].tolist() == [True]
    sys = assemble_trace(geom, bm, MaterialModel.rope(1.0, 1.0))
    assert sys.residual.shape == (sys.tangent.shape[0],)
