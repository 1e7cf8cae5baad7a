import numpy as np
import pytest

from tdcfem.cases import build_membrane_stretch, half_sphere_patches, mesh_size, stretch_displacement
from tdcfem.errors import DanglingInterface
from tdcfem.geometry.parametric import ParametricPatch
from tdcfem.mechanics import MaterialModel
from tdcfem.surface import (Constraint, Part, SurfaceModel, merge_meshes, mesh_from_patch, read_mesh,
                            surface_batch, write_mesh)


def _square(lo=(0.0, 0.0), hi=(1.0, 1.0)):
    return ParametricPatch(q=2, d=3, map=lambda R: np.concatenate([R, np.zeros(R.shape[:-1] + (1,))], -1),
                           reference_domain=((lo[0], hi[0]), (lo[1], hi[1])))


def test_structured_mesh_counts_and_tags():
    m = mesh_from_patch(_square(), (3, 2), 2)
    assert m.n_nodes == 7 * 5 and m.n_elems == 6 and m.elements.shape == (6, 9)
    assert m.tags["r0"].size == 5 and m.tags["s1"].size == 7
    np.testing.assert_allclose(m.nodes[m.tags["r1"], 0], 1.0)
    assert m.facets["s0"].shape == (3, 2)


def test_merge_shares_interface_nodes():
    a = mesh_from_patch(_square((0, 0), (1, 1)), 2, 2)
    b = mesh_from_patch(_square((1, 0), (2, 1)), 2, 2)
    m = merge_meshes([a, b])
    assert m.n_nodes == a.n_nodes + b.n_nodes - 5
    assert m.n_elems == 8


def test_mesh_roundtrip(tmp_path):
    m = mesh_from_patch(_square(), 2, 3)
    write_mesh(tmp_path / "m.txt", m)
    r = read_mesh(tmp_path / "m.txt")
    np.testing.assert_array_equal(r.nodes, m.nodes)
    np.testing.assert_array_equal(r.elements, m.elements)
    np.testing.assert_array_equal(np.sort(r.tags["r0"]), np.sort(m.tags["r0"]))


@pytest.mark.parametrize("p", [2, 3, 4])
def test_half_sphere_area_converges(p):
    errs = []
    for n in (2, 4):
        mesh = merge_meshes([mesh_from_patch(pt, (mesh_size(a, n), mesh_size(b, n)), p) for pt, (a, b) in half_sphere_patches()])
        errs.append(abs(np.sum(surface_batch(mesh, p + 2).w) - 2 * np.pi))
    assert errs[1] < 1e-2
    assert np.log2(errs[0] / errs[1]) >= p + 0.5


def test_dangling_interface_detected():
    a = mesh_from_patch(_square((0, 0), (1, 1)), 2, 1)
    b = mesh_from_patch(_square((1.5, 0), (2.5, 1)), 2, 1)
    mat = MaterialModel.membrane(1.0, 0.3, 1.0)
    with pytest.raises(DanglingInterface):
        SurfaceModel([Part(a, mat), Part(b, mat)], shared=[(0, 1, a.tags["r1"])])


def test_constraints_prescribe_components():
    m = mesh_from_patch(_square(), 1, 1)
    model = SurfaceModel([Part(m, MaterialModel.membrane(1.0, 0.3, 1.0))],
                         [Constraint(m.tags["r0"], (0, 2), lambda X: X + 1.0)])
    ids = m.tags["r0"]
    assert model.fixed.reshape(-1, 3)[ids].tolist() == [[True, False, True]] * ids.size
    np.testing.assert_allclose(model.prescribed.reshape(-1, 3)[ids][:, 0], 1.0)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_homogeneous_stretch_is_discrete_equilibrium(p):
    model = build_membrane_stretch("surface", p, 2, {}).model
    u = model.interpolate(stretch_displacement)
    R, _ = model.residual_tangent(u)
    assert np.max(np.abs(R[~model.fixed])) < 1e-12
    if p >= 2:
        assert model.residual_error(u) < 1e-10


def test_residual_error_routes_agree():
    model = build_membrane_stretch("surface", 3, 2, {}).model
    u = model.interpolate(lambda X: 0.05 * np.stack([np.sin(X[:, 1]), X[:, 0] ** 2, X[:, 0] * X[:, 1]], -1))
    a, b = model.residual_error(u, cross_check=True)
    assert a == pytest.approx(b, rel=1e-8)
