import numpy as np
import pytest

from tdcfem.cases import (CASES, TC1_REFERENCE, build_tc4, cube_sphere_patch, eighth_sphere_patches, get_case,
                          tc1_displacement, tc3_jacobian, tc3_map, tc3_patches)
from tdcfem.errors import UnsupportedOrder
from tdcfem.geometry.parametric import fd_jacobian


def test_registry():
    assert {"tc1", "tc2", "tc3a", "tc3b", "tc4"} <= set(CASES)
    with pytest.raises(KeyError, match="known"):
        get_case("tc9")


def test_cube_sphere_patch_lies_on_sphere_with_exact_jacobian(rng):
    pt = cube_sphere_patch(2, 1, ((-0.7, 0.7), (-0.7, 0.7)))
    r = rng.uniform(-0.7, 0.7, size=(6, 2))
    np.testing.assert_allclose(np.linalg.norm(pt(r), axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(pt.jacobian(r), fd_jacobian(pt.map, r, 2), atol=1e-8)


def test_tc3_map_jacobian(rng):
    R = rng.uniform(-1, 1, size=(5, 2))
    np.testing.assert_allclose(tc3_jacobian(R), fd_jacobian(tc3_map, R, 2), atol=1e-8)


@pytest.mark.parametrize("variant", ["A", "B"])
def test_tc3_patches_cover_the_domain(variant):
    from tdcfem.surface import merge_meshes, mesh_from_patch, surface_batch
    meshes = [mesh_from_patch(pt, 4, 3) for pt, _, _ in tc3_patches(variant)]
    mesh = merge_meshes(meshes)
    # flat projection of the area element: the reference area of the domain times 1.5
    flat = mesh.nodes[:, :2] / [1.5, 1.0]
    expected = np.pi if variant == "A" else 4.0
    b = surface_batch(mesh, 5)
    assert b.w.sum() > 1.5 * expected * 0.999
    assert np.max(np.linalg.norm(flat, axis=1) if variant == "A" else np.max(np.abs(flat), axis=1)) <= 1 + 1e-12


def test_eighth_sphere_patches_tile_the_octant():
    from tdcfem.surface import merge_meshes, mesh_from_patch, surface_batch
    mesh = merge_meshes([mesh_from_patch(pt, 4, 4) for pt in eighth_sphere_patches()])
    assert surface_batch(mesh, 6).w.sum() == pytest.approx(np.pi / 2, rel=1e-7)
    assert np.all(mesh.nodes >= -1e-14)


def test_tc1_energy_converges_to_reference():
    from tdcfem.harness import CaseSpec, run_case
    rec = run_case(CaseSpec("tc1", "surface", 4, ladder=(2, 4)))
    assert rec.rows[-1].energy == pytest.approx(TC1_REFERENCE, rel=1e-6)
    np.testing.assert_allclose(tc1_displacement(np.zeros((1, 3))).shape, (1, 3))


def test_surface_only_cases_reject_trace():
    with pytest.raises(UnsupportedOrder):
        build_tc4("trace", 1, 1, {})


def test_tc4_symmetry_constraints():
    model = build_tc4("surface", 2, 2, {}).model
    fixed = model.fixed.reshape(-1, 3)
    on_plane = np.abs(model.nodes) < 1e-12
    np.testing.assert_array_equal(fixed, on_plane)
