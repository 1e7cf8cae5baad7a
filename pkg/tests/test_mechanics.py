import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdcfem.errors import InvalidTraction
from tdcfem.mechanics import (MaterialModel, boundary_stretch, energy_density, pk1, pullback_traction,
                              second_pk)


def test_material_constructors():
    rope = MaterialModel.rope(200.0, 0.5)
    assert (rope.lam, rope.mu, rope.eta, rope.q) == (0.0, 100.0, 0.5, 1)
    ps = MaterialModel.membrane(1000.0, 0.3, 0.01)
    assert ps.lam == pytest.approx(1000 * 0.3 / (1 - 0.09))
    assert ps.mu == pytest.approx(1000 / 2.6)
    full = MaterialModel.membrane(1000.0, 0.3, 0.01, plane_stress=False)
    assert full.lam == pytest.approx(1000 * 0.3 / (1.3 * 0.4))


@pytest.mark.parametrize("kw", [dict(lam=1.0, mu=0.0), dict(lam=-1.0, mu=1.0), dict(lam=1.0, mu=1.0, q=1)])
def test_material_validation(kw):
    with pytest.raises(ValueError):
        MaterialModel(**kw)


@settings(max_examples=30, deadline=None)
@given(stretch=st.floats(0.5, 2.0), E=st.floats(1.0, 1e4))
def test_rope_energy_density_uniaxial(stretch, E):
    # rope along e1 in R^2: E_11 = (stretch^2 - 1)/2, S_11 = E * E_11
    mat = MaterialModel.rope(E, 1.0)
    P = np.array([[[1.0, 0.0], [0.0, 0.0]]])
    grad = np.array([[[stretch - 1, 0.0], [0.0, 0.0]]])
    e11 = 0.5 * (stretch ** 2 - 1)
    assert energy_density(mat, P, grad)[0] == pytest.approx(0.5 * E * e11 ** 2, rel=1e-12)
    F, Et, S, K = pk1(mat, P, grad)
    assert S[0, 0, 0] == pytest.approx(E * e11, rel=1e-12)
    assert K[0, 0, 0] == pytest.approx(stretch * E * e11, rel=1e-12)


def test_second_pk_is_tangential(rng):
    mat = MaterialModel(lam=2.0, mu=3.0)
    n = np.array([0.0, 0.0, 1.0])
    P = np.eye(3) - np.outer(n, n)
    A = rng.normal(size=(3, 3))
    E = P @ (A + A.T) @ P
    S = second_pk(mat, E, P)
    np.testing.assert_allclose(S @ n, 0.0, atol=1e-14)
    np.testing.assert_allclose(S, 2 * np.trace(E) * P + 6 * E)


def test_traction_pullback():
    p = np.diag([1.0, 1.0, 0.0])
    np.testing.assert_allclose(pullback_traction([1.0, 2.0, 0.0], p, 2, line_stretch=1.5), [1.5, 3.0, 0.0])
    with pytest.raises(InvalidTraction):
        pullback_traction([0.0, 0.0, 1.0], p, 2, line_stretch=1.0)
    assert boundary_stretch(1) == 1.0
    with pytest.raises(ValueError):
        boundary_stretch(2)
    with pytest.raises(ValueError):
        boundary_stretch(3)
