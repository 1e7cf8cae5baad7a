import numpy as np
import pytest
import scipy.sparse as sp

from tdcfem.cases import build_membrane_stretch, build_tc2, stretch_displacement
from tdcfem.errors import NoConvergence, SingularTangent
from tdcfem.solver import NewtonConfig, linear_solve, newton_solve


def test_linear_solve(rng):
    A = rng.normal(size=(6, 6))
    A = sp.csr_matrix(A @ A.T + 6 * np.eye(6))
    b = rng.normal(size=6)
    np.testing.assert_allclose(A @ linear_solve(A, b), b, atol=1e-12)
    with pytest.raises(SingularTangent):
        linear_solve(sp.csr_matrix(np.diag([1.0, 0.0, 1.0])), np.ones(3))


@pytest.mark.parametrize("kw", [dict(tol_residual=0.0), dict(max_iter=0), dict(load_steps=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        NewtonConfig(**kw)


def test_newton_recovers_homogeneous_stretch():
    model = build_membrane_stretch("surface", 2, 2, {}).model
    res = newton_solve(model, NewtonConfig(max_iter=20))
    np.testing.assert_allclose(res.u, model.interpolate(stretch_displacement), atol=1e-12)
    # quadratic convergence: the last residuals collapse quickly
    r = [h[2] for h in res.history]
    assert r[-1] < 1e-9 and res.iterations <= 8


def test_newton_reports_nonconvergence_with_best_iterate():
    pr = build_tc2("surface", 2, 4, {})
    with pytest.raises(NoConvergence) as exc:
        newton_solve(pr.model, NewtonConfig(max_iter=1))
    assert exc.value.best is not None


def test_load_stepping_reaches_same_solution():
    pr = build_tc2("surface", 2, 4, {})
    a = newton_solve(pr.model, pr.newton)
    from dataclasses import replace
    b = newton_solve(pr.model, replace(pr.newton, load_steps=4))
    assert a.energy == pytest.approx(b.energy, rel=1e-10)
