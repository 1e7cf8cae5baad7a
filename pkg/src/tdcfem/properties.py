"""Self-checks of the continuum identities and of the discrete operators.

Each check returns a ``Check`` with the measured defect and the tolerance it
is held to.  ``run_all`` drives them for ``tdcfem verify``.
"""

from dataclasses import dataclass

import numpy as np

from .cases import (build_rope_stretch, build_tc2, cube_sphere_patch, half_sphere_patches, tc1_displacement,
                    tc2_curve, tc2_level_set, unit_sphere_level_set)
from .geometry import (ParametricPatch, frame_codim1, frame_from_jacobian, param_directional_gradient_vector,
                       stretch_from_tangents)
from .kernel import gather, point_residual
from .mechanics import MaterialModel, energy_conjugacy_check, divergence_theorem_check, stress_state
from .surface import Constraint, Part, SurfaceModel, merge_meshes, mesh_from_patch
from .trace import BackgroundMesh, TraceModel


@dataclass
class Check:
    name: str
    value: float
    tol: float

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.3e} (tol {self.tol:.1e})"


def _rng(seed):
    return np.random.default_rng(seed)


# ------------------------------------------------------------ sample points


def sphere_points(n, seed=0):
    """Reference points on the top cube-sphere patch and the patch itself."""
    patch = cube_sphere_patch(2, 1.0, ((-np.pi / 4, np.pi / 4), (-np.pi / 4, np.pi / 4)))
    r = _rng(seed).uniform(-np.pi / 4, np.pi / 4, size=(n, 2))
    return patch, r


def smooth_field(X):
    """A smooth ambient displacement with its classical gradient."""
    x, y, z = X[..., 0], X[..., 1], X[..., 2]
    u = 0.3 * np.stack([np.sin(y) + 0.2 * z, x * z, 0.5 * x**2 - y], -1)
    G = np.zeros(X.shape + (3,))
    G[..., 0, 1] = 0.3 * np.cos(y)
    G[..., 0, 2] = 0.3 * 0.2
    G[..., 1, 0] = 0.3 * z
    G[..., 1, 2] = 0.3 * x
    G[..., 2, 0] = 0.3 * x
    G[..., 2, 1] = -0.3
    return u, G


def smooth_field_2d(X):
    x, y = X[..., 0], X[..., 1]
    u = 0.2 * np.stack([np.sin(y) + x * y, x**2 - 0.5 * y], -1)
    G = np.zeros(X.shape + (2,))
    G[..., 0, 0] = 0.2 * y
    G[..., 0, 1] = 0.2 * (np.cos(y) + x)
    G[..., 1, 0] = 0.4 * x
    G[..., 1, 1] = -0.1
    return u, G


def _frames_pair_sphere(n=200, seed=0):
    patch, r = sphere_points(n, seed)
    X = patch(r)
    J = patch.jacobian(r)
    _, G = smooth_field(X)
    fp = frame_from_jacobian(J, G @ J)
    fi = frame_codim1(unit_sphere_level_set().grad(X), G)
    return fp, fi


def _frames_pair_curve(n=200, seed=1):
    r = _rng(seed).uniform(0, 1, size=(n, 1))
    X = tc2_curve(r)
    J = np.stack([np.ones(n), -0.5 - np.pi / 7 * np.cos(np.pi * r[:, 0])], -1)[:, :, None]
    _, G = smooth_field_2d(X)
    fp = frame_from_jacobian(J, G @ J)
    fi = frame_codim1(tc2_level_set().grad(X), G)
    return fp, fi


# ------------------------------------------------------------ continuum checks


def check_projector_algebra():
    """Symmetry, idempotence and annihilation of the normal for both representations."""
    worst = 0.0
    for fp, fi in (_frames_pair_sphere(), _frames_pair_curve()):
        for P, N in ((fp.P, fp.N), (fi.P, fi.N[0])):
            worst = max(worst, np.max(np.abs(P - np.swapaxes(P, -1, -2))), np.max(np.abs(P @ P - P)),
                        np.max(np.abs(np.einsum("...ij,...j->...i", P, N))))
        for p, n in ((fp.p, fp.n), (fi.p, fi.n[0])):
            worst = max(worst, np.max(np.abs(p @ p - p)), np.max(np.abs(np.einsum("...ij,...j->...i", p, n))))
    return Check("projector algebra", float(worst), 1e-12)


def check_dual_representation():
    """Parametric and implicit frames agree on the TC1 and TC2 geometries."""
    worst = 0.0
    for fp, fi in (_frames_pair_sphere(), _frames_pair_curve()):
        for a, b in ((fp.P, fi.P), (fp.p, fi.p), (fp.F_gamma, fi.F_gamma), (fp.Lambda, fi.Lambda)):
            worst = max(worst, float(np.max(np.abs(a - b))))
    return Check("parametric/implicit consistency", worst, 1e-9)


def check_stretch_formulas():
    """Area/line stretch from the metric, tangent vectors, projected C and normals."""
    worst = 0.0
    for fp, fi in (_frames_pair_sphere(), _frames_pair_curve()):
        F, P = fp.F_gamma, fp.P
        d = P.shape[-1]
        M = P @ np.swapaxes(F, -1, -2) @ F @ P + np.eye(d) - P
        lams = [fp.Lambda, stretch_from_tangents(fp), np.sqrt(np.linalg.det(M)), fi.Lambda]
        for L in lams[1:]:
            worst = max(worst, float(np.max(np.abs(L - lams[0]) / np.abs(lams[0]))))
    return Check("stretch multi-formula agreement", worst, 1e-10)


def check_almansi_pushforward():
    """``e_dir = F^-T E_dir F^-1`` for the surface deformation gradient."""
    worst = 0.0
    mat = MaterialModel(1.0, 1.0)
    for fp, _ in (_frames_pair_sphere(), _frames_pair_curve()):
        st = stress_state(mat, fp)
        Fi = np.linalg.inv(st.F_gamma)
        e = np.swapaxes(Fi, -1, -2) @ st.E_dir @ Fi
        worst = max(worst, float(np.max(np.abs(e - st.e_dir))))
    return Check("Almansi push-forward", worst, 1e-10)


def check_energy_conjugacy():
    """``S:E = (sigma:e) Lambda`` relative to ``|S:E|``."""
    worst = 0.0
    mat = MaterialModel(3.0, 2.0)
    for fp, fi in (_frames_pair_sphere(), _frames_pair_curve()):
        for fr in (fp, fi):
            st = stress_state(mat, fr)
            res = energy_conjugacy_check(st)
            SE = np.abs(np.sum(st.S * st.E_tang, axis=(-2, -1)))
            worst = max(worst, float(np.max(res / np.maximum(SE, 1e-300))))
    return Check("energy conjugacy", worst, 1e-10)


def check_dual_route_divergence():
    """``Div K / Lambda`` against ``div sigma`` on curved meshes with a smooth displacement."""
    worst = 0.0
    mat = MaterialModel(3.0, 2.0)
    mesh = merge_meshes([mesh_from_patch(pt, (max(int(2 * a), 1), max(int(2 * b), 1)), 3)
                         for pt, (a, b) in half_sphere_patches()])
    model = SurfaceModel([Part(mesh, mat)])
    fields = [(model, model.interpolate(lambda X: smooth_field(X)[0]), model.error_batches()[0], model.conns[0])]
    pr = build_tc2("trace", 3, 4, {})
    tm = pr.model
    tm.residual_error(np.zeros(tm.ndof))
    fields.append((tm, tm.interpolate(lambda X: smooth_field_2d(X)[0]), tm._err_batch, tm.conn))
    for m, u, b, conn in fields:
        Ue = gather(conn, b.elem, u.reshape(-1, m.d))
        mt = m.parts[0].mat if hasattr(m, "parts") else m.mat
        r1, _, r2 = point_residual(mt, b, Ue, cross_check=True)
        worst = max(worst, float(np.max(np.abs(r1 - r2)) / np.max(np.abs(r1))))
    return Check("dual-route divergence", worst, 1e-8)


def rotation(seed=3):
    A = _rng(seed).normal(size=(3, 3))
    Q, R = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(R)))
    return Q if np.linalg.det(Q) > 0 else -Q


def check_rigid_body():
    """Rigid motions store no energy on Surface and Trace discretizations (scaled by the stiffness)."""
    Q = rotation()
    c = np.array([0.3, -0.2, 0.5])
    rigid = lambda X: X @ Q.T - X + c
    mat = MaterialModel(3.0, 2.0)
    mesh = merge_meshes([mesh_from_patch(pt, (2 * int(a * 2) or 1, 2 * int(b * 2) or 1), 2)
                         for pt, (a, b) in half_sphere_patches()])
    sm = SurfaceModel([Part(mesh, mat)])
    from .geometry import ImplicitGeometry

    geom = ImplicitGeometry(d=3, phi=(unit_sphere_level_set(),), domain_box=((-1, -1, 0), (1, 1, 1)))
    tm = TraceModel(geom, BackgroundMesh([-1, -1, 0], [1, 1, 1], (4, 4, 2), 2), mat)
    scale = (mat.lam + 2 * mat.mu) * 2 * np.pi
    worst = max(abs(sm.energy(sm.interpolate(rigid))), abs(tm.energy(tm.interpolate(rigid)))) / scale
    return Check("rigid-body zero energy", float(worst), 1e-12)


def check_divergence_theorem(cells=8):
    """Surface divergence theorem for a tangential tensor field on a sphere patch."""
    patch = cube_sphere_patch(2, 1.0, ((-0.5, 0.6), (-0.4, 0.7)))

    def A(r):
        X = patch(r)
        nrm = X / np.linalg.norm(X, axis=-1, keepdims=True)
        P = np.eye(3) - nrm[..., :, None] * nrm[..., None, :]
        M = np.stack([np.stack([1 + X[..., 0], X[..., 1] * X[..., 2], np.sin(X[..., 0])], -1),
                      np.stack([X[..., 2], 2 + X[..., 1] ** 2, X[..., 0]], -1),
                      np.stack([np.cos(X[..., 1]), X[..., 0] * X[..., 1], 1.0 + 0 * X[..., 0]], -1)], -2)
        return M @ P

    def u(r):
        return smooth_field(patch(r))[0]

    return Check(f"divergence theorem ({cells}x{cells} cells)", divergence_theorem_check(A, u, patch, cells=cells),
                 1e-8)


# ------------------------------------------------------------ discrete oracles


def _fd_gradient(fun, u, idx, h=1e-6):
    g = np.empty(idx.size)
    for k, i in enumerate(idx):
        e = np.zeros_like(u)
        e[i] = h
        g[k] = (fun(u + e) - fun(u - e)) / (2 * h)
    return g


def check_residual_is_gradient():
    """Assembled residual equals the FD gradient of the potential (dead loads)."""
    pr = build_tc2("surface", 3, 4, {})
    m = pr.model
    rng = _rng(5)
    u = 0.05 * rng.normal(size=m.ndof)
    R, _ = m.residual_tangent(u, tangent=False)
    idx = rng.choice(m.ndof, size=12, replace=False)
    g = _fd_gradient(m.potential, u, idx)
    return Check("residual = FD gradient of potential", float(np.max(np.abs(g - R[idx])) / np.max(np.abs(R))), 1e-6)


def _tangent_fd_defect(model, u, n_cols=8, h=1e-7, seed=6):
    rng = _rng(seed)
    _, K = model.residual_tangent(u, tangent=True)
    K = K.tocsc()
    worst = 0.0
    for j in rng.choice(model.ndof, size=n_cols, replace=False):
        e = np.zeros_like(u)
        e[j] = h
        Rp, _ = model.residual_tangent(u + e, tangent=False)
        Rm, _ = model.residual_tangent(u - e, tangent=False)
        col = (Rp - Rm) / (2 * h)
        worst = max(worst, float(np.max(np.abs(col - K[:, j].toarray().ravel())) / max(np.max(np.abs(col)), 1e-300)))
    return worst


def check_tangent_fd():
    """Assembled tangent equals the FD of the residual (membrane with follower pressure, trace rope)."""
    patch = cube_sphere_patch(2, 1.0, ((0, np.pi / 4), (0, np.pi / 4)))
    mesh = mesh_from_patch(patch, 2, 2)
    sm = SurfaceModel([Part(mesh, MaterialModel.membrane(1000.0, 0.3, 0.01), pressure=20.0,
                            normal_hint=lambda X: X, force=np.array([0.0, 0.0, -1.0]))])
    u = sm.interpolate(lambda X: 0.05 * smooth_field(X)[0])
    worst = _tangent_fd_defect(sm, u)
    tm = build_tc2("trace", 2, 4, {}).model
    ut = tm.interpolate(lambda X: 0.1 * smooth_field_2d(X)[0])
    worst = max(worst, _tangent_fd_defect(tm, ut))
    return Check("tangent = FD of residual", worst, 1e-5)


def check_slip_equals_clamp():
    """Nitsche slip along every coordinate axis reproduces the full clamp exactly."""
    pr = build_rope_stretch("trace", 2, 4, {})
    clamp = pr.model
    u = clamp.interpolate(lambda X: 0.1 * smooth_field_2d(X)[0])
    Rc, Kc = clamp.residual_tangent(u)
    slip = {face: [(e, (lambda X, k=k, G=G: G(np.atleast_2d(X))[0, k])) for k, e in enumerate(np.eye(2))]
            for face, G in clamp.dirichlet.items()}
    sm = TraceModel(clamp.geometry, clamp.mesh, clamp.mat, slip=slip)
    Rs, Ks = sm.residual_tangent(u)
    scale = max(np.max(np.abs(Rc)), 1.0)
    defect = max(float(np.max(np.abs(Rs - Rc))), float(abs(Ks - Kc).max())) / scale
    return Check("slip on all axes = clamp", defect, 1e-14)


def check_stabilization_kernel():
    """The volume stabilization vanishes on fields constant along the level-set normal."""
    tm = build_rope_stretch("trace", 3, 4, {}).model
    t = np.array([1.0, 0.25]) / np.hypot(1.0, 0.25)
    a = np.array([0.3, -0.7])
    u = tm.interpolate(lambda X: 1.5 + np.outer(X @ t, a))
    v = tm.K_stab @ u
    return Check("stabilization of normally constant field", float(np.max(np.abs(v)) / (abs(tm.K_stab).max() * np.max(np.abs(u)))),
                 1e-12)


CHECKS = (check_projector_algebra, check_dual_representation, check_stretch_formulas, check_almansi_pushforward,
          check_energy_conjugacy, check_dual_route_divergence, check_rigid_body, check_divergence_theorem,
          check_residual_is_gradient, check_tangent_fd, check_slip_equals_clamp, check_stabilization_kernel)


def run_all(report=print):
    results = []
    for fn in CHECKS:
        c = fn()
        results.append(c)
        report(c.line())
    return results
