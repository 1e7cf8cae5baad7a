"""Point-batch element kernel shared by the Surface and the Trace FEM.

Both discretizations reduce to the same per-point data: the element a point
belongs to, shape-function values, tangential shape gradients, the
projector and an integration weight.  Internal forces, consistent tangents,
energies and equilibrium residuals are computed from this data alone.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .mechanics import div_cauchy, div_first_pk, second_pk

CHUNK = 4000


@dataclass
class PointBatch:
    """Integration points with everything the kernel needs.

    Attributes
    ----------
    elem : (m,) int
        Row of ``conn`` the point belongs to.
    N : (m, n) shape-function values.
    g : (m, n, d) tangential gradients of the shape functions.
    P : (m, d, d) projector onto the tangent space.
    w : (m,) integration weights (undeformed measure).
    X : (m, d) physical points.
    normal : (m, d), optional unit normal for codimension-one manifolds.
    D : (m, d, L), optional map from coordinate derivatives to surface ones.
    dP : (m, L, d, d), optional coordinate derivatives of ``P``.
    dg : (m, L, n, d), optional coordinate derivatives of ``g`` (only as far
        as needed for the derivative of the directional gradient of u).
    """

    elem: np.ndarray
    N: np.ndarray
    g: np.ndarray
    P: np.ndarray
    w: np.ndarray
    X: np.ndarray
    normal: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    dP: Optional[np.ndarray] = None
    dg: Optional[np.ndarray] = None

    def take(self, sel):
        kw = {}
        for name in ("elem", "N", "g", "P", "w", "X", "normal", "D", "dP", "dg"):
            v = getattr(self, name)
            kw[name] = None if v is None else v[sel]
        return PointBatch(**kw)

    @property
    def size(self):
        return self.w.shape[0]


def gather(conn, elem, U):
    """Nodal displacements of each point's element, shape ``(m, n, d)``."""
    return U[conn[elem]]


def directional_gradient(Ue, g):
    """``grad_dir u = sum_a u_a (x) g_a`` per point."""
    return np.einsum("mai,maj->mij", Ue, g)


def point_state(mat, batch, Ue):
    d = batch.P.shape[-1]
    Gdir = directional_gradient(Ue, batch.g)
    F = np.eye(d) + Gdir
    E = 0.5 * (np.swapaxes(F, 1, 2) @ F - np.eye(d))
    Et = batch.P @ E @ batch.P
    S = second_pk(mat, Et, batch.P)
    return F, Et, S


def energy_density(mat, batch, Ue):
    """``1/2 S : E_tang`` at each point."""
    _, Et, S = point_state(mat, batch, Ue)
    return 0.5 * np.einsum("mij,mij->m", S, Et)


def internal_point_terms(mat, batch, Ue, tangent=True):
    """Residual ``r[m, a, i]`` and tangent ``k[m, a, i, b, j]`` per point (weighted)."""
    F, Et, S = point_state(mat, batch, Ue)
    g = batch.g
    wt = mat.eta * batch.w
    K = F @ S
    r = np.einsum("mij,maj->mai", K, g) * wt[:, None, None]
    if not tangent:
        return r, None
    B = np.einsum("mij,maj->mai", F, g)
    C = F @ batch.P @ np.swapaxes(F, 1, 2)
    gSg = np.einsum("mai,mij,mbj->mab", g, S, g)
    gg = np.einsum("mai,mbi->mab", g, g)
    d = F.shape[-1]
    k = (np.einsum("mab,ij->maibj", gSg, np.eye(d))
         + mat.lam * np.einsum("mai,mbj->maibj", B, B)
         + mat.mu * (np.einsum("mbi,maj->maibj", B, B) + np.einsum("mij,mab->maibj", C, gg)))
    return r, k * wt[:, None, None, None, None]


def load_point_terms(batch, force):
    """``- w N_a F_i`` for a dead load given per undeformed measure."""
    return -np.einsum("ma,mi->mai", batch.N, force) * batch.w[:, None, None]


_LEVI = np.zeros((3, 3, 3))
_LEVI[0, 1, 2] = _LEVI[1, 2, 0] = _LEVI[2, 0, 1] = 1.0
_LEVI[0, 2, 1] = _LEVI[2, 1, 0] = _LEVI[1, 0, 2] = -1.0


def pressure_point_terms(batch, Ue, pressure, tangent=True):
    """Follower pressure ``p n`` on the deformed surface pulled back with the stretch.

    ``n Lambda dGamma_X = (F a1) x (F a2) dGamma_X`` for an orthonormal
    tangent pair with ``a1 x a2 = N``.  Returns the residual contribution
    ``-w N_a p (n Lambda)_i`` and its exact derivative.
    """
    N = batch.normal
    P = batch.P
    # first tangent: projection of the coordinate axis least aligned with N
    ax = np.argmin(np.abs(N), axis=1)
    e = np.eye(3)[ax]
    a1 = np.einsum("mij,mj->mi", P, e)
    a1 /= np.linalg.norm(a1, axis=1, keepdims=True)
    a2 = np.cross(N, a1)
    F = np.eye(3) + directional_gradient(Ue, batch.g)
    c1 = np.einsum("mij,mj->mi", F, a1)
    c2 = np.einsum("mij,mj->mi", F, a2)
    nL = np.cross(c1, c2)
    wp = pressure * batch.w
    r = -np.einsum("ma,mi->mai", batch.N, nL) * wp[:, None, None]
    if not tangent:
        return r, None, nL
    # d(nL)_i / d(u_bj) = (g_b.a1) eps_ijk c2_k + (g_b.a2) eps_ikj c1_k
    ga1 = np.einsum("mbk,mk->mb", batch.g, a1)
    ga2 = np.einsum("mbk,mk->mb", batch.g, a2)
    E2 = np.einsum("ijk,mk->mij", _LEVI, c2)
    E1 = np.einsum("ikj,mk->mij", _LEVI, c1)
    dnL = np.einsum("mb,mij->mibj", ga1, E2) + np.einsum("mb,mij->mibj", ga2, E1)
    k = -np.einsum("ma,mibj->maibj", batch.N, dnL) * wp[:, None, None, None, None]
    return r, k, nL


def sum_per_element(elem, arr, n_elem):
    """Sum point contributions by element (points need not be sorted)."""
    out = np.zeros((n_elem,) + arr.shape[1:])
    np.add.at(out, elem, arr)
    return out


def element_dofs(conn, d):
    return (conn[:, :, None] * d + np.arange(d)).reshape(conn.shape[0], -1)


def scatter_vector(conn, d, r_elem, ndof):
    dofs = element_dofs(conn, d)
    out = np.zeros(ndof)
    np.add.at(out, dofs.ravel(), r_elem.reshape(r_elem.shape[0], -1).ravel())
    return out


def scatter_matrix(conn, d, k_elem, ndof):
    dofs = element_dofs(conn, d)
    n = dofs.shape[1]
    rows = np.repeat(dofs, n, axis=1).ravel()
    cols = np.tile(dofs, (1, n)).ravel()
    return sp.coo_matrix((k_elem.reshape(-1), (rows, cols)), shape=(ndof, ndof)).tocsr()


def assemble_points(conn, d, ndof, batch, fn, tangent=True):
    """Run ``fn(batch_chunk) -> (r, k)`` over chunks and scatter into global arrays."""
    n_elem = conn.shape[0]
    n = conn.shape[1]
    r_tot = np.zeros((n_elem, n, d))
    k_tot = np.zeros((n_elem, n, d, n, d)) if tangent else None
    for start in range(0, batch.size, CHUNK):
        sub = batch.take(slice(start, start + CHUNK))
        r, k = fn(sub)
        np.add.at(r_tot, sub.elem, r)
        if tangent and k is not None:
            np.add.at(k_tot, sub.elem, k)
    R = scatter_vector(conn, d, r_tot, ndof)
    K = scatter_matrix(conn, d, k_tot, ndof) if tangent else None
    return R, K


def point_residual(mat, batch, Ue, force=None, pressure=None, cross_check=False):
    """Equilibrium defect ``div sigma + f`` at each point.

    Loads are given per undeformed measure in the units of the weak form,
    so the strong form reads ``eta Div K + F = 0``.  Needs ``batch.D``,
    ``batch.dP`` and ``batch.dg``.  Returns ``(r, Lambda)`` and, with
    ``cross_check=True``, the defect from the Cauchy-stress route as well.
    """
    d = batch.P.shape[-1]
    Gdir = directional_gradient(Ue, batch.g)
    dGdir = np.einsum("mai,mlaj->mlij", Ue, batch.dg)
    load = np.zeros((batch.size, d)) if force is None else np.broadcast_to(force, (batch.size, d))
    if pressure is not None:
        _, _, nL = pressure_point_terms(batch, Ue, pressure, tangent=False)
        load = load + pressure * nL
    load = load / mat.eta
    divK = div_first_pk(mat, batch.P, Gdir, batch.dP, dGdir, batch.D)
    F = np.eye(d) + Gdir
    M = batch.P @ np.swapaxes(F, 1, 2) @ F @ batch.P + np.eye(d) - batch.P
    Lam = np.sqrt(np.linalg.det(M))
    r = (divK + load) / Lam[:, None]
    if not cross_check:
        return r, Lam
    divs, _ = div_cauchy(mat, batch.P, Gdir, batch.dP, dGdir, batch.D)
    return r, Lam, divs + load / Lam[:, None]
