"""Trace FEM: background-mesh shape functions restricted to an immersed manifold.

Dirichlet data is imposed with the non-symmetric Nitsche method (full
vectors or projections on given unit directions), and a volume term
penalizing derivatives normal to the manifold restores regularity of the
system.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EmptyTrace, UnsupportedOrder
from .kernel import (PointBatch, assemble_points, energy_density, gather, internal_point_terms,
                     load_point_terms, point_residual)
from .mechanics import second_pk
from .quadrature import FACE_AXES, cut_element_quadrature, gauss_rule
from .shape import reference_element_nodes, shape_eval

COMPLEX_STEP = 1e-30


@dataclass
class BackgroundMesh:
    """Structured box mesh of Lagrange elements of order ``p``."""

    lower: np.ndarray
    upper: np.ndarray
    cells: tuple
    p: int

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.cells = tuple(int(c) for c in self.cells)
        d, p = self.d, self.p
        counts = [c * p + 1 for c in self.cells]
        self.node_counts = counts
        axes = [np.linspace(self.lower[k], self.upper[k], counts[k]) for k in range(d)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
        self.nodes = grid.transpose(tuple(reversed(range(d))) + (d,)).reshape(-1, d)
        idx = np.arange(self.nodes.shape[0]).reshape(tuple(reversed(counts))).transpose(tuple(reversed(range(d))))
        loc = np.rint((reference_element_nodes(d, p) + 1) * p / 2).astype(int)
        cell_ids = np.array(list(np.ndindex(*self.cells)), dtype=int)
        self.cell_index = cell_ids
        ids = cell_ids[:, None, :] * p + loc[None, :, :]
        self.elements = idx[tuple(np.moveaxis(ids, -1, 0))]
        self.h_vec = (self.upper - self.lower) / np.array(self.cells)
        self.elem_lower = self.lower + cell_ids * self.h_vec
        self.elem_upper = self.elem_lower + self.h_vec

    @property
    def d(self):
        return self.lower.size

    @property
    def h(self):
        return float(np.max(self.h_vec))

    @property
    def n_elems(self):
        return self.elements.shape[0]


@dataclass
class TraceSystem:
    residual: np.ndarray
    tangent: object
    rho: float
    active_nodes: np.ndarray


def detect_active(mesh, geometry, n_points=None, boundary_faces=()):
    """Cut quadrature of every element crossed by the interpolated zero set.

    Returns ``(active element ids, list of CutCellQuadrature)``; raises
    ``EmptyTrace`` if nothing is cut.
    """
    d, p = mesh.d, mesh.p
    n_points = n_points or p + 2
    phi_nodes = [f(mesh.nodes) for f in geometry.phi]
    ev = phi_nodes[0][mesh.elements]
    cand = (ev.min(axis=1) <= 0) & (ev.max(axis=1) >= 0)
    if geometry.codim == 2:
        ev2 = phi_nodes[1][mesh.elements]
        cand &= (ev2.min(axis=1) <= 0) & (ev2.max(axis=1) >= 0)
    active, quads = [], []
    for e in np.nonzero(cand)[0]:
        faces = []
        own = np.zeros(d, bool)
        for face in boundary_faces:
            axis, side = FACE_AXES[face]
            if mesh.cell_index[e, axis] == (mesh.cells[axis] - 1 if side else 0):
                faces.append(face)
        # face roots at element corners are kept by every element; only the
        # element carrying the adjacent segment survives the measure test below
        own[:] = True
        q = cut_element_quadrature(int(e), mesh.elem_lower[e], mesh.elem_upper[e], ev[e], p, n_points,
                                   phi2_nodal=None if geometry.codim == 1 else ev2[e],
                                   boundary_faces=faces, own_upper=own)
        if q.w.size:
            active.append(int(e))
            quads.append(q)
    if not active:
        raise EmptyTrace("no background element is cut by the manifold")
    return np.array(active, dtype=int), quads


def _level_set_frame(mesh, phis, conn_phi, elem, xi, half, second):
    """Projector (and derivatives) from interpolated level sets at element points."""
    d, p = mesh.d, mesh.p
    N, dN, d2N = shape_eval(d, p, xi, 2)
    grads, hess = [], []
    for ph in phis:
        v = ph[conn_phi[elem]]
        grads.append(np.einsum("ma,mak->mk", v, dN) / half)
        hess.append(np.einsum("ma,makl->mkl", v, d2N) / (half[:, :, None] * half[:, None, :]))
    I = np.eye(d)
    if len(phis) == 1:
        g = grads[0]
        ng = np.linalg.norm(g, axis=1, keepdims=True)
        n = g / ng
        P = I - n[:, :, None] * n[:, None, :]
        dP = None
        if second:
            # dn_l = (I - n n) H e_l / |grad phi|
            dn = np.einsum("mij,mjl->mli", P, hess[0]) / ng[:, :, None]
            dP = -(dn[:, :, :, None] * n[:, None, None, :] + n[:, None, :, None] * dn[:, :, None, :])
        return N, dN, d2N, P, n, dP
    g1, g2 = grads
    Ts = np.cross(g2, g1)
    nt = np.linalg.norm(Ts, axis=1, keepdims=True)
    T = Ts / nt
    P = T[:, :, None] * T[:, None, :]
    dP = None
    if second:
        dTs = (np.cross(np.swapaxes(hess[1], 1, 2), g1[:, None, :])
               + np.cross(g2[:, None, :], np.swapaxes(hess[0], 1, 2)))  # (m, l, 3)
        dT = np.einsum("mij,mlj->mli", I - P, dTs) / nt[:, :, None]
        dP = dT[:, :, :, None] * T[:, None, None, :] + T[:, None, :, None] * dT[:, :, None, :]
    return N, dN, d2N, P, None, dP


class TraceModel:
    """Trace FEM system on the active part of a background mesh.

    Parameters
    ----------
    geometry : ImplicitGeometry
        Level set(s); the domain box must equal the background mesh box.
    mesh : BackgroundMesh
    mat : MaterialModel
    force : array_like or callable, optional
        Body load per undeformed measure.
    dirichlet : dict
        Domain face name -> callable ``X -> G_hat`` (full vector).
    slip : dict
        Domain face name -> list of ``(v_d, G_hat)`` pairs.
    neumann : dict
        Domain face name -> traction ``H_hat`` (vector or callable).
    rho : float
        Stabilization parameter.
    """

    def __init__(self, geometry, mesh, mat, force=None, dirichlet=None, slip=None, neumann=None,
                 rho=None, n_points=None):
        self.geometry = geometry
        self.mesh = mesh
        self.mat = mat
        self.force = force
        self.dirichlet = dict(dirichlet or {})
        self.slip = dict(slip or {})
        self.neumann = dict(neumann or {})
        self.d = mesh.d
        self.rho = 1000.0 / mesh.h if rho is None else float(rho)
        faces = sorted(set(self.dirichlet) | set(self.slip) | set(self.neumann))
        self.n_points = n_points or mesh.p + 2
        self.active, self.quads = detect_active(mesh, geometry, self.n_points, faces)
        used = np.unique(mesh.elements[self.active])
        self.active_nodes = used
        remap = -np.ones(mesh.nodes.shape[0], dtype=int)
        remap[used] = np.arange(used.size)
        self.conn = remap[mesh.elements[self.active]]
        self.nodes = mesh.nodes[used]
        self.ndof = used.size * self.d
        self.fixed = np.zeros(self.ndof, bool)
        self.prescribed = np.zeros(self.ndof)
        self.phis = [f(mesh.nodes) for f in geometry.phi]
        self.batch = self._surface_batch(second=False)
        self._err_batch = None
        self.boundary = self._boundary_data()
        self.K_stab = self._stabilization()

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def dead_loads_only(self):
        return False

    def _surface_batch(self, second):
        mesh = self.mesh
        elem = np.concatenate([np.full(q.w.size, i) for i, q in enumerate(self.quads)])
        xi = np.concatenate([q.xi for q in self.quads])
        X = np.concatenate([q.X for q in self.quads])
        w = np.concatenate([q.w for q in self.quads])
        half = 0.5 * mesh.h_vec[None, :].repeat(elem.size, 0)
        conn_phi = mesh.elements[self.active]
        N, dN, d2N, P, n, dP = _level_set_frame(mesh, self.phis, conn_phi, elem, xi, half, second)
        grad = dN / half[:, None, :]
        g = np.einsum("mij,maj->mai", P, grad)
        kw = {}
        if second:
            if mesh.p < 2:
                raise UnsupportedOrder("equilibrium residual needs element order >= 2")
            H = d2N / (half[:, None, :, None] * half[:, None, None, :])
            dg = np.einsum("mlij,maj->mlai", dP, grad) + np.einsum("mij,majl->mlai", P, H)
            kw = dict(D=P, dP=dP, dg=dg)
        return PointBatch(elem=elem, N=N, g=g, P=P, w=w, X=X, normal=n, **kw)

    def _boundary_data(self):
        mesh, d = self.mesh, self.d
        rows = []
        for i, q in enumerate(self.quads):
            for j, face in enumerate(q.boundary_face):
                rows.append((i, q.boundary_xi[j], q.boundary_X[j], q.boundary_w[j], q.boundary_conormal[j], face))
        if not rows:
            return None
        elem = np.array([r[0] for r in rows])
        xi = np.array([r[1] for r in rows])
        X = np.array([r[2] for r in rows])
        w = np.array([r[3] for r in rows])
        nu = np.array([r[4] for r in rows])
        faces = [r[5] for r in rows]
        half = 0.5 * mesh.h_vec[None, :].repeat(elem.size, 0)
        N, dN, _, P, _, _ = _level_set_frame(mesh, self.phis, mesh.elements[self.active], elem, xi, half, False)
        g = np.einsum("mij,maj->mai", P, dN / half[:, None, :])
        # constraint projector and target per point
        Pi = np.zeros((elem.size, d, d))
        target = np.zeros((elem.size, d))
        H = np.zeros((elem.size, d))
        constrained = np.zeros(elem.size, bool)
        for k, face in enumerate(faces):
            if face in self.dirichlet:
                Pi[k] = np.eye(d)
                G = self.dirichlet[face]
                target[k] = G(X[k:k + 1])[0] if callable(G) else np.asarray(G, dtype=float)
                constrained[k] = True
            if face in self.slip:
                for v, G in self.slip[face]:
                    v = np.asarray(v, dtype=float)
                    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                        raise ValueError("slip directions must be unit vectors")
                    Pi[k] += np.outer(v, v)
                    target[k] += (G(X[k]) if callable(G) else G) * v
                constrained[k] = True
            if face in self.neumann:
                Hh = self.neumann[face]
                H[k] = Hh(X[k:k + 1])[0] if callable(Hh) else np.asarray(Hh, dtype=float)
        return dict(elem=elem, N=N, g=g, P=P, w=w, X=X, nu=nu, Pi=Pi, target=target, H=H,
                    constrained=constrained)

    def _stabilization(self):
        mesh, d, p = self.mesh, self.d, self.mesh.p
        rule = gauss_rule(d, p + 1)
        half = 0.5 * mesh.h_vec
        N, dN = shape_eval(d, p, rule.points, 1)
        grad = dN / half
        conn_phi = mesh.elements[self.active]
        ne, nq = conn_phi.shape[0], rule.points.shape[0]
        elem = np.repeat(np.arange(ne), nq)
        xi = np.tile(rule.points, (ne, 1))
        _, _, _, Pe, _, _ = _level_set_frame(mesh, self.phis, conn_phi, elem, xi,
                                             np.broadcast_to(half, (elem.size, d)), False)
        normal_part = (np.eye(d) - Pe).reshape(ne, nq, d, d)
        w = rule.weights * np.prod(half) * self.rho
        Ael = np.einsum("eqak,qbk->eab", np.einsum("qak,eqkl->eqal", grad * w[:, None, None], normal_part),
                        grad)
        n = self.conn.shape[1]
        rows = np.repeat(self.conn, n, axis=1).ravel()
        cols = np.tile(self.conn, (1, n)).ravel()
        ns = self.ndof // d
        A = sp.coo_matrix((Ael.ravel(), (rows, cols)), shape=(ns, ns)).tocsr()
        # the block acts identically on every displacement component
        return sp.kron(A, sp.identity(d), format="csr")

    def stabilization_energy(self, u):
        return 0.5 * float(u @ (self.K_stab @ u))

    def _load(self, X):
        if self.force is None:
            return None
        return self.force(X) if callable(self.force) else np.broadcast_to(self.force, X.shape)

    def residual_tangent(self, u, load_factor=1.0, tangent=True):
        U = u.reshape(-1, self.d)
        mat = self.mat

        def fn(sub):
            Ue = gather(self.conn, sub.elem, U)
            r, k = internal_point_terms(mat, sub, Ue, tangent)
            F = self._load(sub.X)
            if F is not None:
                r = r + load_factor * load_point_terms(sub, F)
            return r, k

        R, K = assemble_points(self.conn, self.d, self.ndof, self.batch, fn, tangent)
        R = R + self.K_stab @ u
        if tangent:
            K = K + self.K_stab
        if self.boundary is not None:
            Rb, Kb = self._boundary_terms(U, load_factor, tangent)
            R = R + Rb
            if tangent:
                K = K + Kb
        return R, K

    def _boundary_point_residual(self, Ue, b, lf):
        """Consistency, Nitsche and traction terms at boundary points (complex-safe)."""
        mat = self.mat
        d = self.d
        g, P, nu, Nv = b["g"], b["P"], b["nu"], b["N"]
        F = np.eye(d) + np.einsum("...mai,maj->...mij", Ue, g)
        Ft = np.swapaxes(F, -1, -2)
        Et = P @ (0.5 * (Ft @ F - np.eye(d))) @ P
        S = second_pk(mat, Et, P)
        K = F @ S
        Knu = np.einsum("...mij,mj->...mi", K, nu)
        u = np.einsum("ma,...mai->...mi", Nv, Ue)
        m = np.einsum("mij,...mj->...mi", b["Pi"], u - lf * b["target"])
        v = np.einsum("...mji,...mj->...mi", F, m)
        B = np.einsum("...mij,maj->...mai", F, g)
        Fnu = np.einsum("...mij,mj->...mi", F, nu)
        FPv = np.einsum("...mij,mjk,...mk->...mi", F, P, v)
        Snu = np.einsum("...mij,mj->...mi", S, nu)
        gSnu = np.einsum("mai,...mi->...ma", g, Snu)
        gnu = np.einsum("mai,mi->ma", g, nu)
        gv = np.einsum("mai,...mi->...ma", g, v)
        vnu = np.einsum("...mi,mi->...m", v, nu)
        cons = -Nv[..., :, None] * np.einsum("mij,...mj->...mi", b["Pi"], Knu)[..., None, :]
        nit = (m[..., None, :] * gSnu[..., :, None]
               + mat.lam * B * vnu[..., None, None]
               + mat.mu * (FPv[..., None, :] * gnu[..., :, None] + gv[..., :, None] * Fnu[..., None, :]))
        r = mat.eta * (cons + nit) * b["constrained"][:, None, None]
        r = r - lf * Nv[..., :, None] * b["H"][:, None, :]
        return r * b["w"][:, None, None]

    def _boundary_terms(self, U, lf, tangent):
        b = self.boundary
        conn = self.conn[b["elem"]]
        Ue = U[conn]
        r = self._boundary_point_residual(Ue, b, lf)
        nb, n, d = Ue.shape
        R = np.zeros(self.ndof)
        dofs = (conn[:, :, None] * d + np.arange(d)).reshape(nb, -1)
        np.add.at(R, dofs.ravel(), r.reshape(nb, -1).real.ravel())
        if not tangent:
            return R, None
        # complex-step derivative with respect to every local dof
        pert = np.eye(n * d).reshape(n * d, 1, n, d)
        Uc = Ue[None].astype(complex) + 1j * COMPLEX_STEP * pert
        rc = self._boundary_point_residual(Uc, b, lf)
        k = rc.imag / COMPLEX_STEP  # (n*d, nb, n, d): derivative of r[m, a, i] w.r.t. local dof
        k = np.moveaxis(k, 0, -1).reshape(nb, n * d, n * d)
        rows = np.repeat(dofs, n * d, axis=1).ravel()
        cols = np.tile(dofs, (1, n * d)).ravel()
        Kb = sp.coo_matrix((k.ravel(), (rows, cols)), shape=(self.ndof, self.ndof)).tocsr()
        return R, Kb

    def energy(self, u):
        U = u.reshape(-1, self.d)
        b = self.batch
        Ue = gather(self.conn, b.elem, U)
        return self.mat.eta * float(np.sum(b.w * energy_density(self.mat, b, Ue)))

    def measure(self):
        return float(np.sum(self.batch.w))

    def potential(self, u, load_factor=1.0):
        U = u.reshape(-1, self.d)
        work = 0.0
        F = self._load(self.batch.X)
        if F is not None:
            uq = np.einsum("ma,mai->mi", self.batch.N, gather(self.conn, self.batch.elem, U))
            work = load_factor * float(np.sum(self.batch.w * np.einsum("mi,mi->m", uq, F)))
        return self.energy(u) - work + self.stabilization_energy(u)

    def residual_error(self, u, cross_check=False):
        if self._err_batch is None:
            self._err_batch = self._surface_batch(second=True)
        b = self._err_batch
        U = u.reshape(-1, self.d)
        Ue = gather(self.conn, b.elem, U)
        out = point_residual(self.mat, b, Ue, force=self._load(b.X), cross_check=cross_check)
        e1 = np.sqrt(float(np.sum(b.w * np.einsum("mi,mi->m", out[0], out[0]))))
        if not cross_check:
            return e1
        return e1, np.sqrt(float(np.sum(b.w * np.einsum("mi,mi->m", out[2], out[2]))))

    def interpolate(self, fun):
        return np.asarray(fun(self.nodes), dtype=float).reshape(-1)

    def system(self, u, load_factor=1.0):
        R, K = self.residual_tangent(u, load_factor)
        return TraceSystem(residual=R, tangent=K, rho=self.rho, active_nodes=self.active_nodes)


def assemble_trace(geometry, mesh, mat, u=None, force=None, dirichlet=None, slip=None, neumann=None, rho=None):
    """Build a ``TraceModel`` and return its system at ``u`` (zero by default)."""
    model = TraceModel(geometry, mesh, mat, force=force, dirichlet=dirichlet, slip=slip,
                       neumann=neumann, rho=rho)
    u = np.zeros(model.ndof) if u is None else np.asarray(u, dtype=float)
    return model.system(u)


def nitsche_slip(model, face, direction, magnitude=0.0):
    """Add a slip constraint ``u . v_d = G_hat`` on ``face`` and rebuild the boundary data."""
    model.slip.setdefault(face, []).append((np.asarray(direction, dtype=float), magnitude))
    faces = sorted(set(model.dirichlet) | set(model.slip) | set(model.neumann))
    # boundary points are only located on faces known when the cut rules were built
    _, model.quads = detect_active(model.mesh, model.geometry, model.n_points, faces)
    model.boundary = model._boundary_data()
    return model


def stabilization(model, u):
    """Stabilization contribution ``K_stab u`` (linear in u)."""
    return model.K_stab @ np.asarray(u, dtype=float)
