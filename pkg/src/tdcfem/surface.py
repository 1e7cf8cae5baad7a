"""Conforming Surface FEM on isoparametric Lagrange meshes of manifolds."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import DanglingInterface, DegenerateDeformation, SingularMetric, UnsupportedOrder
from .geometry.parametric import EPS_METRIC
from .kernel import (PointBatch, assemble_points, energy_density, gather, internal_point_terms,
                     load_point_terms, point_residual, pressure_point_terms)
from .quadrature import gauss_rule
from .shape import reference_element_nodes, shape_eval


@dataclass
class SurfaceMesh:
    """Lagrange mesh of a q-dimensional manifold in R^d.

    ``tags`` maps a boundary (or any) tag to an array of node ids.
    ``facets`` maps a tag to rows ``(element, local face)``; local faces
    are numbered ``2 * axis + side`` in reference coordinates.
    """

    q: int
    d: int
    p: int
    nodes: np.ndarray
    elements: np.ndarray
    tags: dict = field(default_factory=dict)
    facets: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elems(self):
        return self.elements.shape[0]

    def element_size(self):
        """Mean corner-to-corner chord length along the first reference direction."""
        p1 = self.p + 1
        X = self.nodes[self.elements]
        return float(np.mean(np.linalg.norm(X[:, p1 - 1] - X[:, 0], axis=-1)))


@dataclass
class DiscreteField:
    """Nodal displacement values with a constrained-dof mask."""

    n_nodes: int
    d: int
    values: np.ndarray = None
    fixed: np.ndarray = None
    prescribed: np.ndarray = None

    def __post_init__(self):
        n = self.n_nodes * self.d
        if self.values is None:
            self.values = np.zeros(n)
        if self.fixed is None:
            self.fixed = np.zeros(n, bool)
        if self.prescribed is None:
            self.prescribed = np.zeros(n)
        if self.values.shape != (n,):
            raise ValueError(f"field needs {n} entries, got {self.values.shape}")

    @property
    def U(self):
        return self.values.reshape(self.n_nodes, self.d)


def mesh_from_patch(patch, subdivisions, p):
    """Structured isoparametric mesh of a parametric patch.

    Nodes sit on the exact geometry; node tags ``r0``/``r1``/``s0``/``s1``
    mark the reference-domain faces.
    """
    q = patch.q
    subs = (subdivisions,) * q if np.isscalar(subdivisions) else tuple(subdivisions)
    lo, hi = patch.lower, patch.upper
    counts = [n * p + 1 for n in subs]
    axes = [np.linspace(lo[k], hi[k], counts[k]) for k in range(q)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    # flatten with the first reference coordinate fastest
    R = grid.transpose(tuple(reversed(range(q))) + (q,)).reshape(-1, q)
    nodes = patch(R)
    idx = np.arange(R.shape[0]).reshape(tuple(reversed(counts))).transpose(tuple(reversed(range(q))))
    local = reference_element_nodes(q, p)
    loc_int = np.rint((local + 1) * p / 2).astype(int)
    elems = []
    for cell in np.ndindex(*subs):
        base = np.array(cell) * p
        ids = base + loc_int
        elems.append(idx[tuple(ids.T)])
    elements = np.array(elems, dtype=int)
    names = ("r", "s", "t")
    tags, facets = {}, {}
    for k in range(q):
        for side in (0, 1):
            name = f"{names[k]}{side}"
            on = np.isclose(R[:, k], hi[k] if side else lo[k])
            tags[name] = np.nonzero(on)[0]
            cells = [i for i, cell in enumerate(np.ndindex(*subs)) if cell[k] == (subs[k] - 1 if side else 0)]
            facets[name] = np.array([[c, 2 * k + side] for c in cells], dtype=int).reshape(-1, 2)
    return SurfaceMesh(q=q, d=patch.d, p=p, nodes=nodes, elements=elements, tags=tags, facets=facets)


def merge_meshes(meshes, tol=1e-10):
    """Merge meshes of equal ``q`` and ``p`` by coincident node coordinates.

    Tags and facets are concatenated per name.
    """
    all_nodes = np.concatenate([m.nodes for m in meshes])
    scale = np.ptp(all_nodes, axis=0).max() or 1.0
    ids = _unique_points(all_nodes, tol * scale)
    uniq, inverse = np.unique(ids, return_inverse=True)
    nodes = all_nodes[uniq]
    offs = np.cumsum([0] + [m.n_nodes for m in meshes])
    eoffs = np.cumsum([0] + [m.n_elems for m in meshes])
    elements, tags, facets = [], {}, {}
    for i, m in enumerate(meshes):
        remap = inverse[offs[i]:offs[i + 1]]
        elements.append(remap[m.elements])
        for name, v in m.tags.items():
            tags[name] = np.union1d(tags.get(name, np.empty(0, int)), remap[v]).astype(int)
        for name, f in m.facets.items():
            shifted = f.copy()
            shifted[:, 0] += eoffs[i]
            facets[name] = np.concatenate([facets.get(name, np.empty((0, 2), int)), shifted])
    m0 = meshes[0]
    return SurfaceMesh(q=m0.q, d=m0.d, p=m0.p, nodes=nodes, elements=np.concatenate(elements),
                       tags=tags, facets=facets)


def _unique_points(X, tol):
    tree = cKDTree(X)
    rep = np.arange(X.shape[0])
    for i, j in sorted(tree.query_pairs(tol)):
        a, b = rep[i], rep[j]
        rep[rep == max(a, b)] = min(a, b)
    return rep


def tag_nodes(mesh, name, predicate):
    """Add tag ``name`` to all nodes where ``predicate(X)`` holds."""
    mesh.tags[name] = np.nonzero(predicate(mesh.nodes))[0]
    return mesh.tags[name]


def write_mesh(path, mesh):
    with open(path, "w") as fh:
        fh.write(f"{mesh.q} {mesh.d} {mesh.p} {mesh.n_nodes} {mesh.n_elems}\n")
        for X in mesh.nodes:
            fh.write(" ".join(f"{v:.17g}" for v in X) + "\n")
        for e in mesh.elements:
            fh.write(" ".join(str(int(v)) for v in e) + "\n")
        for name in sorted(mesh.tags):
            for i in mesh.tags[name]:
                fh.write(f"{int(i)} {name}\n")


def read_mesh(path):
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    q, d, p, nn, ne = (int(v) for v in lines[0])
    nodes = np.array([[float(v) for v in ln] for ln in lines[1:1 + nn]])
    elements = np.array([[int(v) for v in ln] for ln in lines[1 + nn:1 + nn + ne]], dtype=int)
    tags = {}
    for ln in lines[1 + nn + ne:]:
        tags.setdefault(ln[1], []).append(int(ln[0]))
    return SurfaceMesh(q=q, d=d, p=p, nodes=nodes.reshape(nn, d), elements=elements.reshape(ne, -1),
                       tags={k: np.array(v, dtype=int) for k, v in tags.items()})


def _inv_small(G):
    return np.linalg.inv(G)


def surface_batch(mesh, n_gauss, second=False, conn=None, elem_offset=0):
    """Integration points of all elements of ``mesh``.

    ``conn`` overrides the connectivity (used for global numbering in
    coupled models).  With ``second=True`` the derivative data for the
    equilibrium residual is included.
    """
    q, d, p = mesh.q, mesh.d, mesh.p
    rule = gauss_rule(q, n_gauss)
    N, dN, d2N = shape_eval(q, p, rule.points, 2)
    Xe = mesh.nodes[mesh.elements]
    ne, nq, n = Xe.shape[0], N.shape[0], N.shape[1]
    J = np.einsum("eai,maq->emiq", Xe, dN)
    G = np.swapaxes(J, -1, -2) @ J
    detG = np.linalg.det(G)
    if np.any(detG <= EPS_METRIC):
        bad = int(np.argmin(detG.min(axis=1)))
        raise SingularMetric(f"degenerate isoparametric map in element {bad}")
    Gi = _inv_small(G)
    Q = J @ Gi
    g = np.einsum("emiq,maq->emai", Q, dN)
    P = Q @ np.swapaxes(J, -1, -2)
    w = rule.weights[None, :] * np.sqrt(detG)
    X = np.einsum("eai,ma->emi", Xe, N)
    normal = None
    if d == 3 and q == 2:
        c = np.cross(J[..., 0], J[..., 1])
        normal = c / np.linalg.norm(c, axis=-1, keepdims=True)
    elif d == 2 and q == 1:
        t = J[..., 0]
        c = np.stack([-t[..., 1], t[..., 0]], -1)
        normal = c / np.linalg.norm(c, axis=-1, keepdims=True)
    kw = {}
    if second:
        if p < 2:
            raise UnsupportedOrder("equilibrium residual needs element order >= 2")
        dJ = np.einsum("eai,malq->elmiq", Xe, d2N).transpose(0, 2, 1, 3, 4)  # (e, m, l, d, q)
        Jl = J[:, :, None]
        Gil = Gi[:, :, None]
        Ql = Q[:, :, None]
        dG = np.swapaxes(dJ, -1, -2) @ Jl + np.swapaxes(Jl, -1, -2) @ dJ
        dGi = -Gil @ dG @ Gil
        dQ = dJ @ Gil + Jl @ dGi
        dP = dQ @ np.swapaxes(Jl, -1, -2) + Ql @ np.swapaxes(dJ, -1, -2)
        dg = np.einsum("emliq,maq->emlai", dQ, dN) + np.einsum("emiq,maql->emlai", Q, d2N)
        kw = dict(D=Q.reshape(ne * nq, d, q), dP=dP.reshape(ne * nq, q, d, d),
                  dg=dg.reshape(ne * nq, q, n, d))
    elem = np.repeat(np.arange(ne), nq) + elem_offset
    return PointBatch(elem=elem, N=np.broadcast_to(N, (ne, nq, n)).reshape(-1, n), g=g.reshape(-1, n, d),
                      P=P.reshape(-1, d, d), w=w.ravel(), X=X.reshape(-1, d),
                      normal=None if normal is None else normal.reshape(-1, d), **kw)


def _concat_batches(batches):
    out = {}
    for name in ("elem", "N", "g", "P", "w", "X", "normal", "D", "dP", "dg"):
        vals = [getattr(b, name) for b in batches]
        out[name] = None if any(v is None for v in vals) else np.concatenate(vals)
    return PointBatch(**out)


def boundary_batch(mesh, tag, n_gauss):
    """Points on the boundary facets ``mesh.facets[tag]`` (weights in boundary measure)."""
    q, p = mesh.q, mesh.p
    fac = mesh.facets.get(tag, np.empty((0, 2), int))
    pts, wts, el = [], [], []
    for e, f in fac:
        axis, side = divmod(int(f), 2)
        if q == 1:
            xi = np.array([[1.0 if side else -1.0]])
            wq = np.ones(1)
        else:
            x, wx = np.polynomial.legendre.leggauss(n_gauss)
            xi = np.empty((n_gauss, 2))
            xi[:, axis] = 1.0 if side else -1.0
            xi[:, 1 - axis] = x
            wq = wx
        pts.append(xi)
        wts.append(wq)
        el.append(np.full(xi.shape[0], e))
    if not pts:
        return None
    xi = np.concatenate(pts)
    wq = np.concatenate(wts)
    el = np.concatenate(el)
    N, dN = shape_eval(q, p, xi, 1)
    Xe = mesh.nodes[mesh.elements[el]]
    X = np.einsum("mai,ma->mi", Xe, N)
    if q == 2:
        axes = np.array([1 - divmod(int(f), 2)[0] for _, f in fac for _ in range(n_gauss)])
        J = np.einsum("mai,maq->miq", Xe, dN)
        tang = J[np.arange(len(axes)), :, axes]
        wq = wq * np.linalg.norm(tang, axis=-1)
    return el, N, X, wq


@dataclass
class Part:
    """One mesh of a coupled model with its material and loads.

    ``force`` is a constant vector or a callable ``X -> F`` per undeformed
    measure; ``pressure`` is a follower pressure along the deformed normal,
    oriented by ``normal_hint(X)`` (a vector the normal should point along).
    """

    mesh: SurfaceMesh
    mat: object
    force: object = None
    pressure: Optional[float] = None
    normal_hint: Optional[Callable] = None
    neumann: dict = field(default_factory=dict)
    name: str = ""


@dataclass
class Constraint:
    """Strong Dirichlet data: node ids, components and a value callable ``X -> u``."""

    nodes: np.ndarray
    components: tuple
    value: Optional[Callable] = None


class SurfaceModel:
    """Global system of one or more Surface FEM meshes sharing nodes.

    The residual is the gradient of the potential for dead loads:
    ``R = eta int grad_dir M : K - int M F - oint M H - int M p n Lambda``.
    """

    def __init__(self, parts, constraints=(), n_gauss=None, tol=1e-10, shared=None):
        self.parts = list(parts)
        d = self.parts[0].mesh.d
        if any(pt.mesh.d != d for pt in self.parts):
            raise ValueError("all parts must live in the same ambient dimension")
        self.d = d
        all_nodes = np.concatenate([pt.mesh.nodes for pt in self.parts])
        scale = np.ptp(all_nodes, axis=0).max() or 1.0
        rep = _unique_points(all_nodes, tol * scale)
        uniq, inverse = np.unique(rep, return_inverse=True)
        self.nodes = all_nodes[uniq]
        offs = np.cumsum([0] + [pt.mesh.n_nodes for pt in self.parts])
        self.maps = [inverse[offs[i]:offs[i + 1]] for i in range(len(self.parts))]
        if shared:
            for i, j, ids in shared:
                partners = set(self.maps[j].tolist())
                missing = [int(k) for k in ids if int(self.maps[i][k]) not in partners]
                if missing:
                    raise DanglingInterface(f"nodes {missing[:5]} of part {i} have no partner in part {j}")
        self.ndof = self.nodes.shape[0] * d
        self.conns = [self.maps[i][pt.mesh.elements] for i, pt in enumerate(self.parts)]
        self.n_gauss = [n_gauss or pt.mesh.p + 2 for pt in self.parts]
        self.batches = [surface_batch(pt.mesh, ng) for pt, ng in zip(self.parts, self.n_gauss)]
        self._orient()
        self._err_batches = None
        self.fixed, self.prescribed = self._constraints(constraints)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    def _orient(self):
        for pt, b in zip(self.parts, self.batches):
            if pt.normal_hint is not None and b.normal is not None:
                s = np.sign(np.einsum("mi,mi->m", b.normal, pt.normal_hint(b.X)))
                b.normal = b.normal * s[:, None]

    def _constraints(self, constraints):
        fixed = np.zeros(self.ndof, bool)
        vals = np.zeros(self.ndof)
        for c in constraints:
            nodes = np.asarray(c.nodes, dtype=int)
            X = self.nodes[nodes]
            v = np.zeros((nodes.size, self.d)) if c.value is None else np.asarray(c.value(X), dtype=float)
            v = np.broadcast_to(v, (nodes.size, self.d))
            for comp in c.components:
                fixed[nodes * self.d + comp] = True
                vals[nodes * self.d + comp] = v[:, comp]
        return fixed, vals

    def apply_constraints(self, constraints):
        """Replace the strong Dirichlet data (node ids refer to ``self.nodes``)."""
        self.fixed, self.prescribed = self._constraints(constraints)

    def global_nodes(self, part, local_ids):
        return self.maps[part][np.asarray(local_ids, dtype=int)]

    def residual_tangent(self, u, load_factor=1.0, tangent=True):
        """Residual vector and tangent matrix at the flat displacement vector ``u``."""
        U = u.reshape(-1, self.d)
        R = np.zeros(self.ndof)
        K = None
        for pt, conn, b in zip(self.parts, self.conns, self.batches):
            def fn(sub, pt=pt, conn=conn):
                Ue = gather(conn, sub.elem, U)
                try:
                    r, k = internal_point_terms(pt.mat, sub, Ue, tangent)
                except np.linalg.LinAlgError as exc:
                    raise DegenerateDeformation(str(exc)) from exc
                if pt.force is not None:
                    F = pt.force(sub.X) if callable(pt.force) else np.broadcast_to(pt.force, sub.X.shape)
                    r = r + load_factor * load_point_terms(sub, F)
                if pt.pressure is not None:
                    rp, kp, _ = pressure_point_terms(sub, Ue, load_factor * pt.pressure, tangent)
                    r = r + rp
                    if tangent:
                        k = k + kp
                return r, k
            Rp, Kp = assemble_points(conn, self.d, self.ndof, b, fn, tangent)
            R += Rp
            if tangent:
                K = Kp if K is None else K + Kp
            for tag, H in pt.neumann.items():
                R += load_factor * self._neumann(pt, conn, tag, H)
        return R, K

    def _neumann(self, pt, conn, tag, H):
        data = boundary_batch(pt.mesh, tag, self.n_gauss[self.parts.index(pt)])
        out = np.zeros(self.ndof)
        if data is None:
            return out
        el, N, X, w = data
        Hv = H(X) if callable(H) else np.broadcast_to(H, X.shape)
        contrib = -np.einsum("ma,mi->mai", N, Hv) * w[:, None, None]
        dofs = (conn[el][:, :, None] * self.d + np.arange(self.d)).reshape(el.size, -1)
        np.add.at(out, dofs.ravel(), contrib.reshape(el.size, -1).ravel())
        return out

    def energy(self, u):
        """Stored energy ``sum over parts of eta int 1/2 S:E_tang dGamma_X``."""
        U = u.reshape(-1, self.d)
        e = 0.0
        for pt, conn, b in zip(self.parts, self.conns, self.batches):
            Ue = gather(conn, b.elem, U)
            e += pt.mat.eta * float(np.sum(b.w * energy_density(pt.mat, b, Ue)))
        return e

    def external_work(self, u, load_factor=1.0):
        """Work of dead body loads and tractions (follower pressure excluded)."""
        U = u.reshape(-1, self.d)
        W = 0.0
        for pt, conn, b in zip(self.parts, self.conns, self.batches):
            if pt.force is not None:
                F = pt.force(b.X) if callable(pt.force) else np.broadcast_to(pt.force, b.X.shape)
                uq = np.einsum("ma,mai->mi", b.N, gather(conn, b.elem, U))
                W += load_factor * float(np.sum(b.w * np.einsum("mi,mi->m", uq, F)))
            for tag, H in pt.neumann.items():
                data = boundary_batch(pt.mesh, tag, self.n_gauss[self.parts.index(pt)])
                if data is None:
                    continue
                el, N, X, w = data
                Hv = H(X) if callable(H) else np.broadcast_to(H, X.shape)
                uq = np.einsum("ma,mai->mi", N, U[conn[el]])
                W += load_factor * float(np.sum(w * np.einsum("mi,mi->m", uq, Hv)))
        return W

    def potential(self, u, load_factor=1.0):
        return self.energy(u) - self.external_work(u, load_factor)

    @property
    def dead_loads_only(self):
        return all(pt.pressure is None for pt in self.parts)

    def error_batches(self):
        if self._err_batches is None:
            self._err_batches = [surface_batch(pt.mesh, ng + 1, second=True)
                                 for pt, ng in zip(self.parts, self.n_gauss)]
            for pt, b in zip(self.parts, self._err_batches):
                if pt.normal_hint is not None and b.normal is not None:
                    s = np.sign(np.einsum("mi,mi->m", b.normal, pt.normal_hint(b.X)))
                    b.normal = b.normal * s[:, None]
        return self._err_batches

    def residual_error(self, u, cross_check=False):
        """Element-interior L2 norm of ``div sigma + f`` over all parts.

        The integral runs over the undeformed elements.  With
        ``cross_check=True`` also returns the value from the Cauchy route.
        """
        U = u.reshape(-1, self.d)
        tot = tot2 = 0.0
        for pt, conn, b in zip(self.parts, self.conns, self.error_batches()):
            Ue = gather(conn, b.elem, U)
            F = None
            if pt.force is not None:
                F = pt.force(b.X) if callable(pt.force) else np.broadcast_to(pt.force, b.X.shape)
            out = point_residual(pt.mat, b, Ue, force=F, pressure=pt.pressure, cross_check=cross_check)
            tot += float(np.sum(b.w * np.einsum("mi,mi->m", out[0], out[0])))
            if cross_check:
                tot2 += float(np.sum(b.w * np.einsum("mi,mi->m", out[2], out[2])))
        return (np.sqrt(tot), np.sqrt(tot2)) if cross_check else np.sqrt(tot)

    def interpolate(self, fun):
        """Nodal interpolation of ``fun(X) -> (n, d)`` as a flat vector."""
        return np.asarray(fun(self.nodes), dtype=float).reshape(-1)


def assemble_surface(mesh, mat, u, force=None, neumann=None, n_gauss=None, tangent=True):
    """Residual and tangent of a single mesh (no constraints applied)."""
    model = SurfaceModel([Part(mesh=mesh, mat=mat, force=force, neumann=neumann or {})], n_gauss=n_gauss)
    return model.residual_tangent(np.asarray(u, dtype=float), tangent=tangent)


def coupled_assembly(parts, constraints=(), **kw):
    """Global model from several (mesh, material) parts sharing coincident nodes."""
    parts = [pt if isinstance(pt, Part) else Part(mesh=pt[0], mat=pt[1]) for pt in parts]
    return SurfaceModel(parts, constraints, **kw)
