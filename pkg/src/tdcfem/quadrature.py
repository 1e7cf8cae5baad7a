"""Gauss rules and integration points on zero level sets cut through box elements.

Cut rules follow a dimension-reduction strategy: inside an element (or a
sub-box) a height direction is chosen along which the level set is
monotone, so that every line in that direction crosses the zero set at most
once.  The zero set is then the graph of an implicit function over a base
region of one dimension less, which is itself integrated recursively.  The
interpolated level set is a tensor-product polynomial, so restrictions to
axis-parallel lines are polynomials and their roots are found exactly.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from string import ascii_lowercase

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DegenerateCut, NoIntersection, NonConvergedCut
from .shape import _monomial_coefficients, lagrange_1d

TOL_CUT = 1e-12
MAX_DEPTH = 8
MONOTONE_MARGIN = 1e-3


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    order: int


def gauss_rule(q, n):
    """Tensor-product Gauss-Legendre rule on ``[-1, 1]**q`` with ``n`` points per direction."""
    if not 1 <= q <= 3 or n < 1:
        raise ValueError(f"invalid rule request q={q}, n={n}")
    x, w = np.polynomial.legendre.leggauss(n)
    grids = np.meshgrid(*([x] * q), indexing="ij")
    wgrids = np.meshgrid(*([w] * q), indexing="ij")
    # first coordinate fastest, matching the shape-function node order
    axes = tuple(reversed(range(q)))
    pts = np.stack([g.transpose(axes).ravel() for g in grids], axis=-1)
    wts = np.prod(np.stack([g.transpose(axes).ravel() for g in wgrids], axis=-1), axis=-1)
    return QuadRule(points=pts, weights=wts, order=2 * n - 1)


@lru_cache(maxsize=None)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def _gauss_interval(a, b, n):
    x, w = _leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


class TensorPoly:
    """Tensor-product Lagrange polynomial on ``[-1, 1]**m`` from nodal values.

    ``values`` has shape ``(p + 1,) * m`` and is indexed by node position
    along each coordinate in coordinate order.
    """

    def __init__(self, values, p):
        self.values = np.asarray(values, dtype=float)
        self.p = p
        self.m = self.values.ndim
        self.scale = float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @classmethod
    def from_element_vector(cls, v, m, p):
        """Build from a flat vector in lexicographic (first coordinate fastest) order."""
        arr = np.asarray(v, dtype=float).reshape((p + 1,) * m)
        return cls(arr.transpose(tuple(reversed(range(m)))), p)

    def _contract(self, mats):
        m = self.m
        idx = ascii_lowercase[:m]
        spec = idx + "," + ",".join("z" + c for c in idx) + "->z"
        return np.einsum(spec, self.values, *mats)

    def __call__(self, x):
        x = np.atleast_2d(x)
        return self._contract([lagrange_1d(self.p, x[:, j])[0] for j in range(self.m)])

    def grad(self, x):
        x = np.atleast_2d(x)
        L = [lagrange_1d(self.p, x[:, j], 1) for j in range(self.m)]
        out = np.empty((x.shape[0], self.m))
        for k in range(self.m):
            out[:, k] = self._contract([L[j][1 if j == k else 0] for j in range(self.m)])
        return out

    def hess(self, x):
        x = np.atleast_2d(x)
        L = [lagrange_1d(self.p, x[:, j], 2) for j in range(self.m)]
        out = np.empty((x.shape[0], self.m, self.m))
        for k in range(self.m):
            for l in range(k, self.m):
                orders = [0] * self.m
                orders[k] += 1
                orders[l] += 1
                out[:, k, l] = out[:, l, k] = self._contract([L[j][orders[j]] for j in range(self.m)])
        return out

    def restrict(self, axis, value):
        """Polynomial in the remaining coordinates with ``x[axis] = value``."""
        L = lagrange_1d(self.p, np.array([value]))[0][0]
        return TensorPoly(np.tensordot(self.values, L, axes=([axis], [0])), self.p)

    def line_coefficients(self, axis, others):
        """Monomial coefficients in ``x[axis]`` along lines through ``others``.

        ``others`` holds the remaining coordinates, shape ``(n, m - 1)``.
        """
        others = np.atleast_2d(others)
        n = others.shape[0]
        nodes = np.linspace(-1.0, 1.0, self.p + 1)
        pts = np.empty((n, self.p + 1, self.m))
        rest = [j for j in range(self.m) if j != axis]
        for c, j in enumerate(rest):
            pts[:, :, j] = others[:, c, None]
        pts[:, :, axis] = nodes
        vals = self(pts.reshape(-1, self.m)).reshape(n, self.p + 1)
        return vals @ _monomial_coefficients(self.p).T


def _horner(c, t):
    v = np.zeros_like(t)
    dv = np.zeros_like(t)
    for k in range(c.shape[-1] - 1, -1, -1):
        dv = dv * t + v
        v = v * t + c[..., k]
    return v, dv


def _bracketed_roots(c, a, b, iters=100):
    """Single root of each polynomial row of ``c`` in ``[a, b]`` (sign change assumed)."""
    lo = np.full(c.shape[0], a, dtype=float)
    hi = np.full(c.shape[0], b, dtype=float)
    flo, _ = _horner(c, lo)
    t = 0.5 * (lo + hi)
    for _ in range(iters):
        f, df = _horner(c, t)
        left = np.sign(f) == np.sign(flo)
        lo = np.where(left, t, lo)
        flo = np.where(left, f, flo)
        hi = np.where(left, hi, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = t - f / df
        bad = ~np.isfinite(tn) | (tn <= lo) | (tn >= hi)
        tn = np.where(bad, 0.5 * (lo + hi), tn)
        done = (np.abs(tn - t) < 1e-16) | (f == 0)
        t = np.where(f == 0, t, tn)
        if np.all(done) or np.all(hi - lo < 1e-15):
            break
    return t


def _poly_roots_1d(poly, lo, hi, ztol):
    """Real roots of a one-dimensional ``TensorPoly`` inside ``[lo, hi]``."""
    c = (poly.values @ _monomial_coefficients(poly.p).T)
    c = np.where(np.abs(c) <= ztol, 0.0, c)
    c = np.trim_zeros(c, "b")
    if c.size <= 1:
        return np.empty(0)
    r = npoly.polyroots(c)
    scale = max(hi - lo, 1e-300)
    r = r[np.abs(r.imag) <= 1e-7 * scale].real
    r = r[(r >= lo - 1e-12 * scale) & (r <= hi + 1e-12 * scale)]
    if r.size == 0:
        return r
    for _ in range(4):
        v, dv = _horner(c[None, :], r)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dv != 0, v / dv, 0.0)
        r = r - np.nan_to_num(step)
    return np.unique(np.clip(r, lo, hi))


def _sample_grid(lo, hi, n):
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(lo))


class _Funcs:
    """Sign/monotonicity diagnostics of polynomials over a sub-box."""

    def __init__(self, poly, lo, hi, ztol):
        self.poly = poly
        n = poly.p + 3
        pts = _sample_grid(lo, hi, n)
        self.vals = poly(pts)
        self.grads = poly.grad(pts)
        self.ztol = ztol

    @property
    def trivial(self):
        return np.max(np.abs(self.vals)) <= self.ztol and np.max(np.abs(self.grads)) <= self.ztol

    @property
    def may_vanish(self):
        if self.trivial:
            return False
        return np.min(self.vals) <= self.ztol and np.max(self.vals) >= -self.ztol

    def monotone_score(self, k):
        """Margin of ``d/dx_k`` away from zero (negative when it changes sign)."""
        dk = self.grads[:, k]
        gmax = np.max(np.linalg.norm(self.grads, axis=1))
        if gmax == 0:
            return -1.0, 0
        s = np.sign(np.median(dk))
        return float(np.min(s * dk) / gmax), int(s)


def _split(lo, hi):
    mid = 0.5 * (lo + hi)
    m = len(lo)
    boxes = []
    for corner in range(2**m):
        a = lo.copy()
        b = hi.copy()
        for j in range(m):
            if corner >> j & 1:
                a[j] = mid[j]
            else:
                b[j] = mid[j]
        boxes.append((a, b))
    return boxes


def _rule_1d(polys, member, lo, hi, n, ztol):
    """Gauss points on the subset of ``[lo, hi]`` selected by ``member``."""
    cuts = [lo, hi]
    for f in polys:
        cuts.extend(_poly_roots_1d(f, lo, hi, ztol))
    cuts = np.unique(np.clip(cuts, lo, hi))
    pts, wts = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 1e-15 * max(hi - lo, 1.0):
            continue
        if member(np.array([[0.5 * (a + b)]]))[0]:
            x, w = _gauss_interval(a, b, n)
            pts.append(x)
            wts.append(w)
    if not pts:
        return np.empty((0, 1)), np.empty(0)
    return np.concatenate(pts)[:, None], np.concatenate(wts)


def _rule_2d(polys, member, lo, hi, n, ztol, depth=0):
    """Gauss points on the subset of a rectangle selected by ``member``."""
    info = [_Funcs(f, lo, hi, ztol) for f in polys]
    active = [fi for fi in info if fi.may_vanish]
    if not active:
        if member(0.5 * (lo + hi)[None, :])[0]:
            x, wx = _gauss_interval(lo[0], hi[0], n)
            y, wy = _gauss_interval(lo[1], hi[1], n)
            P = np.stack(np.meshgrid(x, y, indexing="ij"), -1).reshape(-1, 2)
            return P, np.outer(wx, wy).ravel()
        return np.empty((0, 2)), np.empty(0)
    best, k = -np.inf, None
    for kk in range(2):
        score = min(fi.monotone_score(kk)[0] for fi in active)
        if score > best:
            best, k = score, kk
    if best <= MONOTONE_MARGIN:
        if depth >= MAX_DEPTH:
            # tangential contact (double root) cannot be isolated; the box is
            # negligible, so keep the tensor points whose midpoint test passes
            x, wx = _gauss_interval(lo[0], hi[0], n)
            y, wy = _gauss_interval(lo[1], hi[1], n)
            P = np.stack(np.meshgrid(x, y, indexing="ij"), -1).reshape(-1, 2)
            keep = member(P)
            return P[keep], np.outer(wx, wy).ravel()[keep]
        parts = [_rule_2d(polys, member, a, b, n, ztol, depth + 1) for a, b in _split(lo, hi)]
        return np.concatenate([p for p, _ in parts]), np.concatenate([w for _, w in parts])
    b_ax = 1 - k
    base_polys = []
    for fi in active:
        base_polys.append(fi.poly.restrict(k, lo[k]))
        base_polys.append(fi.poly.restrict(k, hi[k]))
    cuts = [lo[b_ax], hi[b_ax]]
    for f in base_polys:
        cuts.extend(_poly_roots_1d(f, lo[b_ax], hi[b_ax], ztol))
    cuts = np.unique(np.clip(cuts, lo[b_ax], hi[b_ax]))
    pts, wts = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 1e-15:
            continue
        xb, wb = _gauss_interval(a, b, n)
        roots = []
        for fi in active:
            c = fi.poly.line_coefficients(k, xb[:, None])
            fl, _ = _horner(c, np.full(xb.shape, lo[k]))
            fh, _ = _horner(c, np.full(xb.shape, hi[k]))
            t = _bracketed_roots(c, lo[k], hi[k])
            t = np.where(np.sign(fl) * np.sign(fh) <= 0, t, np.nan)
            roots.append(t)
        roots = np.stack(roots, axis=1)
        for i in range(xb.size):
            r = np.sort(roots[i][np.isfinite(roots[i])])
            edges = np.concatenate([[lo[k]], np.clip(r, lo[k], hi[k]), [hi[k]]])
            for ea, eb in zip(edges[:-1], edges[1:]):
                if eb - ea <= 1e-15:
                    continue
                mid = np.empty((1, 2))
                mid[0, b_ax] = xb[i]
                mid[0, k] = 0.5 * (ea + eb)
                if member(mid)[0]:
                    t, wt = _gauss_interval(ea, eb, n)
                    P = np.empty((n, 2))
                    P[:, b_ax] = xb[i]
                    P[:, k] = t
                    pts.append(P)
                    wts.append(wb[i] * wt)
    if not pts:
        return np.empty((0, 2)), np.empty(0)
    return np.concatenate(pts), np.concatenate(wts)


def _base_rule(polys, member, lo, hi, n, ztol):
    if len(lo) == 1:
        return _rule_1d(polys, member, lo[0], hi[0], n, ztol)
    return _rule_2d(polys, member, lo, hi, n, ztol)


def surface_points(poly, lo, hi, n, ztol, scale=None, depth=0):
    """Points and weights on the zero set of ``poly`` inside ``[lo, hi]``.

    Coordinates are reference coordinates of ``poly``; ``scale`` holds the
    physical half-widths per axis so that weights measure physical
    length/area.  Returns ``(points, weights)``.
    """
    m = poly.m
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    scale = np.ones(m) if scale is None else np.asarray(scale, dtype=float)
    info = _Funcs(poly, lo, hi, ztol)
    if not info.may_vanish:
        return np.empty((0, m)), np.empty(0)
    # height direction: largest physical-gradient margin
    best, k, s = -np.inf, None, 0
    for kk in range(m):
        score, sign = info.monotone_score(kk)
        score *= 1.0 / scale[kk] * np.min(scale)
        if score > best:
            best, k, s = score, kk, sign
    if best <= MONOTONE_MARGIN:
        if depth >= MAX_DEPTH:
            raise DegenerateCut("zero set not isolated after maximum subdivision")
        parts = [surface_points(poly, a, b, n, ztol, scale, depth + 1) for a, b in _split(lo, hi)]
        return np.concatenate([p for p, _ in parts]), np.concatenate([w for _, w in parts])
    f_lo = poly.restrict(k, lo[k])
    f_hi = poly.restrict(k, hi[k])

    def member(y):
        return (s * f_lo(y) <= 0) & (s * f_hi(y) > 0)

    rest = [j for j in range(m) if j != k]
    yb, wb = _base_rule([f_lo, f_hi], member, lo[rest], hi[rest], n, ztol)
    if yb.shape[0] == 0:
        return np.empty((0, m)), np.empty(0)
    c = poly.line_coefficients(k, yb)
    t = _bracketed_roots(c, lo[k], hi[k])
    pts = np.empty((yb.shape[0], m))
    pts[:, rest] = yb
    pts[:, k] = t
    g = poly.grad(pts) / scale
    w = wb * np.prod(scale[rest]) * np.linalg.norm(g, axis=1) / np.abs(g[:, k])
    return pts, w


def line_points(poly, lo, hi, own_hi=False, ztol=0.0):
    """Roots of a one-dimensional ``poly`` in ``[lo, hi)`` (closed if ``own_hi``)."""
    r = _poly_roots_1d(poly, lo, hi, ztol)
    tol = 1e-12 * (hi - lo)
    keep = (r < hi - tol) | own_hi
    return r[keep]


@dataclass
class CutCellQuadrature:
    """Integration points of one background element.

    Surface points carry reference coordinates ``xi`` (element-local, in
    ``[-1, 1]**d``), physical coordinates ``X`` and weights ``w``.
    Boundary points additionally carry the outward conormal ``conormal``
    and the name of the domain face they lie on.
    """

    element: int
    xi: np.ndarray
    X: np.ndarray
    w: np.ndarray
    boundary_xi: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    boundary_X: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    boundary_w: np.ndarray = field(default_factory=lambda: np.empty(0))
    boundary_conormal: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    boundary_face: list = field(default_factory=list)
    order: int = 0

    @property
    def measure(self):
        return float(np.sum(self.w))


FACE_AXES = {"x0": (0, 0), "x1": (0, 1), "y0": (1, 0), "y1": (1, 1), "z0": (2, 0), "z1": (2, 1)}


def _to_phys(xi, center, half):
    return center + half * xi


def cut_element_quadrature(element, lower, upper, phi_nodal, p, n_points, psi_nodal=None,
                           phi2_nodal=None, boundary_faces=(), own_upper=None):
    """Cut-cell rule for an axis-aligned background element.

    Parameters
    ----------
    element : int
        Element id stored in the result.
    lower, upper : array_like
        Physical corners of the element box.
    phi_nodal : array_like
        Nodal values of the interpolated level set in lexicographic order.
    p : int
        Interpolation order of the level set.
    n_points : int
        Gauss points per direction of the base rules.
    psi_nodal : None
        Slave level sets are not handled by the cut rules.
    phi2_nodal : array_like, optional
        Second level set for curves in R^3.
    boundary_faces : sequence of str
        Names (``"x0"``, ``"y1"``, ...) of element faces lying on the domain
        box where manifold boundary points are wanted.
    own_upper : sequence of bool, optional
        Per axis, whether roots at the upper end of a face line belong to
        this element (true for elements touching the upper domain face).
    """
    if psi_nodal is not None:
        raise NotImplementedError("slave level sets are not supported by the cut rules")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = lower.size
    center = 0.5 * (lower + upper)
    half = 0.5 * (upper - lower)
    own_upper = np.zeros(d, bool) if own_upper is None else np.asarray(own_upper, bool)
    poly = TensorPoly.from_element_vector(phi_nodal, d, p)
    ztol = 1e-14 * max(poly.scale, 1e-300)
    if phi2_nodal is not None:
        poly2 = TensorPoly.from_element_vector(phi2_nodal, d, p)
        return _curve_quadrature(element, poly, poly2, center, half, n_points, boundary_faces, p)
    lo, hi = -np.ones(d), np.ones(d)
    xi, w = surface_points(poly, lo, hi, n_points, ztol, half)
    out = CutCellQuadrature(element=element, xi=xi, X=_to_phys(xi, center, half), w=w, order=p)
    bxi, bw, bnu, bface = [], [], [], []
    for face in boundary_faces:
        axis, side = FACE_AXES[face]
        val = 1.0 if side else -1.0
        fpoly = poly.restrict(axis, val)
        rest = [j for j in range(d) if j != axis]
        if d == 2:
            j = rest[0]
            r = line_points(fpoly, -1.0, 1.0, own_hi=bool(own_upper[j]), ztol=ztol)
            pts = np.empty((r.size, 2))
            pts[:, axis] = val
            pts[:, j] = r
            wts = np.ones(r.size)
        else:
            y, wts = surface_points(fpoly, -np.ones(2), np.ones(2), n_points, ztol, half[rest])
            pts = np.empty((y.shape[0], 3))
            pts[:, axis] = val
            pts[:, rest] = y
        if pts.shape[0] == 0:
            continue
        g = poly.grad(pts) / half
        N = g / np.linalg.norm(g, axis=1, keepdims=True)
        nu_face = np.zeros(d)
        nu_face[axis] = 1.0 if side else -1.0
        nu = nu_face - (N @ nu_face)[:, None] * N
        nu /= np.linalg.norm(nu, axis=1, keepdims=True)
        bxi.append(pts)
        bw.append(wts)
        bnu.append(nu)
        bface.extend([face] * pts.shape[0])
    if bxi:
        out.boundary_xi = np.concatenate(bxi)
        out.boundary_X = _to_phys(out.boundary_xi, center, half)
        out.boundary_w = np.concatenate(bw)
        out.boundary_conormal = np.concatenate(bnu)
        out.boundary_face = bface
    else:
        out.boundary_xi = np.empty((0, d))
        out.boundary_X = np.empty((0, d))
        out.boundary_conormal = np.empty((0, d))
    return out


def _curve_tangent(poly1, poly2, pts, half):
    g1 = poly1.grad(pts) / half
    g2 = poly2.grad(pts) / half
    return np.cross(g2, g1)


def _newton_curve(poly1, poly2, pts, iters=30):
    """Project points onto ``poly1 = poly2 = 0`` by minimum-norm Newton steps."""
    x = pts.copy()
    for _ in range(iters):
        f = np.stack([poly1(x), poly2(x)], axis=1)
        J = np.stack([poly1.grad(x), poly2.grad(x)], axis=1)
        JJt = J @ np.swapaxes(J, 1, 2)
        try:
            step = np.einsum("nji,nj->ni", J, np.linalg.solve(JJt, f[..., None])[..., 0])
        except np.linalg.LinAlgError:
            break
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    f = np.stack([poly1(x), poly2(x)], axis=1)
    return x, np.max(np.abs(f), axis=1)


def _solve_on_slice(poly1, poly2, k, t, guess, iters=40):
    """Solve for the two free coordinates at ``x[k] = t`` by Newton."""
    rest = [j for j in range(3) if j != k]
    x = guess.copy()
    x[..., k] = t
    for _ in range(iters):
        f = np.stack([poly1(x), poly2(x)], axis=1)
        J = np.stack([poly1.grad(x)[:, rest], poly2.grad(x)[:, rest]], axis=1)
        step = np.linalg.solve(J, f[..., None])[..., 0]
        x[:, rest] -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    f = np.stack([poly1(x), poly2(x)], axis=1)
    if np.max(np.abs(f)) > 1e-10 * max(poly1.scale, poly2.scale, 1.0):
        raise NonConvergedCut("curve point projection did not converge")
    return x


def _curve_quadrature(element, poly1, poly2, center, half, n, boundary_faces, p):
    """Integration points on a curve given by two level sets inside an element.

    Assumes one connected segment per element, monotone in its dominant
    tangent direction.
    """
    lo, hi = -np.ones(3), np.ones(3)
    seeds = _sample_grid(lo, hi, p + 2)
    x, res = _newton_curve(poly1, poly2, seeds)
    tol = 1e-9
    ok = (res <= 1e-11 * max(poly1.scale, poly2.scale, 1.0)) & np.all(np.abs(x) <= 1 + tol, axis=1)
    empty = CutCellQuadrature(element=element, xi=np.empty((0, 3)), X=np.empty((0, 3)), w=np.empty(0),
                              boundary_xi=np.empty((0, 3)), boundary_X=np.empty((0, 3)),
                              boundary_conormal=np.empty((0, 3)), order=p)
    if not np.any(ok):
        return empty
    x0 = x[ok][0]
    T = _curve_tangent(poly1, poly2, x0[None, :], half)[0]
    k = int(np.argmax(np.abs(T) / half))
    rest = [j for j in range(3) if j != k]

    def inside(pt):
        return np.all(np.abs(pt[rest]) <= 1 + tol)

    def march(direction):
        # walk from x0 along x_k until the curve leaves the element box
        step = direction * 2.0 / (4 * (p + 1))
        cur = x0.copy()
        while True:
            t_next = cur[k] + step
            if (direction > 0 and t_next >= 1.0) or (direction < 0 and t_next <= -1.0):
                t_next = float(np.sign(direction))
                cand = _solve_on_slice(poly1, poly2, k, t_next, cur[None, :])[0]
                if inside(cand):
                    return cand
            else:
                cand = _solve_on_slice(poly1, poly2, k, t_next, cur[None, :])[0]
                if inside(cand):
                    cur = cand
                    continue
            # bisect on x_k for the exit through a side face
            a, b = cur[k], t_next
            for _ in range(60):
                mid = 0.5 * (a + b)
                c = _solve_on_slice(poly1, poly2, k, mid, cur[None, :])[0]
                if inside(c):
                    a, cur = mid, c
                else:
                    b = mid
            return cur

    end_a = march(-1.0)
    end_b = march(+1.0)
    ta, tb = end_a[k], end_b[k]
    if tb - ta <= 1e-14:
        return empty
    t, wt = _gauss_interval(ta, tb, n)
    guess = end_a[None, :] + (t[:, None] - ta) / (tb - ta) * (end_b - end_a)[None, :]
    pts = _solve_on_slice(poly1, poly2, k, t, guess)
    Tp = _curve_tangent(poly1, poly2, pts, half)
    w = wt * half[k] * np.linalg.norm(Tp, axis=1) / np.abs(Tp[:, k])
    out = CutCellQuadrature(element=element, xi=pts, X=_to_phys(pts, center, half), w=w, order=p)
    bxi, bnu, bface = [], [], []
    for end, sign in ((end_a, -1.0), (end_b, 1.0)):
        for face in boundary_faces:
            axis, side = FACE_AXES[face]
            if abs(end[axis] - (1.0 if side else -1.0)) <= 1e-9:
                Te = _curve_tangent(poly1, poly2, end[None, :], half)[0]
                Te = Te / np.linalg.norm(Te)
                # outward: away from the segment interior
                Te = Te * np.sign(Te[k]) * sign
                bxi.append(end)
                bnu.append(Te)
                bface.append(face)
                break
    out.boundary_xi = np.array(bxi).reshape(-1, 3)
    out.boundary_X = _to_phys(out.boundary_xi, center, half)
    out.boundary_w = np.ones(len(bxi))
    out.boundary_conormal = np.array(bnu).reshape(-1, 3)
    out.boundary_face = bface
    return out


def check_active(quad):
    """Raise ``NoIntersection`` when a flagged element carries no points."""
    if quad.xi.shape[0] == 0:
        raise NoIntersection(f"element {quad.element} is not cut by the zero level set")
    return quad


def write_vtk_points(path, quads):
    """Dump integration points (surface and boundary) as legacy-VTK polydata."""
    from .vtk import write_point_cloud

    X = [q.X for q in quads] + [q.boundary_X for q in quads if q.boundary_X.size]
    w = [q.w for q in quads] + [q.boundary_w for q in quads if q.boundary_X.size]
    kind = [np.zeros(q.w.size) for q in quads] + [np.ones(q.boundary_w.size) for q in quads if q.boundary_X.size]
    X = np.concatenate(X) if X else np.empty((0, 3))
    write_point_cloud(path, X, {"weight": np.concatenate(w) if w else np.empty(0),
                                "boundary": np.concatenate(kind) if kind else np.empty(0)})
