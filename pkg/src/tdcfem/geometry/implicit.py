"""Geometric and differential quantities on level-set manifolds.

Codimension 1 uses one level set, codimension 2 (curves in R^3) uses two.
The manifold is bounded by an axis-aligned domain of definition and,
optionally, slave level sets ``psi_i >= 0``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ParallelGradients, SingularDeformation, ZeroGradient

EPS = 1e-14
FD_STEP = 1e-6

FACE_NAMES = ("x0", "x1", "y0", "y1", "z0", "z1")


@dataclass(frozen=True)
class LevelSet:
    """Scalar field with gradient (and optional Hessian) callables.

    All callables take points of shape ``(..., d)``.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, X):
        return np.asarray(self.value(np.asarray(X, dtype=float)), dtype=float)

    def grad(self, X):
        return np.asarray(self.gradient(np.asarray(X, dtype=float)), dtype=float)

    def hess(self, X):
        X = np.asarray(X, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(X), dtype=float)
        d = X.shape[-1]
        cols = []
        for k in range(d):
            e = np.zeros(d)
            e[k] = FD_STEP
            cols.append((self.grad(X + e) - self.grad(X - e)) / (2 * FD_STEP))
        return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class ImplicitGeometry:
    """Level-set description of a bounded manifold.

    ``domain_box`` is ``(lower, upper)``.  Boundary parts name faces of the
    box (``"x0"`` is the face ``X = lower[0]``, ``"y1"`` the face
    ``Y = upper[1]`` and so on) or slave level sets (``"psi0"``, ...).
    """

    d: int
    phi: tuple
    domain_box: tuple
    psi: tuple = ()
    dirichlet_parts: tuple = ()
    neumann_parts: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.codim not in (1, 2) or self.codim >= self.d:
            raise ValueError(f"unsupported codimension {self.codim} in R^{self.d}")
        overlap = set(self.dirichlet_parts) & set(self.neumann_parts)
        if overlap:
            raise ValueError(f"boundary parts both Dirichlet and Neumann: {sorted(overlap)}")

    @property
    def codim(self):
        return len(self.phi)

    @property
    def q(self):
        return self.d - self.codim

    @property
    def lower(self):
        return np.asarray(self.domain_box[0], dtype=float)

    @property
    def upper(self):
        return np.asarray(self.domain_box[1], dtype=float)

    @property
    def on_manifold_tol(self):
        return 1e-8 * float(np.linalg.norm(self.upper - self.lower))

    def contains(self, X, tol=None):
        """True where ``X`` lies on the bounded zero set (within tolerance)."""
        X = np.asarray(X, dtype=float)
        tol = self.on_manifold_tol if tol is None else tol
        ok = np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=-1)
        for f in self.phi:
            ok &= np.abs(f(X)) <= tol
        for s in self.psi:
            ok &= s(X) >= -tol
        return ok


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _T(A):
    return np.swapaxes(A, -1, -2)


@dataclass
class PointFrameImpl:
    """Per-point quantities of an implicit manifold, undeformed and deformed."""

    N_star: list
    n_star: list
    N: list
    n: list
    P: np.ndarray
    p: np.ndarray
    F_omega: np.ndarray
    F_gamma: np.ndarray
    Lambda: np.ndarray
    W: np.ndarray
    T: Optional[np.ndarray] = None
    t: Optional[np.ndarray] = None
    T_star: Optional[np.ndarray] = None
    t_star: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


def _classical_gradient(F_omega):
    detF = np.linalg.det(F_omega)
    if np.any(detF <= EPS):
        raise SingularDeformation(f"det F_Omega = {np.min(detF):.3e}")
    return detF, np.linalg.inv(F_omega)


def frame_codim1(N_star, grad_u=None):
    """Frame from the level-set gradient ``N_star`` and ``grad_X u``."""
    N_star = np.asarray(N_star, dtype=float)
    d = N_star.shape[-1]
    if np.any(np.linalg.norm(N_star, axis=-1) <= EPS):
        raise ZeroGradient("level-set gradient vanishes")
    I = np.eye(d)
    if grad_u is None:
        grad_u = np.zeros(N_star.shape[:-1] + (d, d))
    F_omega = I + grad_u
    detF, Finv = _classical_gradient(F_omega)
    n_star = np.einsum("...ji,...j->...i", Finv, N_star)
    N, n = _unit(N_star), _unit(n_star)
    P = I - _outer(N, N)
    p = I - _outer(n, n)
    F_gamma = I + grad_u @ P
    Lam = np.linalg.norm(n_star, axis=-1) / np.linalg.norm(N_star, axis=-1) * detF
    W = p @ _T(Finv)
    return PointFrameImpl(N_star=[N_star], n_star=[n_star], N=[N], n=[n], P=P, p=p,
                          F_omega=F_omega, F_gamma=F_gamma, Lambda=Lam, W=W)


def frame_codim2(N1_star, N2_star, grad_u=None):
    """Frame of a curve in R^3 given by two level-set gradients."""
    N1_star = np.asarray(N1_star, dtype=float)
    N2_star = np.asarray(N2_star, dtype=float)
    T_star = np.cross(N2_star, N1_star)
    scale = np.linalg.norm(N1_star, axis=-1) * np.linalg.norm(N2_star, axis=-1)
    if np.any(np.linalg.norm(T_star, axis=-1) <= EPS * np.maximum(scale, 1.0)):
        raise ParallelGradients("level-set gradients are (nearly) parallel")
    I = np.eye(3)
    if grad_u is None:
        grad_u = np.zeros(N1_star.shape[:-1] + (3, 3))
    F_omega = I + grad_u
    detF, Finv = _classical_gradient(F_omega)
    n1_star = np.einsum("...ji,...j->...i", Finv, N1_star)
    n2_star = np.einsum("...ji,...j->...i", Finv, N2_star)
    t_star = np.cross(n2_star, n1_star)

    def gram_schmidt(a, b):
        c = b - (np.sum(a * b, -1) / np.sum(a * a, -1))[..., None] * a
        return c, _unit(a), _unit(c)

    N3_star, N1, N3 = gram_schmidt(N1_star, N2_star)
    n3_star, n1, n3 = gram_schmidt(n1_star, n2_star)
    P = I - _outer(N1, N1) - _outer(N3, N3)
    p = I - _outer(n1, n1) - _outer(n3, n3)
    F_gamma = I + grad_u @ P
    Lam = np.linalg.norm(t_star, axis=-1) / np.linalg.norm(T_star, axis=-1) * detF
    W = p @ _T(Finv)
    return PointFrameImpl(N_star=[N1_star, N2_star, N3_star], n_star=[n1_star, n2_star, n3_star],
                          N=[N1, _unit(N2_star), N3], n=[n1, _unit(n2_star), n3], P=P, p=p,
                          F_omega=F_omega, F_gamma=F_gamma, Lambda=Lam, W=W,
                          T=_unit(T_star), t=_unit(t_star), T_star=T_star, t_star=t_star)


def impl_frame_codim1(geom, X, u_and_grad=None):
    """Frame of a codimension-1 level-set manifold at ``X``."""
    if geom.codim != 1:
        raise ValueError("geometry is not of codimension 1")
    grad_u = None if u_and_grad is None else np.asarray(u_and_grad[1], dtype=float)
    return frame_codim1(geom.phi[0].grad(X), grad_u)


def impl_frame_codim2(geom, X, u_and_grad=None):
    """Frame of a codimension-2 level-set manifold at ``X``."""
    if geom.codim != 2:
        raise ValueError("geometry is not of codimension 2")
    grad_u = None if u_and_grad is None else np.asarray(u_and_grad[1], dtype=float)
    return frame_codim2(geom.phi[0].grad(X), geom.phi[1].grad(X), grad_u)


def impl_surface_gradients(frame, grad_f=None, grad_u=None):
    """Surface gradients from classical ones.

    Returns ``(P grad f, grad u . P, W grad f)``; entries whose input is
    missing are ``None``.
    """
    P, W = frame.P, frame.W
    sg = dg = sx = None
    if grad_f is not None:
        grad_f = np.asarray(grad_f, dtype=float)
        sg = np.einsum("...ij,...j->...i", P, grad_f)
        sx = np.einsum("...ij,...j->...i", W, grad_f)
    if grad_u is not None:
        dg = np.asarray(grad_u, dtype=float) @ P
    return sg, dg, sx


def extend_normal_field(geom, X, which=0):
    """Unit normal ``grad phi / |grad phi|`` extended off the zero set."""
    g = geom.phi[which].grad(X)
    nrm = np.linalg.norm(g, axis=-1, keepdims=True)
    if np.any(nrm <= EPS):
        raise ZeroGradient("level-set gradient vanishes")
    return g / nrm
