"""Geometric and differential quantities on parametrized manifolds.

A manifold is given by a map ``X(r)`` from a box in R^q to R^d.  All
functions accept stacked inputs: leading axes are broadcast, the trailing
axes carry the vector/matrix shape.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import DegenerateDeformation, SingularMetric

EPS_METRIC = 1e-14
FD_STEP = 1e-7


@dataclass(frozen=True)
class ParametricPatch:
    """Map from a reference box in R^q into R^d.

    ``map`` takes points of shape ``(..., q)`` and returns ``(..., d)``;
    ``map_jacobian`` returns ``(..., d, q)``.  Without a Jacobian a central
    finite-difference fallback is used.  Boundary parts are named by
    reference face: ``"r0"``/``"r1"`` for the low/high end of the first
    coordinate, ``"s0"``/``"s1"`` for the second.
    """

    q: int
    d: int
    map: Callable[[np.ndarray], np.ndarray]
    map_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    reference_domain: tuple = ((0.0, 1.0),)
    dirichlet_parts: tuple = ()
    neumann_parts: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.q not in (1, 2, 3) or self.d not in (2, 3) or self.q > self.d:
            raise ValueError(f"unsupported dimensions q={self.q}, d={self.d}")
        if len(self.reference_domain) != self.q:
            raise ValueError("reference_domain needs one (lo, hi) pair per parameter")
        overlap = set(self.dirichlet_parts) & set(self.neumann_parts)
        if overlap:
            raise ValueError(f"boundary parts both Dirichlet and Neumann: {sorted(overlap)}")

    def __call__(self, r):
        return np.asarray(self.map(np.asarray(r, dtype=float)), dtype=float)

    def jacobian(self, r):
        r = np.asarray(r, dtype=float)
        if self.map_jacobian is not None:
            return np.asarray(self.map_jacobian(r), dtype=float)
        return fd_jacobian(self.map, r, self.q)

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.reference_domain], dtype=float)

    @property
    def upper(self):
        return np.array([hi for _, hi in self.reference_domain], dtype=float)


def fd_jacobian(fun, r, q, step=FD_STEP):
    """Central-difference Jacobian of ``fun`` at ``r`` (shape ``(..., q)``)."""
    cols = []
    for k in range(q):
        e = np.zeros(q)
        e[k] = step
        cols.append((np.asarray(fun(r + e)) - np.asarray(fun(r - e))) / (2 * step))
    return np.stack(cols, axis=-1)


def _T(A):
    return np.swapaxes(A, -1, -2)


def metric_operators(J, eps=EPS_METRIC):
    """First fundamental form ``G = J^T J`` and ``Q = J G^{-1}``."""
    J = np.asarray(J, dtype=float)
    G = _T(J) @ J
    detG = np.linalg.det(G)
    if np.any(detG <= eps):
        raise SingularMetric(f"det G = {np.min(detG):.3e} <= {eps:g}: degenerate parametrization")
    return G, J @ np.linalg.inv(G)


def param_operators(patch, r):
    """Return ``(J, G, Q)`` of ``patch`` at reference point(s) ``r``."""
    J = patch.jacobian(r)
    G, Q = metric_operators(J)
    return J, G, Q


def param_surface_gradient_scalar(Q, grad_r_f):
    """Surface gradient ``Q . grad_r f`` of a scalar field."""
    return np.einsum("...iq,...q->...i", Q, grad_r_f)


def param_directional_gradient_vector(grad_r_u, Q):
    """Directional surface gradient ``grad_r u . Q^T`` of a vector field."""
    return grad_r_u @ _T(Q)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def tangent_frame(J):
    """Tangent vectors and projector built column-wise from a Jacobian.

    For ``q = 2`` the second vector is orthogonalized against the first
    (Gram-Schmidt) before forming ``P = T1 x T1 + T3 x T3``.
    Returns ``(tangents, P)`` where ``tangents`` lists the unnormalized
    vectors (``[T*]`` or ``[T1*, T2*, T3*]``).
    """
    d, q = J.shape[-2:]
    if q == d:
        return [J[..., :, k] for k in range(q)], np.broadcast_to(np.eye(d), J.shape[:-2] + (d, d)).copy()
    T1 = J[..., :, 0]
    if q == 1:
        T = _unit(T1)
        return [T1], _outer(T, T)
    T2 = J[..., :, 1]
    T3 = T2 - (np.sum(T1 * T2, -1) / np.sum(T1 * T1, -1))[..., None] * T1
    e1, e3 = _unit(T1), _unit(T3)
    return [T1, T2, T3], _outer(e1, e1) + _outer(e3, e3)


def codim1_normal(tangents, d):
    """Unnormalized normal of a codimension-1 manifold from its tangents."""
    if d == 3:
        return np.cross(tangents[0], tangents[1])
    T = tangents[0]
    return np.stack([-T[..., 1], T[..., 0]], axis=-1)


@dataclass
class PointFrameParam:
    """Per-point quantities of a parametrized manifold, undeformed and deformed."""

    J: np.ndarray
    j: np.ndarray
    G: np.ndarray
    g: np.ndarray
    Q: np.ndarray
    q_op: np.ndarray
    T_star: list
    t_star: list
    P: np.ndarray
    p: np.ndarray
    F_gamma: np.ndarray
    Lambda: np.ndarray
    W: np.ndarray
    N: Optional[np.ndarray] = None
    n: Optional[np.ndarray] = None
    N_star: Optional[np.ndarray] = None
    n_star: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


def frame_from_jacobian(J, grad_r_u=None, eps=EPS_METRIC):
    """Assemble all Table-style quantities from ``J`` and ``grad_r u``.

    ``grad_r_u`` has shape ``(..., d, q)``; ``None`` means zero displacement.
    """
    J = np.asarray(J, dtype=float)
    d, q = J.shape[-2:]
    G, Q = metric_operators(J, eps)
    if grad_r_u is None:
        grad_r_u = np.zeros_like(J)
    I = np.eye(d)
    F = I + param_directional_gradient_vector(grad_r_u, Q)
    j = F @ J
    g = _T(j) @ j
    detg = np.linalg.det(g)
    if np.any(detg <= eps):
        raise DegenerateDeformation(f"det g = {np.min(detg):.3e}: collapsed or inverted deformation")
    q_op = j @ np.linalg.inv(g)
    T_star, P = tangent_frame(J)
    t_star, p = tangent_frame(j)
    Lam = np.sqrt(detg / np.linalg.det(G))
    # generalized inverse of Q through the small SPD system (Q^T Q) Y = Q^T
    W = q_op @ np.linalg.solve(_T(Q) @ Q, _T(Q))
    frame = PointFrameParam(J=J, j=j, G=G, g=g, Q=Q, q_op=q_op, T_star=T_star, t_star=t_star,
                            P=P, p=p, F_gamma=F, Lambda=Lam, W=W)
    if d - q == 1:
        Ns = codim1_normal(T_star, d)
        ns = codim1_normal(t_star, d)
        frame.N_star, frame.n_star = Ns, ns
        frame.N, frame.n = _unit(Ns), _unit(ns)
    return frame


def param_frame(patch, r, u_and_grad=None):
    """Frame of ``patch`` at ``r`` for displacement ``(u, grad_r u)``."""
    J = patch.jacobian(r)
    grad = None if u_and_grad is None else np.asarray(u_and_grad[1], dtype=float)
    return frame_from_jacobian(J, grad)


def stretch_from_tangents(frame):
    """Line/area stretch from tangent-vector norms (second Table formula)."""
    d, q = frame.J.shape[-2:]
    if q == 1:
        return np.linalg.norm(frame.t_star[0], axis=-1) / np.linalg.norm(frame.T_star[0], axis=-1)
    if q == 2 and d == 3:
        num = np.linalg.norm(np.cross(frame.t_star[0], frame.t_star[1]), axis=-1)
        return num / np.linalg.norm(np.cross(frame.T_star[0], frame.T_star[1]), axis=-1)
    return np.linalg.det(frame.F_gamma)
