"""Pointwise finite-strain mechanics on manifolds (Saint Venant-Kirchhoff).

Every tensor is ``d x d`` regardless of the manifold dimension; all
functions broadcast over leading axes.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidTraction, SingularDeformation

EPS = 1e-14


def _T(A):
    return np.swapaxes(A, -1, -2)


def _tr(A):
    return np.trace(A, axis1=-2, axis2=-1)


def _ddot(A, B):
    return np.sum(A * B, axis=(-2, -1))


@dataclass(frozen=True)
class MaterialModel:
    """Lame constants and the measure factor ``eta`` of the weak form.

    ``eta`` is the cross section for ropes, the thickness for membranes and
    one for continua.
    """

    lam: float
    mu: float
    eta: float = 1.0
    q: Optional[int] = None

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.q == 1 and self.lam != 0:
            raise ValueError("ropes carry no lateral contraction: lambda must be 0 for q = 1")

    @classmethod
    def rope(cls, E, A):
        return cls(lam=0.0, mu=0.5 * E, eta=A, q=1)

    @classmethod
    def membrane(cls, E, nu, t, plane_stress=True):
        """Membrane Lame constants from ``(E, nu)``.

        ``plane_stress=True`` uses ``lambda = E nu / (1 - nu^2)``; otherwise the
        three-dimensional ``E nu / ((1 + nu)(1 - 2 nu))``.
        """
        mu = E / (2 * (1 + nu))
        if plane_stress:
            lam = E * nu / (1 - nu**2)
        else:
            lam = E * nu / ((1 + nu) * (1 - 2 * nu))
        return cls(lam=lam, mu=mu, eta=t, q=2)


@dataclass
class StressStrainState:
    E_dir: np.ndarray
    E_tang: np.ndarray
    e_dir: np.ndarray
    e_tang: np.ndarray
    S: np.ndarray
    K: np.ndarray
    sigma: np.ndarray
    P: np.ndarray
    p: np.ndarray
    F_gamma: np.ndarray
    Lambda: np.ndarray


def strains(frame):
    """Green-Lagrange and Euler-Almansi tensors (directional and tangential)."""
    F, P, p = frame.F_gamma, frame.P, frame.p
    I = np.eye(F.shape[-1])
    E_dir = 0.5 * (_T(F) @ F - I)
    E_tang = P @ E_dir @ P
    B = F @ _T(F)
    if np.any(np.abs(np.linalg.det(B)) <= EPS):
        raise SingularDeformation("F_Gamma F_Gamma^T is singular")
    e_dir = 0.5 * (I - np.linalg.inv(B))
    e_tang = p @ e_dir @ p
    return E_dir, E_tang, e_dir, e_tang


def second_pk(mat, E_tang, P):
    return mat.lam * _tr(E_tang)[..., None, None] * P + 2 * mat.mu * E_tang


def stresses(mat, frame, strain_tensors):
    """Second Piola-Kirchhoff ``S``, first Piola-Kirchhoff ``K``, Cauchy ``sigma``."""
    E_tang = strain_tensors[1]
    F = frame.F_gamma
    S = second_pk(mat, E_tang, frame.P)
    K = F @ S
    sigma = (F @ S @ _T(F)) / np.asarray(frame.Lambda)[..., None, None]
    return S, K, sigma


def stress_state(mat, frame):
    E_dir, E_tang, e_dir, e_tang = strains(frame)
    S, K, sigma = stresses(mat, frame, (E_dir, E_tang, e_dir, e_tang))
    return StressStrainState(E_dir=E_dir, E_tang=E_tang, e_dir=e_dir, e_tang=e_tang, S=S, K=K,
                             sigma=sigma, P=frame.P, p=frame.p, F_gamma=frame.F_gamma,
                             Lambda=np.asarray(frame.Lambda))


def energy_conjugacy_check(state, Lambda=None):
    """Residual ``|S:E_tang - (sigma:e_tang) Lambda|``.

    Also confirms that the tangential and directional strains give the same
    products with their conjugate stresses; a violation raises
    ``AssertionError``.
    """
    Lam = state.Lambda if Lambda is None else np.asarray(Lambda)
    SE = _ddot(state.S, state.E_tang)
    se = _ddot(state.sigma, state.e_tang)
    scale = np.maximum(np.abs(SE), 1.0)
    assert np.all(np.abs(SE - _ddot(state.S, state.E_dir)) <= 1e-10 * scale)
    assert np.all(np.abs(se - _ddot(state.sigma, state.e_dir)) <= 1e-10 * np.maximum(np.abs(se), 1.0))
    return np.abs(SE - se * Lam)


def principal_product(A, B, q):
    """``A:B`` for commuting in-plane tensors via their ``q`` largest-magnitude eigenvalues."""
    wa, va = np.linalg.eigh(0.5 * (A + _T(A)))
    order = np.argsort(-np.abs(wa), axis=-1)[..., :q]
    wa = np.take_along_axis(wa, order, -1)
    vecs = np.take_along_axis(va, order[..., None, :], -1)
    wb = np.einsum("...ik,...ij,...jk->...k", vecs, B, vecs)
    return np.sum(wa * wb, axis=-1)


def energy_density(mat, P, grad_dir_u):
    """``1/2 S:E_tang`` from the projector and the directional gradient of u."""
    F, E_t, S, _ = pk1(mat, P, grad_dir_u)
    return 0.5 * _ddot(S, E_t)


def pk1(mat, P, grad_dir_u):
    """``(F_Gamma, E_tang, S, K)`` from ``P`` and ``grad_dir u``."""
    d = P.shape[-1]
    F = np.eye(d) + grad_dir_u
    E = 0.5 * (_T(F) @ F - np.eye(d))
    E_t = P @ E @ P
    S = second_pk(mat, E_t, P)
    return F, E_t, S, F @ S


def pk1_derivative(mat, P, grad_dir_u, dP, dgrad):
    """First Piola-Kirchhoff stress and its derivatives along ``L`` coordinates.

    ``dP`` and ``dgrad`` have shape ``(..., L, d, d)`` and hold the
    derivatives of ``P`` and of the directional gradient of u along each
    coordinate.  Returns ``(K, dK)`` with ``dK`` shaped like ``dP``.
    """
    F, E_t, S, K = pk1(mat, P, grad_dir_u)
    Pl, Fl, El, Sl = (A[..., None, :, :] for A in (P, F, E_t, S))
    dF = dgrad
    I = np.eye(P.shape[-1])
    E = 0.5 * (_T(Fl) @ Fl - I)
    dE = 0.5 * (_T(dF) @ Fl + _T(Fl) @ dF)
    dEt = dP @ E @ Pl + Pl @ dE @ Pl + Pl @ E @ dP
    dS = (mat.lam * (_tr(dEt)[..., None, None] * Pl + _tr(El)[..., None, None] * dP)
          + 2 * mat.mu * dEt)
    return K, dF @ Sl + Fl @ dS


def cauchy_derivative(mat, P, grad_dir_u, dP, dgrad):
    """Cauchy stress, stretch and their coordinate derivatives (forward mode)."""
    d = P.shape[-1]
    I = np.eye(d)
    F, E_t, S, _ = pk1(mat, P, grad_dir_u)
    C = _T(F) @ F
    M = P @ C @ P + I - P
    Lam = np.sqrt(np.linalg.det(M))
    Pl, Fl, Sl, Cl = (A[..., None, :, :] for A in (P, F, S, C))
    dF = dgrad
    dC = _T(dF) @ Fl + _T(Fl) @ dF
    dM = dP @ Cl @ Pl + Pl @ dC @ Pl + Pl @ Cl @ dP - dP
    dLam = 0.5 * Lam[..., None] * _tr(np.linalg.solve(M[..., None, :, :], dM))
    _, dK = pk1_derivative(mat, P, grad_dir_u, dP, dgrad)
    # d(F S) = dK, sigma = (F S) F^T / Lambda
    K = F @ S
    Kl = K[..., None, :, :]
    dsig = (dK @ _T(Fl) + Kl @ _T(dF)) / Lam[..., None, None, None] \
        - (Kl @ _T(Fl)) * (dLam / Lam[..., None] ** 2)[..., None, None]
    sigma = K @ _T(F) / Lam[..., None, None]
    return sigma, dsig, Lam, dLam


def deformed_gradient_operator(P, grad_dir_u):
    """Generic ``W`` with ``grad_x^Gamma f = W grad_X^Gamma f`` (pseudo-inverse form)."""
    F = np.eye(P.shape[-1]) + grad_dir_u
    return _T(np.linalg.pinv(F @ P))


def div_first_pk(mat, P, grad_dir_u, dP, dgrad, D):
    """``Div_Gamma K`` with ``D`` mapping coordinate derivatives to surface ones.

    ``D`` has shape ``(..., d, L)``: the surface derivative along ambient
    direction ``m`` is ``sum_l D[m, l] d/dc_l``.
    """
    _, dK = pk1_derivative(mat, P, grad_dir_u, dP, dgrad)
    return np.einsum("...ml,...lim->...i", D, dK)


def div_cauchy(mat, P, grad_dir_u, dP, dgrad, D, W=None):
    """``div_Gamma sigma`` on the deformed manifold and the stretch ``Lambda``."""
    _, dsig, Lam, _ = cauchy_derivative(mat, P, grad_dir_u, dP, dgrad)
    if W is None:
        W = deformed_gradient_operator(P, grad_dir_u)
    Dx = W @ D
    return np.einsum("...ml,...lim->...i", Dx, dsig), Lam


def equilibrium_residual(mat, P, grad_dir_u, dP, dgrad, D, body_force=None, W=None,
                         cross_check=False):
    """Strong-form defect ``div_Gamma sigma + f`` on the deformed manifold.

    ``body_force`` is the load per undeformed measure (``F = f Lambda``).
    The default route evaluates ``Div_Gamma K / Lambda``; with
    ``cross_check=True`` the Cauchy route is returned as well.
    """
    divK = div_first_pk(mat, P, grad_dir_u, dP, dgrad, D)
    F = np.eye(P.shape[-1]) + grad_dir_u
    M = P @ _T(F) @ F @ P + np.eye(P.shape[-1]) - P
    Lam = np.sqrt(np.linalg.det(M))
    load = 0.0 if body_force is None else np.asarray(body_force)
    r = (divK + load) / Lam[..., None]
    if not cross_check:
        return r
    divs, Lam2 = div_cauchy(mat, P, grad_dir_u, dP, dgrad, D, W)
    return r, divs + load / Lam2[..., None]


def conormal(P, outward, tangent=None, W=None):
    """Unit conormal ``N_dGamma`` (and ``n_dGamma`` if ``W`` is given).

    ``outward`` is any vector pointing away from the manifold interior;
    ``tangent`` is the boundary tangent for ``q = 2`` (``None`` for ropes).
    """
    v = np.asarray(outward, dtype=float)
    if tangent is not None:
        t = np.asarray(tangent, dtype=float)
        t = t / np.linalg.norm(t, axis=-1, keepdims=True)
        v = v - np.sum(v * t, -1, keepdims=True) * t
    Nc = np.einsum("...ij,...j->...i", P, v)
    Nc = Nc / np.linalg.norm(Nc, axis=-1, keepdims=True)
    if W is None:
        return Nc, None
    nc = np.einsum("...ij,...j->...i", W, Nc)
    return Nc, nc / np.linalg.norm(nc, axis=-1, keepdims=True)


@dataclass(frozen=True)
class BoundaryData:
    """Boundary conditions of one case.

    ``dirichlet`` maps a boundary part to a callable ``X -> G_hat``;
    ``neumann`` maps a part to ``X -> H_hat``; ``slip`` maps a part to
    ``(v_d, G_hat)`` with a unit direction and a scalar magnitude.
    """

    dirichlet: dict
    neumann: dict
    slip: dict
    boundary_stretch_rule: str = "auto"

    def __post_init__(self):
        both = (set(self.dirichlet) | set(self.slip)) & set(self.neumann)
        if both:
            raise ValueError(f"Dirichlet and Neumann parts overlap: {sorted(both)}")


def boundary_stretch(q, line_stretch=None, face_stretch=None):
    """Factor relating deformed to undeformed tractions at the boundary."""
    if q == 1:
        return 1.0
    if q == 2:
        if line_stretch is None:
            raise ValueError("membranes need the line stretch along the boundary")
        return line_stretch
    if face_stretch is None:
        raise ValueError("continua need the area stretch of the boundary face")
    return face_stretch


def pullback_traction(h_hat, p, q, line_stretch=None, face_stretch=None, tol=1e-10):
    """Undeformed traction ``H = Lambda_bar h`` after checking tangency of ``h``."""
    h = np.asarray(h_hat, dtype=float)
    normal_part = h - np.einsum("...ij,...j->...i", p, h)
    if np.any(np.linalg.norm(normal_part, axis=-1) > tol * np.maximum(np.linalg.norm(h, axis=-1), 1.0)):
        raise InvalidTraction("traction is not in the tangent space of the deformed manifold")
    lam_bar = boundary_stretch(q, line_stretch, face_stretch)
    return np.asarray(lam_bar)[..., None] * h if np.ndim(lam_bar) else lam_bar * h


def _fd_r(fun, r, k, h=1e-3):
    # fourth-order central difference along reference axis k
    e = np.zeros(r.shape[-1])
    e[k] = h
    return (-fun(r + 2 * e) + 8 * fun(r + e) - 8 * fun(r - e) + fun(r - 2 * e)) / (12 * h)


def divergence_theorem_check(A, u, patch, cells=8, order=8):
    """Defect of the surface divergence theorem for an in-plane tensor field.

    ``A`` and ``u`` are callables of reference coordinates ``r`` (shape
    ``(..., 2)``) returning ``(..., d, d)`` and ``(..., d)``.  The surface
    is ``patch`` (``q = 2``), integrated with ``cells x cells`` Gauss cells
    of ``order`` points per direction.  Returns
    ``|int u.Div A + int grad_dir u : A - oint u.A.N_dGamma|``.
    """
    from .geometry.parametric import metric_operators, tangent_frame

    if patch.q != 2:
        raise ValueError("divergence_theorem_check expects a surface patch")
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = patch.lower, patch.upper

    def cell_rule(a, b):
        edges = np.linspace(a, b, cells + 1)
        pts = (0.5 * (edges[1:, None] - edges[:-1, None]) * x + 0.5 * (edges[1:, None] + edges[:-1, None])).ravel()
        wts = (0.5 * (edges[1:, None] - edges[:-1, None]) * w).ravel()
        return pts, wts

    rr, wr = cell_rule(lo[0], hi[0])
    ss, ws = cell_rule(lo[1], hi[1])
    R = np.stack(np.meshgrid(rr, ss, indexing="ij"), -1).reshape(-1, 2)
    Wt = np.outer(wr, ws).ravel()
    J = patch.jacobian(R)
    G, Q = metric_operators(J)
    dA = np.sqrt(np.linalg.det(G))
    Av = A(R)
    uv = u(R)
    dAr = np.stack([_fd_r(A, R, k) for k in range(2)], axis=-3)
    dur = np.stack([_fd_r(u, R, k) for k in range(2)], axis=-1)
    divA = np.einsum("nml,nlim->ni", Q, dAr)
    grad_u = dur @ np.swapaxes(Q, -1, -2)
    interior = np.sum(Wt * dA * (np.einsum("ni,ni->n", uv, divA) + _ddot(grad_u, Av)))

    boundary = 0.0
    for axis, (val, sign) in [(0, (lo[0], -1)), (0, (hi[0], 1)), (1, (lo[1], -1)), (1, (hi[1], 1))]:
        other = 1 - axis
        t, wt = cell_rule(lo[other], hi[other])
        Rb = np.empty((t.size, 2))
        Rb[:, axis] = val
        Rb[:, other] = t
        Jb = patch.jacobian(Rb)
        _, Pb = tangent_frame(Jb)
        tang = Jb[:, :, other]
        Nc, _ = conormal(Pb, sign * Jb[:, :, axis], tangent=tang)
        ds = np.linalg.norm(tang, axis=-1)
        boundary += np.sum(wt * ds * np.einsum("ni,nij,nj->n", u(Rb), A(Rb), Nc))
    return abs(interior - boundary)
