"""Newton-Raphson driver with load stepping and a direct sparse linear solve."""

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateDeformation, NoConvergence, SingularTangent
from .kernel import PointBatch, pressure_point_terms

log = logging.getLogger("tdcfem.solver")


@dataclass(frozen=True)
class NewtonConfig:
    """Newton settings.

    ``tol_residual=None`` means ``1e-10`` times the load scale.
    ``max_step`` caps the infinity norm of an update relative to the model
    diameter (``None`` disables the cap).
    """

    tol_residual: Optional[float] = None
    max_iter: int = 30
    load_steps: int = 1
    line_search: bool = False
    max_step: Optional[float] = 0.1

    def __post_init__(self):
        if self.tol_residual is not None and self.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1 or self.load_steps < 1:
            raise ValueError("max_iter and load_steps must be >= 1")


@dataclass(frozen=True)
class FollowerLoad:
    """Pressure acting along the deformed normal of a membrane."""

    pressure: float


@dataclass
class CaseResult:
    u: np.ndarray
    energy: float
    history: list = field(default_factory=list)
    iterations: int = 0
    energy_error: Optional[float] = None
    residual_error: Optional[float] = None
    seconds: float = 0.0


def linear_solve(A, b):
    """Direct sparse solve; raises ``SingularTangent`` when the factorization fails."""
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(0)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        diag = np.abs(A.diagonal())
        raise SingularTangent(f"factorization failed ({exc}); smallest |diagonal| = {diag.min():.3e} "
                              f"at row {int(np.argmin(diag))}") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularTangent("factorization produced non-finite values")
    U = lu.U.diagonal()
    if np.min(np.abs(U)) <= 1e-14 * np.max(np.abs(U)):
        raise SingularTangent(f"near-zero pivot {np.min(np.abs(U)):.3e} (max {np.max(np.abs(U)):.3e})")
    return x


def follower_pressure_terms(batch: PointBatch, Ue, pressure):
    """Per-point load residual and load stiffness of a follower pressure."""
    r, k, _ = pressure_point_terms(batch, Ue, pressure, tangent=True)
    return r, k


def newton_solve(model, config=NewtonConfig(), u0=None, logger=None):
    """Solve ``R(u) = 0`` on the free dofs of ``model``.

    ``model`` provides ``ndof``, ``fixed``, ``prescribed``,
    ``residual_tangent(u, load_factor, tangent)``, ``energy(u)`` and, for
    line search, ``potential(u, load_factor)`` with ``dead_loads_only``.
    Prescribed values are applied in proportion to the load factor.
    """
    logger = logger or log
    t0 = time.perf_counter()
    u = np.zeros(model.ndof) if u0 is None else np.array(u0, dtype=float)
    fixed = model.fixed
    free = ~fixed
    R_full, _ = model.residual_tangent(np.zeros(model.ndof), 1.0, tangent=False)
    scale = max(np.max(np.abs(R_full[free])) if free.any() else 0.0, 1.0)
    tol = config.tol_residual if config.tol_residual is not None else 1e-10 * scale
    history = []
    total_iters = 0
    best_u, best_r = u.copy(), np.inf
    shift = None
    diam = float(np.linalg.norm(np.ptp(model.nodes, axis=0)))
    for step in range(1, config.load_steps + 1):
        lf = step / config.load_steps
        u[fixed] = lf * model.prescribed[fixed]
        converged = False
        for it in range(config.max_iter + 1):
            R, K = model.residual_tangent(u, lf, tangent=True)
            rn = float(np.max(np.abs(R[free]))) if free.any() else 0.0
            energy = model.energy(u)
            history.append((step, it, rn, energy))
            logger.info("%d %d %.6e %.16e", step, it, rn, energy)
            if rn < best_r:
                best_u, best_r = u.copy(), rn
            if rn <= tol:
                converged = True
                break
            if it == config.max_iter:
                break
            Kff = K[free][:, free]
            try:
                du = linear_solve(Kff, -R[free])
            except SingularTangent:
                # e.g. unstressed cables: shift the diagonal until a step lowers the merit
                du, shift = _shifted_step(model, u, Kff, R, free, lf, rn, shift)
                u[free] += du
                total_iters += 1
                continue
            alpha = 1.0
            if config.max_step is not None:
                alpha = min(1.0, config.max_step * diam / max(np.max(np.abs(du)), 1e-300))
            if config.line_search:
                alpha = _line_search(model, u, alpha * du, free, lf, rn) * alpha
            u[free] += alpha * du
            total_iters += 1
        if not converged:
            raise NoConvergence(f"load step {step}: residual {rn:.3e} > tol {tol:.3e}", best=best_u,
                                history=history)
    return CaseResult(u=u, energy=model.energy(u), history=history, iterations=total_iters,
                      seconds=time.perf_counter() - t0)


def _shifted_step(model, u, Kff, R, free, lf, rn, shift):
    """Levenberg-type step ``(K + s I) du = -R`` with adaptive ``s``."""
    diag = np.max(np.abs(Kff.diagonal()))
    s = 1e-2 * diag if shift is None else shift
    dead = getattr(model, "dead_loads_only", False)
    ref = model.potential(u, lf) if dead else rn
    eye = sp.identity(Kff.shape[0], format="csc")
    for _ in range(12):
        du = linear_solve(Kff + s * eye, -R[free])
        v = u.copy()
        v[free] += du
        try:
            if dead:
                m = model.potential(v, lf)
            else:
                Rv, _ = model.residual_tangent(v, lf, tangent=False)
                m = float(np.max(np.abs(Rv[free])))
        except (DegenerateDeformation, np.linalg.LinAlgError):
            m = np.inf
        if np.isfinite(m) and m < ref:
            return du, s / 10
        s *= 10
    raise SingularTangent("tangent singular and no shifted step reduced the merit function")


def _line_search(model, u, du, free, lf, rn):
    """Backtracking by halving (max 8) on the potential or the residual norm."""
    dead = getattr(model, "dead_loads_only", False)

    def merit(alpha):
        v = u.copy()
        v[free] += alpha * du
        try:
            if dead:
                return model.potential(v, lf)
            R, _ = model.residual_tangent(v, lf, tangent=False)
            return float(np.max(np.abs(R[free])))
        except (DegenerateDeformation, np.linalg.LinAlgError, FloatingPointError):
            return np.inf

    ref = model.potential(u, lf) if dead else rn
    alpha = 1.0
    for _ in range(8):
        m = merit(alpha)
        if np.isfinite(m) and m <= ref:
            return alpha
        alpha *= 0.5
    return alpha
