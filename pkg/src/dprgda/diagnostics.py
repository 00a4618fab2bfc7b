"""Evaluation-only instruments: gradient mapping, Hessian-vector products of the
value function, minimum-eigenvalue estimation and the second-order certificate.

Nothing here draws from the optimizer's random streams or touches a privacy
budget; all quantities use exact (non-private) gradients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

logger = logging.getLogger(__name__)

DEFAULT_H = 5e-4
DEFAULT_MAXITER = 500
DEFAULT_TOL = 1e-4


def gradient_mapping(oracle, x, y, lam: float) -> np.ndarray:
    """``(y - P_Y(y + lam * grad_y f(x, y))) / lam`` with the exact gradient."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    y = np.asarray(y, dtype=float)
    gy = oracle.grad(x, y)[1]
    return (y - oracle.project(y + lam * gy)) / lam


def hvp(instance, x, direction, h: float = DEFAULT_H) -> np.ndarray:
    """Central-difference Hessian-vector product of the value function.

    ``direction`` is expected to have unit norm; ``instance`` needs ``value_grad``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    return (instance.value_grad(x + h * d) - instance.value_grad(x - h * d)) / (2 * h)


def _hvp_any(instance, x, v, h):
    nrm = np.linalg.norm(v)
    if nrm == 0:
        return np.zeros_like(v)
    return nrm * hvp(instance, x, v / nrm, h)


def fd_hessian(instance, x, h: float = DEFAULT_H) -> np.ndarray:
    """Dense symmetrized Hessian from one :func:`hvp` per coordinate (small problems only)."""
    x = np.asarray(x, dtype=float)
    d = x.size
    H = np.column_stack([hvp(instance, x, e, h) for e in np.eye(d)])
    return 0.5 * (H + H.T)


@dataclass
class EigenEstimate:
    value: float
    converged: bool
    iterations: int
    method: str

    def __float__(self) -> float:
        return float(self.value)


def _power_min(op, dim, maxiter, tol, v0):
    """Smallest eigenvalue via power iteration on ``shift * I - H``."""
    v = v0 / np.linalg.norm(v0)
    # magnitude bound: a short power iteration on H itself
    norm_est = 0.0
    w = v.copy()
    for _ in range(min(maxiter, 100)):
        z = op(w)
        nz = np.linalg.norm(z)
        if nz == 0:
            break
        norm_est = nz
        w = z / nz
    shift = 1.1 * norm_est + 1e-12
    theta_prev = math.inf
    theta = math.nan
    for it in range(1, maxiter + 1):
        z = shift * v - op(v)
        theta = float(v @ z)
        nz = np.linalg.norm(z)
        if nz == 0:
            return shift, True, it
        v = z / nz
        if abs(theta - theta_prev) < tol:
            return shift - theta, True, it
        theta_prev = theta
    return shift - theta, False, maxiter


def min_eigenvalue(instance, x, h: float = DEFAULT_H, maxiter: int = DEFAULT_MAXITER,
                   tol: float = DEFAULT_TOL, method: str = "lanczos") -> EigenEstimate:
    """Estimate ``lambda_min`` of the value-function Hessian at ``x`` from HVPs.

    ``method="lanczos"`` uses ARPACK on the HVP operator, ``"power"`` a shifted
    power iteration stopping when successive Rayleigh quotients differ by less
    than ``tol``, and ``"dense"`` assembles the finite-difference Hessian.
    Non-convergence is reported through ``EigenEstimate.converged``.
    """
    if maxiter < 1:
        raise ValueError("maxiter must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    dim = x.size
    op = lambda v: _hvp_any(instance, x, np.asarray(v, dtype=float).ravel(), h)
    v0 = np.random.default_rng(12345).standard_normal(dim)

    if method == "dense" or (method == "lanczos" and dim <= 2):
        w = np.linalg.eigvalsh(fd_hessian(instance, x, h))
        return EigenEstimate(float(w[0]), True, dim, "dense")
    if method == "power":
        val, ok, its = _power_min(op, dim, maxiter, tol, v0)
        if not ok:
            logger.warning("power iteration did not converge in %d iterations", maxiter)
        return EigenEstimate(float(val), ok, its, "power")
    if method != "lanczos":
        raise ValueError(f"unknown method {method!r}")

    calls = [0]

    def matvec(v):
        calls[0] += 1
        return op(v)

    A = LinearOperator((dim, dim), matvec=matvec, dtype=float)
    try:
        w = eigsh(A, k=1, which="SA", maxiter=maxiter, tol=tol, v0=v0, return_eigenvectors=False)
        return EigenEstimate(float(w[0]), True, calls[0], "lanczos")
    except ArpackNoConvergence as err:
        logger.warning("ARPACK did not converge in %d iterations", maxiter)
        vals = err.eigenvalues
        val = float(vals[0]) if len(vals) else math.nan
        return EigenEstimate(val, False, calls[0], "lanczos")


@dataclass
class SospCertificate:
    grad_norm: float
    lambda_min: float
    alpha: float
    alpha_H: float
    passes: bool
    converged: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def sosp_check(instance, x, alpha: float, rho_phi: float = 1.0, h: float = DEFAULT_H,
               maxiter: int = DEFAULT_MAXITER, tol: float = DEFAULT_TOL,
               method: str = "lanczos") -> SospCertificate:
    """Certificate for ``||grad Phi|| <= alpha`` and ``lambda_min >= -sqrt(rho_phi * alpha)``."""
    if not alpha > 0 or not rho_phi > 0:
        raise ValueError("alpha and rho_phi must be positive")
    g = float(np.linalg.norm(instance.value_grad(x)))
    est = min_eigenvalue(instance, x, h=h, maxiter=maxiter, tol=tol, method=method)
    alpha_H = math.sqrt(rho_phi * alpha)
    passes = bool(g <= alpha and est.value >= -alpha_H)
    return SospCertificate(g, float(est.value), float(alpha), alpha_H, passes, est.converged)


def deviation_decomposition(oracle, x, y, v, L: float) -> dict:
    """Split ``||v - grad Phi(x)||`` into estimator error and inner-tracking bias.

    ``||v - grad Phi(x)|| <= ||v - grad_x f(x, y)|| + L * ||y - y*(x)||`` where
    ``L`` bounds the Lipschitz constant of ``grad_x f(x, .)``.
    """
    y_star = oracle.inner_maximizer(x)
    total = float(np.linalg.norm(v - oracle.value_grad(x)))
    est_err = float(np.linalg.norm(v - oracle.grad(x, y)[0]))
    track = float(np.linalg.norm(np.asarray(y) - y_star))
    bound = est_err + L * track
    return {"deviation": total, "estimator_error": est_err, "tracking_error": track,
            "bound": bound, "holds": total <= bound * (1 + 1e-9) + 1e-15}
