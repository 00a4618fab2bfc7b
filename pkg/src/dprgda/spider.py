"""Privatized SPIDER estimators and the inner projected-ascent updater.

At outer step ``t`` the updater either refreshes ``(v, u)`` from a batch of
``S1`` samples (every ``q`` steps) or carries the previous pair, then runs
``K`` recursive corrections from batches of ``S2`` samples, each followed by a
projected ascent step on ``y``. The returned iterate is the candidate with the
smallest privatized gradient mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import AlgoParams, MinimaxOracle, RandomSource, sample_batch
from .privacy import NoiseScale, clipped_mean


@dataclass(frozen=True)
class EstimatorPair:
    v: np.ndarray
    u: np.ndarray


@dataclass
class IterateState:
    """What the updater needs from the outer loop at step ``t``."""

    t: int
    x_t: np.ndarray
    y_t: np.ndarray
    x_prev: Optional[np.ndarray] = None
    v_prev: Optional[np.ndarray] = None
    u_prev: Optional[np.ndarray] = None


@dataclass
class InnerResult:
    y_next: np.ndarray
    v_out: np.ndarray
    u_out: np.ndarray
    selected_k: int
    inner_path: list = field(default_factory=list)
    y_last: Optional[np.ndarray] = None
    refreshed: bool = False


def _noise(rng: RandomSource, sigma: float, size: int) -> np.ndarray:
    if sigma == 0:
        return np.zeros(size)
    return sigma * rng.noise.standard_normal(size)


def refresh(oracle: MinimaxOracle, rng: RandomSource, x_t, y_t, params: AlgoParams,
            noise: NoiseScale, idx=None) -> EstimatorPair:
    """Large-batch estimate of ``(grad_x f, grad_y f)`` at ``(x_t, y_t)``."""
    if idx is None:
        idx = sample_batch(rng, oracle.n, params.S1)
    gx, gy = oracle.per_sample_grads(x_t, y_t, idx)
    v = clipped_mean(gx, params.C_v, params.clip_mode) + _noise(rng, noise.sigma_refresh_x, oracle.dim_x)
    u = clipped_mean(gy, params.C_v, params.clip_mode) + _noise(rng, noise.sigma_refresh_y, oracle.dim_y)
    return EstimatorPair(v, u)


def incremental_update(oracle: MinimaxOracle, rng: RandomSource, prev: EstimatorPair, w_old, w_new,
                       params: AlgoParams, noise: NoiseScale, idx=None) -> EstimatorPair:
    """One recursive correction: add the clipped batch-mean gradient difference.

    ``w_old`` and ``w_new`` are ``(x, y)`` pairs; the same batch serves both
    blocks. Noise is added even when the difference is zero.
    """
    if idx is None:
        idx = sample_batch(rng, oracle.n, params.S2)
    gx1, gy1 = oracle.per_sample_grads(w_new[0], w_new[1], idx)
    gx0, gy0 = oracle.per_sample_grads(w_old[0], w_old[1], idx)
    dv = clipped_mean(gx1 - gx0, params.C_u, params.clip_mode)
    du = clipped_mean(gy1 - gy0, params.C_u, params.clip_mode)
    v = prev.v + _noise(rng, noise.sigma_inc_x, oracle.dim_x) + dv
    u = prev.u + _noise(rng, noise.sigma_inc_y, oracle.dim_y) + du
    return EstimatorPair(v, u)


def mapping_norm(oracle: MinimaxOracle, y, u, lam: float) -> float:
    """``||(y - P(y + lam * u)) / lam||`` using an estimated ascent direction ``u``."""
    return float(np.linalg.norm((y - oracle.project(y + lam * u)) / lam))


def inner_loop(oracle: MinimaxOracle, rng: RandomSource, state: IterateState, params: AlgoParams,
               noise: NoiseScale) -> InnerResult:
    x_t = np.asarray(state.x_t, dtype=float)
    y = np.asarray(state.y_t, dtype=float)
    lam = params.lam
    refreshed = state.t % params.q == 0 or state.v_prev is None
    if refreshed:
        est = refresh(oracle, rng, x_t, y, params, noise)
        # the refreshed pair already sits at (x_t, y_t)
        w_old = (x_t, y)
    else:
        est = EstimatorPair(np.asarray(state.v_prev, dtype=float), np.asarray(state.u_prev, dtype=float))
        w_old = (np.asarray(state.x_prev, dtype=float), y)

    path = []
    best_k, best_g, best = 0, np.inf, None
    for k in range(params.K):
        est = incremental_update(oracle, rng, est, w_old, (x_t, y), params, noise)
        y_step = oracle.project(y + lam * est.u)
        g = float(np.linalg.norm((y - y_step) / lam))
        path.append((y, g))
        if best is None or g < best_g:
            best_k, best_g, best = k, g, (y, est)
        w_old = (x_t, y)
        y = y_step

    y_sel, est_sel = best
    return InnerResult(y_sel, est_sel.v, est_sel.u, best_k, path, y_last=y, refreshed=refreshed)
