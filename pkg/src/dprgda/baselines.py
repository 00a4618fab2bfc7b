"""Comparison methods: DP-SGDA on the saddle objective and a DP SPIDER
minimizer run directly on the closed-form value function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AlgoParams, PrivacyBudget, as_random_source, sample_batch
from .privacy import (INCREMENTAL, REFRESH, Allocation, Calibration, NoiseScale, QueryClass,
                      account, clipped_mean)
from .privacy import gaussian_sigma
from .trajectory import Row, Trajectory


@dataclass
class BaselineResult:
    x_out: np.ndarray
    trajectory: Trajectory
    y_out: Optional[np.ndarray] = None
    calibration: Optional[Calibration] = None


class SquaredResidualOracle:
    """Single-level view of a sensing instance: per-sample loss ``0.5 * r_i(x)^2``."""

    def __init__(self, instance):
        self.instance = instance
        self.n = instance.n
        self.dim = instance.dim_x

    def per_sample_grads(self, x, idx):
        return self.instance.phi_per_sample_grads(x, idx)

    def value(self, x):
        return self.instance.value(x)

    def value_grad(self, x):
        return self.instance.value_grad(x)


def _disabled(schedule) -> Calibration:
    k = sum(q.count for q in schedule)
    return Calibration(NoiseScale.zero(), Allocation(math.inf, 0.5, 0.0, k, "disabled", math.inf, 0.5),
                       schedule, "accountant")


def calibrate_sgda(steps: int, batch: int, C: float, budget: PrivacyBudget, slack: float = 0.5) -> Calibration:
    """Per-step noise for DP-SGDA: ``2 * steps`` queries of sensitivity ``2C/batch``."""
    sens = 2 * C / batch
    schedule = [QueryClass(INCREMENTAL, sens, steps, "sgda_x"), QueryClass(INCREMENTAL, sens, steps, "sgda_y")]
    if not budget.private:
        return _disabled(schedule)
    alloc = account(schedule, budget, slack)
    s = gaussian_sigma(sens, alloc.eps_i, alloc.delta_i) if steps else 0.0
    return Calibration(NoiseScale(s, s, s, s), alloc, schedule, "accountant")


def spider_min_schedule(steps: int, params: AlgoParams) -> list:
    n_ref = math.ceil(steps / params.q)
    return [QueryClass(REFRESH, 2 * params.C_v / params.S1, n_ref, "refresh_x"),
            QueryClass(INCREMENTAL, 2 * params.C_u / params.S2, steps - n_ref, "incremental_x")]


def calibrate_spider_min(steps: int, params: AlgoParams, budget: PrivacyBudget) -> Calibration:
    schedule = spider_min_schedule(steps, params)
    if not budget.private:
        return _disabled(schedule)
    alloc = account(schedule, budget, params.composition_slack)
    ref = gaussian_sigma(schedule[0].sensitivity, alloc.eps_i, alloc.delta_i)
    inc = gaussian_sigma(schedule[1].sensitivity, alloc.eps_i, alloc.delta_i)
    return Calibration(NoiseScale(ref, 0.0, inc, 0.0), alloc, schedule, "accountant")


def _row(t, label, x, diagnose, curvature_every, full, eps_spent, v_norm=math.nan):
    row = Row(t=t, phase=label, v_norm=v_norm, eps_spent=eps_spent)
    if diagnose is not None:
        curv = full or (curvature_every > 0 and t % curvature_every == 0)
        for k, val in diagnose(x, curv).items():
            setattr(row, k, val)
    return row


def dp_sgda(oracle, rng, x_0, y_0, steps: int, step_sizes=(0.05, 0.05), clip: float = 1.0,
            noise: Optional[NoiseScale] = None, batch: Optional[int] = None, *,
            budget: Optional[PrivacyBudget] = None, diagnose=None, curvature_every: int = 0,
            sinks=()) -> BaselineResult:
    """Simultaneous noisy descent-ascent with per-sample clipping.

    Noise comes from ``noise`` (``sigma_inc_x`` / ``sigma_inc_y``) or, when only
    ``budget`` is given, from :func:`calibrate_sgda`.
    """
    rng = as_random_source(rng)
    batch = oracle.n if batch is None else int(batch)
    eta_x, eta_y = step_sizes
    cal = None
    if noise is None:
        cal = calibrate_sgda(steps, batch, clip, budget or PrivacyBudget.disabled())
        noise = cal.noise
    x = np.asarray(x_0, dtype=float).copy()
    y = oracle.project(np.asarray(y_0, dtype=float))
    traj = Trajectory(sinks=list(sinks))
    spent = (lambda m: cal.allocation.composed(m)[0]) if cal is not None and budget is not None and budget.private else (lambda m: 0.0)
    gen = rng.noise
    for t in range(steps):
        idx = sample_batch(rng, oracle.n, batch)
        gx, gy = oracle.per_sample_grads(x, y, idx)
        hx = clipped_mean(gx, clip)
        hy = clipped_mean(gy, clip)
        if noise.sigma_inc_x:
            hx = hx + noise.sigma_inc_x * gen.standard_normal(hx.size)
        if noise.sigma_inc_y:
            hy = hy + noise.sigma_inc_y * gen.standard_normal(hy.size)
        traj.append(_row(t, "sgda", x, diagnose, curvature_every, False, spent(2 * t + 2),
                         float(np.linalg.norm(hx))))
        x, y = x - eta_x * hx, oracle.project(y + eta_y * hy)
    traj.append(_row(steps, "output", x, diagnose, curvature_every, True, spent(2 * steps)))
    return BaselineResult(x, traj, y, cal)


def dp_spider_min(phi_oracle, rng, x_0, steps: int, params: AlgoParams,
                  noise: Optional[NoiseScale] = None, *, budget: Optional[PrivacyBudget] = None,
                  eta: Optional[float] = None, diagnose=None, curvature_every: int = 0,
                  sinks=()) -> BaselineResult:
    """SPIDER descent ``x <- x - eta * v`` on a single-level per-sample loss.

    Refreshes from ``S1`` samples every ``q`` steps, otherwise adds a clipped
    ``S2``-sample gradient difference; privatized like the minimax updater.
    ``eta`` defaults to ``params.eta``.
    """
    rng = as_random_source(rng)
    eta = params.eta if eta is None else eta
    cal = None
    if noise is None:
        cal = calibrate_spider_min(steps, params, budget or PrivacyBudget.disabled())
        noise = cal.noise
    spent = (lambda m: cal.allocation.composed(m)[0]) if cal is not None and budget is not None and budget.private else (lambda m: 0.0)
    gen = rng.noise
    x = np.asarray(x_0, dtype=float).copy()
    x_prev = None
    v = None
    traj = Trajectory(sinks=list(sinks))
    for t in range(steps):
        if t % params.q == 0 or v is None:
            idx = sample_batch(rng, phi_oracle.n, params.S1)
            v = clipped_mean(phi_oracle.per_sample_grads(x, idx), params.C_v, params.clip_mode)
            sigma = noise.sigma_refresh_x
            label = "refresh"
        else:
            idx = sample_batch(rng, phi_oracle.n, params.S2)
            diff = phi_oracle.per_sample_grads(x, idx) - phi_oracle.per_sample_grads(x_prev, idx)
            v = v + clipped_mean(diff, params.C_u, params.clip_mode)
            sigma = noise.sigma_inc_x
            label = "incremental"
        if sigma:
            v = v + sigma * gen.standard_normal(v.size)
        traj.append(_row(t, label, x, diagnose, curvature_every, False, spent(t + 1),
                         float(np.linalg.norm(v))))
        x_prev, x = x, x - eta * v
    traj.append(_row(steps, "output", x, diagnose, curvature_every, True, spent(steps)))
    return BaselineResult(x, traj, None, cal)
