"""The outer descent / escape state machine.

Large privatized gradients trigger a normalized descent step. A small one
opens an escape episode: the anchor is perturbed inside a ball of radius
``r`` and then moved with plain steps of size ``eta_H`` while the accumulated
squared movement is monitored. Moving more than ``D_bar`` per step on average
ends the episode early (the anchor was not a second-order point); staying put
for ``t_thres`` steps certifies the anchor, which is returned.

Every quantity used here is post-processing of the privatized estimators, so
this module never touches data or noise calibration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import AlgoParams, MinimaxOracle, PrivacyBudget, as_random_source, sample_uniform_ball
from .privacy import Calibration, calibrate
from .spider import IterateState, inner_loop
from .trajectory import Row, Trajectory

logger = logging.getLogger(__name__)

DESCENT = "descent"
ESCAPE = "escape"

ESCAPE_EXHAUSTED = "escape_exhausted"
ITERATION_BUDGET = "iteration_budget"


@dataclass
class Phase:
    mode: str = DESCENT
    m_s: int = -1
    esc: int = 0
    s: int = 0
    movement_terms: list = field(default_factory=list)
    anchor: Optional[np.ndarray] = None

    @property
    def D(self) -> float:
        return float(sum(self.movement_terms))


@dataclass
class StepDecision:
    kind: str  # "continue" | "exit" | "terminate"
    x_next: np.ndarray
    eta_t: float


@dataclass
class RunOutcome:
    x_out: np.ndarray
    reason: str
    trajectory: Trajectory
    certified: bool
    y_out: Optional[np.ndarray] = None
    x_last: Optional[np.ndarray] = None
    episodes: int = 0
    exits: int = 0
    calibration: Optional[Calibration] = None


def descent_step(x_t, v_t, eta: float) -> np.ndarray:
    """Normalized step of length ``eta`` along ``-v_t``."""
    v_t = np.asarray(v_t, dtype=float)
    return np.asarray(x_t, dtype=float) - (eta / np.linalg.norm(v_t)) * v_t


def enter_escape(rng, x_t, r: float) -> np.ndarray:
    x_t = np.asarray(x_t, dtype=float)
    return x_t + sample_uniform_ball(rng, x_t.size, r)


def escape_step(phase: Phase, t: int, x_t, v_t, eta_H: float, D_bar: float, t_thres: int) -> StepDecision:
    """Advance one step of an open escape episode, updating ``phase`` in place."""
    if phase.mode != ESCAPE:
        raise ValueError("escape_step called outside an escape episode")
    x_t = np.asarray(x_t, dtype=float)
    v_t = np.asarray(v_t, dtype=float)
    phase.movement_terms.append(eta_H**2 * float(v_t @ v_t))
    budget = (t - phase.m_s) * D_bar
    if phase.D > budget:
        sq = phase.D / eta_H**2
        eta_t = math.sqrt(budget / sq)
        phase.mode = DESCENT
        phase.movement_terms = []
        return StepDecision("exit", x_t - eta_t * v_t, eta_t)
    x_next = x_t - eta_H * v_t
    phase.esc += 1
    if phase.esc >= t_thres:
        return StepDecision("terminate", phase.anchor.copy(), eta_H)
    return StepDecision("continue", x_next, eta_H)


def escape_schedule(eta_H: float, alpha: float, rho_phi: float, L_phi: float, dim: int,
                    delta2: float = 0.1, C: float = 1.0, R: Optional[float] = None) -> dict:
    """Perturbation radius, episode length and movement threshold from the saddle-escape scalings.

    ``r = L_phi * eta_H * alpha_H / (C * rho_phi)`` with ``alpha_H = sqrt(rho_phi * alpha)``,
    ``r0 = delta2 * r / sqrt(dim)``, ``t_thres = 2 log(r / r0) / eta_H`` and
    ``D_bar = R^2 / t_thres^2``; ``R`` defaults to ``1 / (2 L_phi eta_H)``.
    """
    alpha_H = math.sqrt(rho_phi * alpha)
    r = L_phi * eta_H * alpha_H / (C * rho_phi)
    r0 = delta2 * r / math.sqrt(dim)
    t_thres = max(1, math.ceil(2 * math.log(r / r0) / eta_H))
    if R is None:
        R = 1.0 / (2 * L_phi * eta_H)
    return {"r": r, "r0": r0, "t_thres": t_thres, "D_bar": R**2 / t_thres**2, "R": R, "alpha_H": alpha_H}


def erm_preset(n: int, dim: int, eps: float, delta: float, L: float, T: int, **overrides) -> AlgoParams:
    """Full-batch parameter choices with the constants set to one."""
    q = max(1, int(n**2 * eps**2 / (L**2 * T * dim * math.log(1 / delta))))
    base = dict(eta=1 / (2 * L), S1=n, S2=n, q=q, T=T, K=1, lam=1 / (6 * L))
    base.update(overrides)
    return AlgoParams(**base)


def population_preset(L: float, mu: float, **overrides) -> AlgoParams:
    """Inner step ``1/(6L)`` and ``K = ceil(L/mu)`` inner steps."""
    base = dict(lam=1 / (6 * L), K=max(1, math.ceil(L / mu)))
    base.update(overrides)
    return AlgoParams(**base)


Diagnose = Callable[[np.ndarray, bool], dict]


def exact_diagnostics(oracle: MinimaxOracle, eig: Optional[Callable] = None) -> Diagnose:
    """Evaluation hook returning ``phi``, ``grad_norm`` and (optionally) ``lambda_min``."""

    def diagnose(x, with_curvature: bool) -> dict:
        out = {"phi": oracle.value(x), "grad_norm": float(np.linalg.norm(oracle.value_grad(x)))}
        if with_curvature and eig is not None:
            out["lambda_min"] = float(eig(x))
        return out

    return diagnose


def run(oracle: MinimaxOracle, rng, x_0, y_0, params: AlgoParams,
        budget: Optional[PrivacyBudget] = None, *, diagnose: Optional[Diagnose] = None,
        curvature_every: int = 0, sinks=(), calibration: Optional[Calibration] = None) -> RunOutcome:
    """Run the private recursive descent-ascent method for at most ``params.T`` steps.

    ``diagnose`` (evaluation only) fills the trajectory's ``phi`` /
    ``grad_norm`` / ``lambda_min`` columns; curvature is requested every
    ``curvature_every`` steps (never when 0) and always at the output point.
    """
    params.validate(oracle.n)
    rng = as_random_source(rng)
    if budget is None:
        budget = PrivacyBudget.disabled()
    if calibration is None:
        calibration = calibrate(params, budget, oracle.n)
    noise = calibration.noise
    alloc = calibration.allocation
    traj = Trajectory(sinks=list(sinks))

    x = np.asarray(x_0, dtype=float).copy()
    y = oracle.project(np.asarray(y_0, dtype=float))
    x_prev = None
    v_prev = u_prev = None
    phase = Phase()
    reason = ITERATION_BUDGET
    x_out = None
    exits = 0
    queries = 0

    def record(t, label, x_eval, v_norm, full=False):
        row = Row(t=t, phase=label, v_norm=v_norm)
        if diagnose is not None:
            curv = full or (curvature_every > 0 and t % curvature_every == 0)
            for k, val in diagnose(x_eval, curv).items():
                setattr(row, k, val)
        row.eps_spent = alloc.composed(queries)[0] if budget.private else 0.0
        traj.append(row)

    t = 0
    for t in range(params.T):
        state = IterateState(t=t, x_t=x, y_t=y, x_prev=x_prev, v_prev=v_prev, u_prev=u_prev)
        res = inner_loop(oracle, rng, state, params, noise)
        queries += 2 * params.K + (2 if res.refreshed else 0)
        v = res.v_out
        v_norm = float(np.linalg.norm(v))

        if phase.mode == DESCENT:
            if v_norm >= params.alpha:
                label = "descent"
                x_next = descent_step(x, v, params.eta)
            else:
                label = "perturb"
                phase = Phase(mode=ESCAPE, m_s=t, esc=0, s=phase.s + 1, anchor=x.copy())
                x_next = enter_escape(rng, x, params.r)
        else:
            dec = escape_step(phase, t, x, v, params.eta_H, params.D_bar, params.t_thres)
            label = {"continue": "escape", "exit": "exit", "terminate": "terminate"}[dec.kind]
            x_next = dec.x_next
            if dec.kind == "exit":
                exits += 1
            elif dec.kind == "terminate":
                record(t, label, x, v_norm)
                reason = ESCAPE_EXHAUSTED
                x_out = phase.anchor.copy()
                y = res.y_next
                break

        record(t, label, x, v_norm)
        x_prev, x = x, x_next
        y = res.y_next
        v_prev, u_prev = res.v_out, res.u_out

    certified = reason == ESCAPE_EXHAUSTED
    if x_out is None:
        if phase.anchor is not None:
            x_out = phase.anchor.copy()
        else:
            x_out = x.copy()
            if params.T > 0:
                logger.info("no escape episode was entered; returning the last iterate without certificate")
    final_t = (traj.final.t + 1) if len(traj) else 0
    record(final_t, "output", x_out, math.nan, full=True)
    traj.meta.update(reason=reason, certified=certified, episodes=phase.s, exits=exits)
    return RunOutcome(x_out, reason, traj, certified, y_out=y, x_last=x, episodes=phase.s,
                      exits=exits, calibration=calibration)
