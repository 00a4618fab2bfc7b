"""Clipping, the Gaussian mechanism, noise calibration and composition accounting."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import AlgoParams, ParameterError, PrivacyBudget, RandomSource

logger = logging.getLogger(__name__)

REFRESH = "refresh"
INCREMENTAL = "incremental"


class InfeasibleBudgetError(ValueError):
    """The target budget cannot be split over the requested number of queries."""


def clip(x, C: float) -> np.ndarray:
    """Scale ``x`` by ``min(C / ||x||, 1)``; the zero vector is returned unchanged."""
    if not C > 0:
        raise ValueError("clipping threshold must be positive")
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm <= C:
        return x.copy()
    return x * (C / nrm)


def clip_rows(X, C: float) -> np.ndarray:
    """Row-wise :func:`clip` of a 2-D array."""
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    scale = np.minimum(1.0, C / np.where(norms > 0, norms, 1.0))
    return X * scale


def clipped_mean(per_sample, C: float, mode: str = "per_sample") -> np.ndarray:
    """Mean of per-sample rows with clipping either per row or on the mean.

    With ``mode="per_sample"`` swapping one of the ``B`` rows moves the result
    by at most ``2C/B``. With ``mode="batch"`` that bound holds only when every
    row already has norm ``<= C``.
    """
    per_sample = np.asarray(per_sample, dtype=float)
    if mode == "per_sample":
        return clip_rows(per_sample, C).mean(axis=0)
    if mode == "batch":
        return clip(per_sample.mean(axis=0), C)
    raise ValueError(f"unknown clip mode {mode!r}")


def gaussian_sigma(sensitivity: float, eps: float, delta: float) -> float:
    """Standard deviation ``sensitivity * sqrt(log(1.25/delta)) / eps``."""
    if not eps > 0:
        raise ParameterError("eps must be positive")
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")
    if sensitivity < 0:
        raise ParameterError("sensitivity must be non-negative")
    if math.isinf(eps):
        return 0.0
    if eps >= 1:
        logger.warning("Gaussian mechanism used with eps=%g >= 1, outside its classical regime", eps)
    return sensitivity * math.sqrt(math.log(1.25 / delta)) / eps


def gaussian_mechanism(rng, value, sensitivity: float, eps: float, delta: float) -> np.ndarray:
    """Release ``value`` plus i.i.d. Gaussian noise calibrated to ``(eps, delta)``."""
    sigma = gaussian_sigma(sensitivity, eps, delta)
    value = np.asarray(value, dtype=float)
    if sigma == 0:
        return value.copy()
    gen = rng.noise if isinstance(rng, RandomSource) else rng
    return value + sigma * gen.standard_normal(value.shape)


# ----------------------------------------------------------------------
# Composition
# ----------------------------------------------------------------------


def advanced_composition(eps_i: float, k: int, delta_prime: float) -> float:
    """Total epsilon of ``k`` adaptive ``eps_i``-DP queries with slack ``delta_prime``."""
    if k == 0:
        return 0.0
    return math.sqrt(2 * k * math.log(1 / delta_prime)) * eps_i + k * eps_i * math.expm1(eps_i)


@dataclass(frozen=True)
class QueryClass:
    kind: str
    sensitivity: float
    count: int
    label: str = ""

    def __post_init__(self):
        if self.sensitivity < 0:
            raise ValueError("sensitivity must be non-negative")
        if self.count < 0:
            raise ValueError("count must be non-negative")


@dataclass
class Allocation:
    """Uniform per-query budget and its composed total."""

    eps_i: float
    delta_i: float
    delta_prime: float
    k: int
    rule: str
    total_eps: float
    total_delta: float

    def composed(self, m: int) -> tuple[float, float]:
        """Composed ``(eps, delta)`` after the first ``m`` queries."""
        if m <= 0:
            return 0.0, 0.0
        if self.rule == "single":
            return self.eps_i, self.delta_i
        if self.rule == "basic":
            return m * self.eps_i, m * self.delta_i
        return advanced_composition(self.eps_i, m, self.delta_prime), m * self.delta_i + self.delta_prime


def account(schedule: Sequence[QueryClass], target: PrivacyBudget, slack: float = 0.5) -> Allocation:
    """Largest uniform per-query budget whose composition stays within ``target``.

    ``slack`` is the fraction of ``target.delta`` reserved as the advanced
    composition ``delta'``. Basic composition is used instead whenever it
    yields a larger per-query epsilon.
    """
    k = int(sum(qc.count for qc in schedule))
    eps, delta = target.epsilon, target.delta
    if k == 0:
        alloc = Allocation(eps, delta, 0.0, 0, "single", 0.0, 0.0)
    elif k == 1:
        alloc = Allocation(eps, delta, 0.0, 1, "single", eps, delta)
    elif math.isinf(eps):
        alloc = Allocation(math.inf, delta, 0.0, k, "disabled", math.inf, delta)
    else:
        delta_prime = slack * delta
        delta_i = (delta - delta_prime) / k
        lo, hi = 0.0, eps
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if advanced_composition(mid, k, delta_prime) <= eps:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * max(hi, 1e-300):
                break
        eps_basic = eps / k
        if eps_basic >= lo:
            alloc = Allocation(eps_basic, delta_i, delta_prime, k, "basic", k * eps_basic, k * delta_i)
        else:
            alloc = Allocation(lo, delta_i, delta_prime, k, "advanced",
                               advanced_composition(lo, k, delta_prime), k * delta_i + delta_prime)
        if alloc.eps_i < 1e-12:
            raise InfeasibleBudgetError(
                f"per-query epsilon {alloc.eps_i:.3g} below 1e-12 for k={k} queries"
            )
    for qc in schedule:
        target.record(qc.label or qc.kind, alloc.eps_i, alloc.delta_i, qc.count)
    return alloc


# ----------------------------------------------------------------------
# Noise calibration
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseScale:
    sigma_refresh_x: float = 0.0
    sigma_refresh_y: float = 0.0
    sigma_inc_x: float = 0.0
    sigma_inc_y: float = 0.0

    @classmethod
    def zero(cls) -> "NoiseScale":
        return cls()

    @property
    def is_zero(self) -> bool:
        return not any(asdict(self).values())


def query_schedule(params: AlgoParams) -> list[QueryClass]:
    """Queries issued by a full run: refreshes every ``q`` steps, ``K`` increments per step.

    x- and y-coordinates are separate queries, so every count appears twice.
    """
    n_refresh = math.ceil(params.T / params.q)
    n_inc = params.T * params.K
    s_ref = 2 * params.C_v / params.S1
    s_inc = 2 * params.C_u / params.S2
    return [
        QueryClass(REFRESH, s_ref, n_refresh, "refresh_x"),
        QueryClass(REFRESH, s_ref, n_refresh, "refresh_y"),
        QueryClass(INCREMENTAL, s_inc, n_inc, "incremental_x"),
        QueryClass(INCREMENTAL, s_inc, n_inc, "incremental_y"),
    ]


@dataclass
class Calibration:
    noise: NoiseScale
    allocation: Allocation
    schedule: list = field(default_factory=list)
    mode: str = "accountant"


def calibrate_noise(params: AlgoParams, budget: PrivacyBudget, n: int) -> NoiseScale:
    """The four noise standard deviations for a run of ``params`` on ``n`` samples."""
    return calibrate(params, budget, n).noise


def calibrate(params: AlgoParams, budget: PrivacyBudget, n: int) -> Calibration:
    params.validate(n)
    schedule = query_schedule(params)
    if not budget.private:
        alloc = Allocation(math.inf, budget.delta, 0.0, sum(q.count for q in schedule),
                           "disabled", math.inf, budget.delta)
        return Calibration(NoiseScale.zero(), alloc, schedule, params.calibration)
    alloc = account(schedule, budget, params.composition_slack)
    c = params.noise_constant
    if params.calibration == "formula":
        base = math.sqrt(math.log(1 / budget.delta)) / budget.epsilon
        ref = c * params.C_v * base * max(1 / params.S1, math.sqrt(params.T) / (math.sqrt(params.q) * n))
        inc = c * params.C_u * base * max(1 / params.S2, math.sqrt(params.T) / n)
    else:
        ref = c * gaussian_sigma(schedule[0].sensitivity, alloc.eps_i, alloc.delta_i)
        inc = c * gaussian_sigma(schedule[2].sensitivity, alloc.eps_i, alloc.delta_i)
    return Calibration(NoiseScale(ref, ref, inc, inc), alloc, schedule, params.calibration)


def budget_report(calibration: Calibration, target: PrivacyBudget) -> dict:
    a = calibration.allocation
    sig = calibration.noise
    rows = []
    for qc in calibration.schedule:
        sigma = sig.sigma_refresh_x if qc.kind == REFRESH else sig.sigma_inc_x
        rows.append({
            "query": qc.label or qc.kind,
            "kind": qc.kind,
            "count": qc.count,
            "sensitivity": qc.sensitivity,
            "eps_i": a.eps_i,
            "delta_i": a.delta_i,
            "sigma": sigma,
        })
    return {
        "target": {"epsilon": target.epsilon, "delta": target.delta},
        "calibration": calibration.mode,
        "rule": a.rule,
        "total_queries": a.k,
        "delta_prime": a.delta_prime,
        "composed": {"epsilon": a.total_eps, "delta": a.total_delta},
        "queries": rows,
    }


def format_report(report: dict) -> str:
    lines = [
        f"target (eps, delta) = ({report['target']['epsilon']:g}, {report['target']['delta']:g})",
        f"calibration = {report['calibration']}, composition rule = {report['rule']}, "
        f"queries = {report['total_queries']}",
    ]
    for row in report["queries"]:
        lines.append(
            f"  {row['query']:<14} count={row['count']:<6d} sens={row['sensitivity']:.4g} "
            f"eps_i={row['eps_i']:.4g} delta_i={row['delta_i']:.3g} sigma={row['sigma']:.4g}"
        )
    comp = report["composed"]
    lines.append(f"composed (eps, delta) = ({comp['epsilon']:.6g}, {comp['delta']:.6g})")
    return "\n".join(lines)


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, default=lambda v: None if v != v else str(v))
