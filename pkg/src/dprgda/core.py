"""Shared domain types, the minimax oracle surface and seeded randomness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

STREAMS = ("subsampling", "noise", "perturbation", "baseline")


class ParameterError(ValueError):
    """Raised when an algorithm parameter set fails validation."""


# ----------------------------------------------------------------------
# Projections onto Y
# ----------------------------------------------------------------------


class Unconstrained:
    """Y = R^d2; projection is the identity."""

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float).copy()

    def to_dict(self) -> dict:
        return {"kind": "unconstrained"}


@dataclass(frozen=True)
class BallProjection:
    """Euclidean ball of given radius centred at ``center`` (origin if None)."""

    radius: float = 1.0
    center: Optional[tuple] = None

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        c = np.zeros_like(y) if self.center is None else np.asarray(self.center, dtype=float)
        d = y - c
        nrm = np.linalg.norm(d)
        if nrm <= self.radius:
            return y.copy()
        return c + d * (self.radius / nrm)

    def to_dict(self) -> dict:
        return {"kind": "ball", "radius": self.radius, "center": self.center}


def projector_from_dict(d: Optional[dict]):
    if not d or d.get("kind") == "unconstrained":
        return Unconstrained()
    if d["kind"] == "ball":
        center = d.get("center")
        return BallProjection(float(d["radius"]), None if center is None else tuple(center))
    raise ValueError(f"unknown projector kind {d['kind']!r}")


# ----------------------------------------------------------------------
# Oracle
# ----------------------------------------------------------------------


class MinimaxOracle:
    """Per-sample gradient access to ``F(x, y; xi_i)`` plus projection onto Y.

    Subclasses implement :meth:`per_sample_grads`. The empirical objective is
    ``f_S(x, y) = (1/n) sum_i F(x, y; xi_i)``; the ``1/n`` factor is applied by
    the batch means here, never inside a per-sample term.

    The exact hooks (:meth:`value`, :meth:`value_grad`, :meth:`inner_maximizer`)
    are evaluation-only and must never feed an optimizer update.
    """

    n: int
    dim_x: int
    dim_y: int
    projector = Unconstrained()

    def per_sample_grads(self, x, y, idx) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(gx, gy)`` with shapes ``(len(idx), dim_x)`` and ``(len(idx), dim_y)``."""
        raise NotImplementedError

    def project(self, y):
        return self.projector(y)

    def grad(self, x, y, idx=None) -> tuple[np.ndarray, np.ndarray]:
        """Mean gradient over ``idx`` (all samples when None)."""
        if idx is None:
            idx = np.arange(self.n)
        gx, gy = self.per_sample_grads(x, y, idx)
        return gx.mean(axis=0), gy.mean(axis=0)

    # evaluation-only hooks
    def objective(self, x, y) -> float:
        raise NotImplementedError

    def inner_maximizer(self, x) -> np.ndarray:
        raise NotImplementedError

    def value(self, x) -> float:
        return self.objective(x, self.inner_maximizer(x))

    def value_grad(self, x) -> np.ndarray:
        return self.grad(x, self.inner_maximizer(x))[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.dim_x, self.dim_y


def project_y(oracle: MinimaxOracle, y) -> np.ndarray:
    return oracle.project(np.asarray(y, dtype=float))


# ----------------------------------------------------------------------
# Randomness
# ----------------------------------------------------------------------


class RandomSource:
    """Seeded generator with independent named streams.

    Each name in :data:`STREAMS` gets its own ``numpy.random.Generator``
    spawned from one ``SeedSequence``, so draws on one stream never shift
    another stream's sequence.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        children = np.random.SeedSequence(self.seed).spawn(len(STREAMS))
        self._streams = {
            name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)
        }

    def __getitem__(self, name: str) -> np.random.Generator:
        return self._streams[name]

    @property
    def subsampling(self) -> np.random.Generator:
        return self._streams["subsampling"]

    @property
    def noise(self) -> np.random.Generator:
        return self._streams["noise"]

    @property
    def perturbation(self) -> np.random.Generator:
        return self._streams["perturbation"]

    @property
    def baseline(self) -> np.random.Generator:
        return self._streams["baseline"]


def as_random_source(rng) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    return RandomSource(0 if rng is None else int(rng))


def sample_uniform_ball(rng, dim: int, radius: float) -> np.ndarray:
    """Draw one point uniformly from the ``dim``-dimensional ball of ``radius``.

    Direction is a normalized Gaussian; the radius is ``radius * U**(1/dim)``.
    ``rng`` may be a :class:`RandomSource` (uses its perturbation stream) or a
    ``numpy.random.Generator``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    gen = rng.perturbation if isinstance(rng, RandomSource) else rng
    direction = gen.standard_normal(dim)
    u = gen.random()
    if radius == 0:
        return np.zeros(dim)
    nrm = np.linalg.norm(direction)
    while nrm == 0:  # probability zero, but keep the draw well defined
        direction = gen.standard_normal(dim)
        nrm = np.linalg.norm(direction)
    return direction / nrm * (radius * u ** (1.0 / dim))


def sample_batch(rng, n: int, size: int) -> np.ndarray:
    """Indices of a without-replacement batch; the identity order when ``size == n``."""
    if size >= n:
        return np.arange(n)
    gen = rng.subsampling if isinstance(rng, RandomSource) else rng
    return np.sort(gen.choice(n, size=size, replace=False))


# ----------------------------------------------------------------------
# Budgets and parameters
# ----------------------------------------------------------------------


@dataclass
class PrivacyBudget:
    """Target ``(epsilon, delta)`` plus a ledger of consumed sub-budgets.

    ``epsilon = inf`` disables privacy (all noise scales become zero).
    Ledger rows are ``(query_class, eps_i, delta_i, count)``.
    """

    epsilon: float
    delta: float
    ledger: list = field(default_factory=list)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ParameterError("delta must lie in (0, 1)")

    @property
    def private(self) -> bool:
        return math.isfinite(self.epsilon)

    def record(self, query_class: str, eps_i: float, delta_i: float, count: int) -> None:
        if count < 0:
            raise ValueError("ledger counts must be non-negative")
        self.ledger.append((query_class, float(eps_i), float(delta_i), int(count)))

    @classmethod
    def disabled(cls) -> "PrivacyBudget":
        return cls(math.inf, 0.5)


@dataclass(frozen=True)
class AlgoParams:
    """Tunables of the outer loop and the inner updater.

    ``clip_mode`` selects where clipping happens: ``"batch"`` clips the batch
    mean (the inner updater as written), ``"per_sample"`` clips each sample's
    gradient (or gradient difference) before averaging. ``calibration`` is
    ``"formula"`` (closed-form sigmas) or ``"accountant"`` (per-query budget
    from advanced composition, sensitivity ``2C/B``).
    """

    eta: float = 0.2
    eta_H: float = 0.2
    r: float = 1e-3
    t_thres: int = 20
    D_bar: float = 1e-4
    alpha: float = 1e-3
    lam: float = 0.8
    K: int = 5
    q: int = 10
    S1: int = 200
    S2: int = 50
    T: int = 400
    C_v: float = 1.0
    C_u: float = 1.0
    clip_mode: str = "per_sample"
    calibration: str = "accountant"
    noise_constant: float = 1.0
    composition_slack: float = 0.5

    def validate(self, n: Optional[int] = None) -> "AlgoParams":
        positive = ("eta", "eta_H", "D_bar", "alpha", "lam", "C_v", "C_u", "noise_constant")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.r < 0:
            raise ParameterError("r must be non-negative")
        for name in ("t_thres", "K", "q", "S1", "S2"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ParameterError(f"{name} must be an integer >= 1, got {v!r}")
        if int(self.T) != self.T or self.T < 0:
            raise ParameterError("T must be a non-negative integer")
        if n is not None and (self.S1 > n or self.S2 > n):
            raise ParameterError(f"batch sizes S1={self.S1}, S2={self.S2} exceed n={n}")
        if self.clip_mode not in ("batch", "per_sample"):
            raise ParameterError(f"unknown clip_mode {self.clip_mode!r}")
        if self.calibration not in ("formula", "accountant"):
            raise ParameterError(f"unknown calibration {self.calibration!r}")
        if not 0 < self.composition_slack < 1:
            raise ParameterError("composition_slack must lie in (0, 1)")
        return self

    def replace(self, **changes) -> "AlgoParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def stack(blocks: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(b) for b in blocks])
