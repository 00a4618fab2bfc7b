"""Problem instances exposing the :class:`~dprgda.core.MinimaxOracle` surface.

``MatrixSensing`` is the low-rank sensing minimax problem

    f(U, V, y) = (1/n) sum_i [ y_i (<A_i, U V^T> - b_i) - y_i^2 / 2 ]

whose inner maximizer is the residual vector, so the value function is the
mean squared residual ``Phi = (1/2n) sum_i r_i^2``. ``QuadraticSaddle`` is a
small analytic instance used by property tests.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import MinimaxOracle, RandomSource, Unconstrained, projector_from_dict

FORMAT_VERSION = 1


def _generator(rng, stream="baseline"):
    if isinstance(rng, RandomSource):
        return rng[stream]
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class MatrixSensing(MinimaxOracle):
    """Rank-``r`` matrix sensing as a nonconvex / strongly-concave minimax problem.

    The x-variable is ``vec(U) || vec(V)`` (row-major), of length
    ``(p + q) * r``; the y-variable has one coordinate per measurement.
    """

    def __init__(self, A, b, rank: int, X_star=None, sigma_noise: float = 0.0):
        self.A = np.ascontiguousarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.n, self.p, self.q = self.A.shape
        self.rank = int(rank)
        if self.b.shape != (self.n,):
            raise ValueError("b must have one entry per sensing matrix")
        self.X_star = None if X_star is None else np.asarray(X_star, dtype=float)
        self.sigma_noise = float(sigma_noise)
        self.dim_x = (self.p + self.q) * self.rank
        self.dim_y = self.n
        self.projector = Unconstrained()
        self._A_flat = self.A.reshape(self.n, -1)

    # -- layout ---------------------------------------------------------
    def split(self, x):
        x = np.asarray(x, dtype=float)
        k = self.p * self.rank
        return x[:k].reshape(self.p, self.rank), x[k:].reshape(self.q, self.rank)

    def join(self, U, V) -> np.ndarray:
        return np.concatenate([np.ravel(U), np.ravel(V)])

    def measurements(self, x, idx=None) -> np.ndarray:
        U, V = self.split(x)
        A = self._A_flat if idx is None else self._A_flat[idx]
        return A @ (U @ V.T).ravel()

    def residuals(self, x, idx=None) -> np.ndarray:
        b = self.b if idx is None else self.b[idx]
        return self.measurements(x, idx) - b

    def _jacobian_rows(self, x, idx, weights) -> np.ndarray:
        """Rows ``w_i * d<A_i, U V^T>/dx`` for ``i`` in ``idx``."""
        U, V = self.split(x)
        A = self.A[idx]
        gU = np.einsum("bpq,qr->bpr", A, V) * weights[:, None, None]
        gV = np.einsum("bpq,pr->bqr", A, U) * weights[:, None, None]
        return np.concatenate([gU.reshape(len(idx), -1), gV.reshape(len(idx), -1)], axis=1)

    # -- oracle ---------------------------------------------------------
    def per_sample_grads(self, x, y, idx):
        idx = np.asarray(idx)
        y = np.asarray(y, dtype=float)
        yb = y[idx]
        gx = self._jacobian_rows(x, idx, yb)
        gy = np.zeros((len(idx), self.n))
        gy[np.arange(len(idx)), idx] = self.residuals(x, idx) - yb
        return gx, gy

    def grad(self, x, y, idx=None):
        if idx is not None:
            return super().grad(x, y, idx)
        y = np.asarray(y, dtype=float)
        return self._weighted_jacobian_sum(x, y) / self.n, (self.residuals(x) - y) / self.n

    def _weighted_jacobian_sum(self, x, w) -> np.ndarray:
        U, V = self.split(x)
        M = np.tensordot(w, self.A, axes=1)  # sum_i w_i A_i
        return self.join(M @ V, M.T @ U)

    def objective(self, x, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(np.mean(y * self.residuals(x) - 0.5 * y**2))

    def inner_maximizer(self, x) -> np.ndarray:
        return self.residuals(x)

    def value(self, x) -> float:
        r = self.residuals(x)
        return float(0.5 * np.mean(r**2))

    def value_grad(self, x) -> np.ndarray:
        return self._weighted_jacobian_sum(x, self.residuals(x)) / self.n

    def cross_lipschitz(self, x) -> float:
        """Exact Lipschitz constant of ``y -> grad_x f(x, y)`` at this ``x``."""
        J = self._jacobian_rows(x, np.arange(self.n), np.ones(self.n))
        return float(np.linalg.norm(J, 2) / self.n)

    # -- single-level view used by the SPIDER-on-Phi baseline ------------
    def phi_per_sample_grads(self, x, idx) -> np.ndarray:
        """Per-sample gradients of ``0.5 * r_i(x)^2``."""
        idx = np.asarray(idx)
        return self._jacobian_rows(x, idx, self.residuals(x, idx))

    # -- helpers --------------------------------------------------------
    def initial_point(self, rng=None, scale: float = 0.1):
        """``(x0, y0)`` with i.i.d. ``N(0, scale^2)`` factor entries and ``y0 = 0``."""
        gen = _generator(rng)
        x0 = scale * gen.standard_normal(self.dim_x)
        return x0, np.zeros(self.n)

    def to_dict(self) -> dict:
        return {
            "format": "dprgda.matrix_sensing",
            "version": FORMAT_VERSION,
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "rank": self.rank,
            "sigma_noise": self.sigma_noise,
            "A": self.A.reshape(self.n, -1).tolist(),
            "b": self.b.tolist(),
            "X_star": None if self.X_star is None else self.X_star.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixSensing":
        if d.get("format") != "dprgda.matrix_sensing":
            raise ValueError("not a matrix sensing instance document")
        n, p, q = d["n"], d["p"], d["q"]
        A = np.asarray(d["A"], dtype=float).reshape(n, p, q)
        X = d.get("X_star")
        X = None if X is None else np.asarray(X, dtype=float).reshape(p, q)
        return cls(A, d["b"], d["rank"], X, d.get("sigma_noise", 0.0))

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(self.A.tobytes())
        h.update(self.b.tobytes())
        h.update(str(self.rank).encode())
        return h.hexdigest()[:16]


def generate_matrix_sensing(rng, p: int = 20, q: int = 20, r: int = 3, n: int = 400,
                            sigma_noise: float = 0.01, scale: float = 1.0) -> MatrixSensing:
    """Random sensing instance with a planted rank-``r`` target.

    ``A_i`` entries are ``N(0, 1/(pq))``; the target ``U* V*^T`` has Gaussian
    factors rescaled to Frobenius norm ``scale``; ``b_i = <A_i, X*> + N(0, sigma^2)``.
    """
    for name, v in (("p", p), ("q", q), ("r", r), ("n", n)):
        if v < 1:
            raise ValueError(f"{name} must be >= 1")
    if r > min(p, q):
        raise ValueError(f"rank {r} exceeds min(p, q) = {min(p, q)}")
    gen = _generator(rng)
    A = gen.normal(0.0, 1.0 / np.sqrt(p * q), size=(n, p, q))
    X = gen.standard_normal((p, r)) @ gen.standard_normal((q, r)).T
    nrm = np.linalg.norm(X)
    X = X * (scale / nrm) if nrm > 0 else X
    b = A.reshape(n, -1) @ X.ravel() + sigma_noise * gen.standard_normal(n)
    return MatrixSensing(A, b, r, X, sigma_noise)


def save_instance(instance, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(instance.to_dict()))
    return path


def load_instance(path):
    d = json.loads(Path(path).read_text())
    kind = d.get("format")
    if kind == "dprgda.matrix_sensing":
        return MatrixSensing.from_dict(d)
    if kind == "dprgda.quadratic_saddle":
        return QuadraticSaddle.from_dict(d)
    raise ValueError(f"unrecognised instance format {kind!r}")


class QuadraticSaddle(MinimaxOracle):
    """``F_i(x, y) = x'Hx x/2 + x'By + y'Hy y/2 + a_i'x + c_i'y``.

    ``Hy`` must be negative definite; the inner problem is then
    ``mu``-strongly concave with ``mu = -lambda_max(Hy)``.
    """

    def __init__(self, Hx, B, Hy, a=None, c=None, n: int = 1, projector=None):
        self.Hx = np.atleast_2d(np.asarray(Hx, dtype=float))
        self.Hy = np.atleast_2d(np.asarray(Hy, dtype=float))
        self.dim_x = self.Hx.shape[0]
        self.dim_y = self.Hy.shape[0]
        self.B = np.zeros((self.dim_x, self.dim_y)) if B is None else np.asarray(B, dtype=float).reshape(self.dim_x, self.dim_y)
        self.a = np.zeros((n, self.dim_x)) if a is None else np.asarray(a, dtype=float).reshape(-1, self.dim_x)
        self.c = np.zeros((n, self.dim_y)) if c is None else np.asarray(c, dtype=float).reshape(-1, self.dim_y)
        self.n = self.a.shape[0]
        if self.c.shape[0] != self.n:
            raise ValueError("a and c must have the same number of samples")
        if np.linalg.eigvalsh(self.Hy).max() >= 0:
            raise ValueError("Hy must be negative definite")
        self.projector = projector if projector is not None else Unconstrained()

    @property
    def mu(self) -> float:
        return float(-np.linalg.eigvalsh(self.Hy).max())

    def per_sample_grads(self, x, y, idx):
        idx = np.asarray(idx)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = (self.Hx @ x + self.B @ y)[None, :] + self.a[idx]
        gy = (self.B.T @ x + self.Hy @ y)[None, :] + self.c[idx]
        return gx, gy

    def objective(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return float(0.5 * x @ self.Hx @ x + x @ self.B @ y + 0.5 * y @ self.Hy @ y
                     + self.a.mean(0) @ x + self.c.mean(0) @ y)

    def inner_maximizer(self, x, tol: float = 1e-13, maxiter: int = 100000) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = -np.linalg.solve(self.Hy, self.B.T @ x + self.c.mean(0))
        if isinstance(self.projector, Unconstrained):
            return y
        # projected gradient ascent; step 1/L contracts at rate 1 - mu/L
        L = float(np.abs(np.linalg.eigvalsh(self.Hy)).max())
        y = self.projector(y)
        for _ in range(maxiter):
            g = self.B.T @ x + self.Hy @ y + self.c.mean(0)
            y_new = self.projector(y + g / L)
            if np.linalg.norm(y_new - y) <= tol:
                return y_new
            y = y_new
        return y

    def phi_hessian(self) -> np.ndarray:
        """Exact Hessian of the value function (unconstrained Y)."""
        return self.Hx - self.B @ np.linalg.solve(self.Hy, self.B.T)

    def to_dict(self) -> dict:
        return {
            "format": "dprgda.quadratic_saddle",
            "version": FORMAT_VERSION,
            "Hx": self.Hx.tolist(),
            "B": self.B.tolist(),
            "Hy": self.Hy.tolist(),
            "a": self.a.tolist(),
            "c": self.c.tolist(),
            "projector": self.projector.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticSaddle":
        return cls(d["Hx"], d["B"], d["Hy"], d["a"], d["c"], projector=projector_from_dict(d.get("projector")))

    def fingerprint(self) -> str:
        import hashlib

        return hashlib.sha256(json.dumps(self.to_dict()).encode()).hexdigest()[:16]


def random_quadratic_saddle(rng, dim_x: int, dim_y: int, n: int = 10, mu: float = 1.0,
                            L: float = 2.0, coupling: float = 0.5, shift: float = 1.0,
                            projector=None) -> QuadraticSaddle:
    """Random saddle with inner Hessian spectrum in ``[-L, -mu]``."""
    gen = _generator(rng)
    Q, _ = np.linalg.qr(gen.standard_normal((dim_y, dim_y)))
    spectrum = np.linspace(mu, L, dim_y) if dim_y > 1 else np.array([mu])
    Hy = -(Q * spectrum) @ Q.T
    Hx = gen.standard_normal((dim_x, dim_x))
    Hx = 0.5 * (Hx + Hx.T)
    B = coupling * gen.standard_normal((dim_x, dim_y))
    a = shift * gen.standard_normal((n, dim_x))
    c = shift * gen.standard_normal((n, dim_y))
    return QuadraticSaddle(Hx, B, Hy, a, c, projector=projector)


def value_quadratic(H, dim_y: int = 1) -> QuadraticSaddle:
    """Saddle with a decoupled inner block so that ``Phi(x) = x'Hx/2``."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    return QuadraticSaddle(H, None, -np.eye(dim_y))


class BilinearSaddle(MinimaxOracle):
    """``F(x, y) = x' B y`` (one sample); not strongly concave, used for GDA dynamics."""

    def __init__(self, B):
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.dim_x, self.dim_y = self.B.shape
        self.n = 1
        self.projector = Unconstrained()

    def per_sample_grads(self, x, y, idx):
        k = len(np.asarray(idx))
        gx = np.tile(self.B @ np.asarray(y, dtype=float), (k, 1))
        gy = np.tile(self.B.T @ np.asarray(x, dtype=float), (k, 1))
        return gx, gy

    def objective(self, x, y) -> float:
        return float(np.asarray(x) @ self.B @ np.asarray(y))
