"""Target potentials ``f`` with full and minibatch gradient oracles.

Every potential exposes ``value(x)`` and ``grad(x)`` for a point ``(d,)`` or a
batch ``(N, d)``. Data-driven potentials are sums over data points,
``f = sum_j f_j``, and additionally provide ``grad_subset(x, idx)`` which
returns the unbiased estimate ``(n / m) sum_{j in idx} grad f_j(x)``.

The uniform prior on the constraint set contributes only a constant to ``f``
and is omitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit

LINEAR_TRUTH = np.array([1.0, -0.7, -0.5])


class DataError(ValueError):
    pass


def _batch(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise DataError(f"expected dimension {dim}, got {x.shape[-1]}")
    return x


@dataclass(frozen=True, eq=False)
class QuadraticGaussian:
    """``f(x) = x^T S x / 2`` with ``S`` the inverse covariance."""

    sigma_inv: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.sigma_inv, dtype=float))
        if S.shape[0] != S.shape[1] or not np.allclose(S, S.T, rtol=0, atol=1e-14):
            raise DataError("sigma_inv must be a symmetric square matrix")
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError as exc:
            raise DataError("sigma_inv must be positive definite") from exc
        object.__setattr__(self, "sigma_inv", S)

    @classmethod
    def from_cov_diag(cls, diag):
        return cls(np.diag(1.0 / np.asarray(diag, dtype=float)))

    @property
    def dim(self) -> int:
        return self.sigma_inv.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.sigma_inv)

    def value(self, x):
        x = _batch(x, self.dim)
        return 0.5 * np.sum(x * self.grad(x), axis=-1)

    def grad(self, x):
        x = _batch(x, self.dim)
        # row-local products keep each chain's arithmetic independent of the batch
        return np.sum(x[..., None, :] * self.sigma_inv, axis=-1)


class _DataPotential:
    features: np.ndarray

    @property
    def n_data(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def _per_datum(self, x, A, b):
        """Per-datum gradients for rows ``A`` (``(..., m, d)``) at ``x``."""
        raise NotImplementedError

    def grad_subset(self, x, idx):
        """``(n / m) sum_{j in idx} grad f_j(x)``; ``idx`` is ``(m,)`` or ``(N, m)``."""
        x = _batch(x, self.dim)
        idx = np.asarray(idx)
        m = idx.shape[-1]
        G = self._per_datum(x[..., None, :], self.features[idx], self._targets[idx])
        return (self.n_data / m) * np.sum(G, axis=-2)


@dataclass(frozen=True, eq=False)
class BayesLinear(_DataPotential):
    """``f(x) = 0.5 sum_j (y_j - x^T a_j)^2``."""

    features: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.features, dtype=float)
        y = np.asarray(self.responses, dtype=float)
        if A.ndim != 2 or y.shape != (A.shape[0],) or A.shape[0] < 1:
            raise DataError("features must be (n, d) and responses (n,) with n >= 1")
        object.__setattr__(self, "features", A)
        object.__setattr__(self, "responses", y)

    @property
    def _targets(self):
        return self.responses

    def residuals(self, x):
        x = _batch(x, self.dim)
        return x @ self.features.T - self.responses

    def value(self, x):
        r = self.residuals(x)
        return 0.5 * np.sum(r * r, axis=-1)

    @cached_property
    def _moments(self):
        A, y, n = self.features, self.responses, self.features.shape[0]
        return A.T @ A / n, A.T @ y / n, y @ y / n

    def mean_squared_residual(self, x):
        """``(1/n) |A x - y|^2`` from cached second moments; ``x`` may be a batch."""
        G, c, q = self._moments
        x = _batch(x, self.dim)
        return np.einsum("...i,ij,...j->...", x, G, x) - 2 * (x @ c) + q

    def grad(self, x):
        return self.residuals(x) @ self.features

    def _per_datum(self, x, A, y):
        r = np.sum(A * x, axis=-1) - y
        return A * r[..., None]


@dataclass(frozen=True, eq=False)
class BayesLogistic(_DataPotential):
    """Bernoulli negative log-likelihood ``sum_j log(1 + exp(-s_j b^T X_j))``.

    ``s_j = 2 y_j - 1`` is the signed label.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2 or y.shape != (X.shape[0],) or X.shape[0] < 1:
            raise DataError("features must be (n, d) and labels (n,) with n >= 1")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(int))

    @property
    def signs(self):
        return 2.0 * self.labels - 1.0

    @property
    def _targets(self):
        return self.signs

    def value(self, beta):
        beta = _batch(beta, self.dim)
        z = (beta @ self.features.T) * self.signs
        return np.sum(np.logaddexp(0.0, -z), axis=-1)

    def grad(self, beta):
        beta = _batch(beta, self.dim)
        z = (beta @ self.features.T) * self.signs
        w = -self.signs * expit(-z)
        return w @ self.features

    def _per_datum(self, beta, X, s):
        z = np.sum(X * beta, axis=-1) * s
        return X * (-s * expit(-z))[..., None]


# ---------------------------------------------------------------------------
# Gradient oracles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinibatchSpec:
    """Uniform sampling of ``batch_size`` indices without replacement."""

    batch_size: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")

    def draw(self, rng, n):
        if self.batch_size > n:
            raise DataError(f"batch size {self.batch_size} exceeds data size {n}")
        return rng.choice(n, self.batch_size, replace=False)


def grad_full(potential, x):
    return potential.grad(x)


def grad_minibatch(potential, x, spec, rng):
    """Conditionally unbiased gradient estimate from a fresh minibatch.

    A batch as large as the data set returns the full gradient and draws
    nothing from ``rng``.
    """
    if isinstance(spec, int):
        spec = MinibatchSpec(spec)
    n = potential.n_data
    if spec.batch_size > n:
        raise DataError(f"batch size {spec.batch_size} exceeds data size {n}")
    if spec.batch_size == n:
        return potential.grad(x)
    return potential.grad_subset(x, spec.draw(rng, n))


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

def make_synthetic_linear(n, rng_seed, noise=True, truth=LINEAR_TRUTH):
    """Regression data ``y = x*^T a + delta`` with ``a ~ N(2, I/2)``, ``delta ~ N(0, 1/4)``.

    Returns ``(BayesLinear, x_star)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    truth = np.asarray(truth, dtype=float)
    rng = np.random.default_rng(rng_seed)
    A = 2.0 + np.sqrt(0.5) * rng.standard_normal((n, truth.size))
    delta = 0.5 * rng.standard_normal(n) if noise else np.zeros(n)
    y = A @ truth + delta
    return BayesLinear(A, y), truth.copy()


def make_synthetic_logistic(n, beta_true, rng_seed):
    """Features ``X ~ N(0, 2 I)``; ``y = 1`` iff ``U(0,1) <= sigmoid(beta^T X)``."""
    if n < 1:
        raise ValueError("n must be positive")
    beta_true = np.asarray(beta_true, dtype=float)
    rng = np.random.default_rng(rng_seed)
    X = np.sqrt(2.0) * rng.standard_normal((n, beta_true.size))
    u = rng.random(n)
    y = (u <= expit(X @ beta_true)).astype(int)
    return BayesLogistic(X, y)
