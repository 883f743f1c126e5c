"""Sample-quality and efficiency metrics.

Metric tables use the long CSV layout ``method, seed, checkpoint, metric,
value`` with an extra ``dim`` column for per-coordinate quantities.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import wasserstein_distance

from .samplers import SamplerConfig, run_ensemble

METRIC_COLUMNS = ["method", "seed", "checkpoint", "metric", "value"]
W1_COLUMNS = ["method", "seed", "checkpoint", "dim", "metric", "value"]


# ---------------------------------------------------------------------------
# Distances and regression metrics
# ---------------------------------------------------------------------------

def _samples_2d(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or A.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty (n, d) array")
    return A


def w1_per_dimension(A, B):
    """1-D Wasserstein-1 distance between the marginals of ``A`` and ``B``.

    Equal sizes use the sorted coupling directly. Unequal sizes integrate
    ``|F_A^-1 - F_B^-1|`` exactly over the merged quantile breakpoints.
    """
    A = _samples_2d(A, "A")
    B = _samples_2d(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ValueError("A and B must have the same dimension")
    if A.shape[0] == B.shape[0]:
        return np.mean(np.abs(np.sort(A, axis=0) - np.sort(B, axis=0)), axis=0)
    return np.array([wasserstein_distance(A[:, k], B[:, k]) for k in range(A.shape[1])])


def mse(x, data):
    """Mean squared residual ``(1/n) sum (y_j - x^T a_j)^2``; ``x`` may be a batch."""
    r = data.residuals(x)
    return np.mean(r * r, axis=-1)


def accuracy(beta, data):
    """Fraction of correct labels under the rule ``beta^T X >= 0 -> 1``."""
    beta = np.asarray(beta, dtype=float)
    pred = (beta @ data.features.T) >= 0
    return np.mean(pred == (data.labels == 1), axis=-1)


# ---------------------------------------------------------------------------
# Asymptotic variance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceEstimate:
    sigma2_hat: float
    n_batches: int
    batch_len: int
    standard_error: float


def discard_burn_in(series, fraction=0.2):
    series = np.asarray(series)
    if not 0 <= fraction < 1:
        raise ValueError("burn-in fraction must lie in [0, 1)")
    return series[int(np.floor(fraction * series.shape[0])):]


def asymptotic_variance_batch_means(series, n_batches=None) -> VarianceEstimate:
    """Batch-means estimate of the time-average CLT variance.

    The series is cut into ``n_batches`` contiguous batches of equal length
    ``b`` (default ``floor(sqrt(N))`` batches); leftover leading points are
    dropped. ``sigma2 = b * Var(batch means)`` with divisor ``n_batches - 1``.
    """
    x = np.asarray(series, dtype=float).ravel()
    N = x.size
    if n_batches is None:
        n_batches = int(np.sqrt(N))
    n_batches = int(n_batches)
    if n_batches < 2 or N < 2 * n_batches:
        raise ValueError(f"series of length {N} is too short for {n_batches} batches")
    b = N // n_batches
    means = x[N - n_batches * b:].reshape(n_batches, b).mean(axis=1)
    s2 = float(b * np.var(means, ddof=1))
    return VarianceEstimate(s2, n_batches, b, s2 * np.sqrt(2.0 / (n_batches - 1)))


# ---------------------------------------------------------------------------
# Scaled cumulant generating function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScgfEstimate:
    lambda_hat: float
    stderr: float
    n_chains: int
    n_steps: int


def _scgf_from_sums(S, n_steps, eta):
    # S[i] = sum_k g(x_k) over chain i; the eta * S.max() shift keeps exp finite
    t = n_steps * eta
    top = np.max(S)
    with np.errstate(over="raise"):
        W = np.exp(eta * (S - top))
    mw = W.mean()
    if not (np.isfinite(mw) and mw > 0):
        raise FloatingPointError("SCGF weights under/overflowed; g * t is too large")
    lam = top / n_steps + np.log(mw) / t
    se = np.std(W, ddof=1) / np.sqrt(W.size) / mw / t
    return float(lam), float(se)


def scgf_estimate(constraint, potential, field, g, t_horizon, eta, n_chains, seed,
                  x0=None, fallback="euclidean"):
    """Monte-Carlo estimate of ``(1/t) log E exp(int_0^t g(X_s) ds)``.

    The integral is the left Riemann sum ``eta * sum_{k<n} g(x_k)`` along
    ``n = round(t / eta)`` steps of the discretized chain, started from
    ``x0`` (default: the constraint's anchor). ``g`` may be one callable or
    a list of callables evaluated on the same chains; the return value
    mirrors that shape. The standard error comes from the delta method over
    chains.
    """
    if n_chains < 2:
        raise ValueError("need at least two chains")
    n_steps = int(round(t_horizon / eta))
    if n_steps < 1:
        raise ValueError("t_horizon must cover at least one step")
    single = callable(g)
    gs = [g] if single else list(g)
    S = np.zeros((len(gs), n_chains))

    def observe(k, X):
        if k < n_steps:
            for j, gj in enumerate(gs):
                S[j] += np.broadcast_to(gj(X), (n_chains,))

    cfg = SamplerConfig(eta, n_steps, field, fallback=fallback)
    start = getattr(constraint, "anchor", None) if x0 is None else x0
    run_ensemble(start, cfg, constraint, potential, n_chains, seed, record=False, observer=observe)
    out = [ScgfEstimate(*_scgf_from_sums(S[j], n_steps, eta), n_chains, n_steps)
           for j in range(len(gs))]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Metric series and summaries
# ---------------------------------------------------------------------------

@dataclass
class MetricSeries:
    """One metric tracked at increasing checkpoints for one method and seed."""

    method: str
    metric: str
    checkpoints: np.ndarray
    values: np.ndarray
    seed: int = 0
    dim: int | None = None
    error_bar: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.checkpoints = np.asarray(self.checkpoints, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        if self.checkpoints.shape != self.values.shape:
            raise ValueError("checkpoints and values must have the same length")
        if np.any(np.diff(self.checkpoints) <= 0):
            raise ValueError("checkpoints must increase")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite values in {self.method}/{self.metric}")

    def rows(self):
        for c, v in zip(self.checkpoints, self.values):
            row = {"method": self.method, "seed": self.seed, "checkpoint": int(c),
                   "metric": self.metric, "value": float(v)}
            if self.dim is not None:
                row["dim"] = self.dim
            yield row


def w1_series(ensemble, reference, method, seed, metric="w1"):
    """Per-dimension W1 curves of an ensemble's recorded steps against ``reference``."""
    ref = np.asarray(reference, dtype=float)
    vals = np.array([w1_per_dimension(ensemble.points[:, j], ref)
                     for j in range(ensemble.steps.size)])
    return [MetricSeries(method, metric, ensemble.steps, vals[:, k], seed, dim=k)
            for k in range(vals.shape[1])]


def write_metrics_csv(series, path):
    """Write series in long format; a ``dim`` column is added when any series has one."""
    series = list(series)
    cols = W1_COLUMNS if any(s.dim is not None for s in series) else METRIC_COLUMNS
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for s in series:
            for row in s.rows():
                row.setdefault("dim", "")
                w.writerow({c: _fmt(row[c]) for c in cols})


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def read_metrics_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, keep_default_na=False)


def compare_methods(series) -> pd.DataFrame:
    """Mean and unbiased std across seeds at each checkpoint.

    Series of one ``(method, metric, dim)`` group must share checkpoints.
    One seed gives ``std = 0``.
    """
    groups = {}
    for s in series:
        groups.setdefault((s.method, s.metric, -1 if s.dim is None else s.dim), []).append(s)
    if not groups:
        raise ValueError("no series to summarize")
    rows = []
    for (method, metric, dim), members in groups.items():
        ref = members[0].checkpoints
        for s in members[1:]:
            if not np.array_equal(s.checkpoints, ref):
                raise ValueError(f"misaligned checkpoints for {method}/{metric}")
        V = np.stack([s.values for s in members])
        std = V.std(axis=0, ddof=1) if len(members) > 1 else np.zeros(ref.size)
        for c, m, sd in zip(ref, V.mean(axis=0), std):
            rows.append({"method": method, "metric": metric, "dim": "" if dim < 0 else dim,
                         "checkpoint": int(c), "mean": float(m), "std": float(sd),
                         "n_seeds": len(members)})
    return pd.DataFrame(rows, columns=["method", "metric", "dim", "checkpoint", "mean", "std", "n_seeds"])
