"""Exact reference samples for Gaussian targets truncated to a constraint set.

Proposals are drawn from the unconstrained Gaussian and kept when feasible,
so accepted points follow the truncated law exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import contains


class AcceptanceStarvation(RuntimeError):
    """Too few proposals landed in the constraint set."""


@dataclass(frozen=True)
class GaussianProposal:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match the mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", np.linalg.cholesky(cov))

    @classmethod
    def standard(cls, dim):
        return cls(np.zeros(dim), np.eye(dim))

    @classmethod
    def from_potential(cls, potential):
        """Unconstrained Gaussian ``exp(-f)`` of a quadratic potential."""
        return cls(np.zeros(potential.dim), potential.covariance)

    @property
    def dim(self) -> int:
        return self.mean.size

    def draw(self, rng, n):
        return self.mean + rng.standard_normal((n, self.dim)) @ self._chol.T

    def describe(self) -> str:
        return f"N(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


@dataclass(frozen=True, eq=False)
class ReferenceSample:
    points: np.ndarray
    acceptance_rate: float
    proposal: str
    seed: int
    n_proposed: int = 0

    def __len__(self):
        return self.points.shape[0]


def rejection_sample(constraint, proposal: GaussianProposal, n: int, seed,
                     max_proposals: int | None = None, chunk: int = 65536) -> ReferenceSample:
    """Draw ``n`` points from ``proposal`` restricted to ``constraint``.

    Proposals are generated in chunks and scanned in order, so the result
    depends only on ``seed``. Raises :class:`AcceptanceStarvation` once
    ``max_proposals`` (default ``1000 n``) are used up.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if proposal.dim != constraint.dim:
        raise ValueError("proposal and constraint dimensions differ")
    cap = 1000 * n if max_proposals is None else int(max_proposals)
    rng = np.random.default_rng(seed)
    kept = []
    n_kept = 0
    proposed = 0
    while n_kept < n:
        if proposed >= cap:
            raise AcceptanceStarvation(
                f"only {n_kept} of {n} points accepted after {proposed} proposals")
        size = min(chunk, cap - proposed)
        Z = proposal.draw(rng, size)
        ok = np.asarray(contains(constraint, Z))
        need = n - n_kept
        hits = np.flatnonzero(ok)
        if hits.size >= need:
            # count proposals only up to the n-th acceptance
            proposed += int(hits[need - 1]) + 1
            hits = hits[:need]
        else:
            proposed += size
        kept.append(Z[hits])
        n_kept += hits.size
    pts = np.concatenate(kept)
    return ReferenceSample(pts, n / proposed, proposal.describe(), seed, proposed)


def acceptance_rate(constraint, proposal: GaussianProposal, n_proposals: int, seed) -> float:
    """Fraction of ``n_proposals`` fixed proposals that land in the set."""
    rng = np.random.default_rng(seed)
    Z = proposal.draw(rng, n_proposals)
    return float(np.mean(contains(constraint, Z)))


def moments(sample):
    """Sample mean and unbiased covariance of a :class:`ReferenceSample` or array."""
    pts = sample.points if isinstance(sample, ReferenceSample) else np.asarray(sample, dtype=float)
    if pts.shape[0] < 2:
        raise ValueError("need at least two points")
    return pts.mean(axis=0), np.cov(pts, rowvar=False, ddof=1).reshape(pts.shape[1], pts.shape[1])
