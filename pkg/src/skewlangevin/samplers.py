"""Projected and skew-reflected Langevin samplers.

One parameterized iteration covers the four algorithms::

    y      = x - eta (I + J(x)) g(x) + sqrt(2 eta) xi
    x_next = skew_project(K, J, y)

with ``g`` the full gradient (PLMC / SRNLMC) or a minibatch estimate
(PSGLD / SRNSGLD) and ``J = 0`` for the projected variants.

Random numbers: each chain owns a ``numpy.random.Generator`` (PCG64). Per
step it consumes, in order, (1) the minibatch indices if any, then (2) ``d``
standard normals (numpy's ziggurat ``standard_normal``). Ensembles derive chain
``i``'s seed from ``(seed_base, i)`` so results do not depend on how chains
are grouped or ordered.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fields import ZeroField
from .geometry import skew_project

GAUSSIAN_METHOD = "numpy-PCG64-ziggurat"
DIVERGENCE_LIMIT = 1e6


class InfeasibleStart(ValueError):
    pass


class SamplerDivergence(FloatingPointError):
    """The proposal left any sensible region; the step size is too large."""


@dataclass(frozen=True)
class SamplerConfig:
    """Settings for one chain.

    ``batch_size=None`` selects full gradients. ``fallback`` is the
    ray-miss policy of the skew projection (``"error"`` or ``"euclidean"``).
    """

    eta: float
    n_steps: int
    field: object = field(default_factory=ZeroField)
    batch_size: int | None = None
    fallback: str = "error"
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be non-negative")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.fallback not in ("error", "euclidean"):
            raise ValueError(f"unknown fallback policy {self.fallback!r}")

    @property
    def algorithm(self) -> str:
        skew = not getattr(self.field, "is_zero", False)
        if self.batch_size is None:
            return "SRNLMC" if skew else "PLMC"
        return "SRNSGLD" if skew else "PSGLD"


@dataclass
class ChainState:
    x: np.ndarray
    rng: np.random.Generator
    step_index: int = 0
    fallback_count: int = 0


@dataclass
class Trajectory:
    points: np.ndarray
    steps: np.ndarray
    config: SamplerConfig
    fallback_count: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.points[-1]


def derive_seed(seed_base: int, index: int) -> int:
    """64-bit seed of chain ``index`` in an ensemble seeded with ``seed_base``."""
    ss = np.random.SeedSequence([int(seed_base), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def chain_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# Core transition
# ---------------------------------------------------------------------------

def _transition(X, G, xi, cfg, constraint):
    """Advance a batch ``X`` given gradients ``G`` and noise ``xi``.

    Returns the new batch and a boolean mask of rows where the ray-miss
    fallback fired.
    """
    drift = G if cfg.field.is_zero else G + cfg.field.apply(X, G)
    Y = X - cfg.eta * drift + np.sqrt(2.0 * cfg.eta) * xi
    if not np.all(np.isfinite(Y)):
        raise SamplerDivergence("non-finite proposal; reduce the step size")
    if np.max(np.abs(Y)) > DIVERGENCE_LIMIT:
        raise SamplerDivergence(f"proposal norm exceeds {DIVERGENCE_LIMIT:g}; reduce the step size")
    return skew_project(constraint, cfg.field, Y, fallback=cfg.fallback, return_fallback=True)


def _full_or_subset(potential, X, idx):
    if idx is None:
        return potential.grad(X)
    return potential.grad_subset(X, idx)


def _uses_minibatch(cfg, potential):
    if cfg.batch_size is None:
        return False
    n = potential.n_data
    if cfg.batch_size > n:
        raise ValueError(f"batch size {cfg.batch_size} exceeds data size {n}")
    return cfg.batch_size < n


def step(state: ChainState, cfg: SamplerConfig, constraint, potential) -> ChainState:
    """One iteration of the configured algorithm for a single chain."""
    if not constraint.contains(state.x):
        raise InfeasibleStart("current iterate is outside the constraint set")
    X = np.asarray(state.x, dtype=float)[None]
    idx = None
    if _uses_minibatch(cfg, potential):
        idx = state.rng.choice(potential.n_data, cfg.batch_size, replace=False)[None]
    xi = state.rng.standard_normal(X.shape[1])[None]
    X, fell = _transition(X, _full_or_subset(potential, X, idx), xi, cfg, constraint)
    return ChainState(X[0], state.rng, state.step_index + 1, state.fallback_count + int(fell[0]))


# ---------------------------------------------------------------------------
# Ensemble engine
# ---------------------------------------------------------------------------

class _Engine:
    """Vectorized driver for a batch of independent chains."""

    block_bytes = 32 * 2 ** 20

    def __init__(self, X0, cfg, constraint, potential, seeds):
        self.cfg = cfg
        self.constraint = constraint
        self.potential = potential
        self.X = np.array(X0, dtype=float)
        self.rngs = [chain_rng(s) for s in seeds]
        self.fallbacks = np.zeros(len(seeds), dtype=int)
        self.minibatch = _uses_minibatch(cfg, potential)
        self._noise = None
        self._pos = 0
        if not np.all(constraint.contains(self.X)):
            raise InfeasibleStart("initial point lies outside the constraint set")

    def _refill(self, remaining):
        N, d = self.X.shape
        B = int(max(1, min(remaining, self.block_bytes // (8 * N * d), 4096)))
        # drawing (B, d) at once yields the same stream as B draws of size d
        self._noise = np.stack([r.standard_normal((B, d)) for r in self.rngs], axis=1)
        self._pos = 0

    def advance(self, remaining):
        N, d = self.X.shape
        if self.minibatch:
            n = self.potential.n_data
            m = self.cfg.batch_size
            idx = np.empty((N, m), dtype=np.intp)
            xi = np.empty((N, d))
            for i, r in enumerate(self.rngs):
                idx[i] = r.choice(n, m, replace=False)
                xi[i] = r.standard_normal(d)
        else:
            idx = None
            if self._noise is None or self._pos >= self._noise.shape[0]:
                self._refill(remaining)
            xi = self._noise[self._pos]
            self._pos += 1
        G = _full_or_subset(self.potential, self.X, idx)
        self.X, fell = _transition(self.X, G, xi, self.cfg, self.constraint)
        self.fallbacks += fell

    def run(self, n_steps, thin, record=True, observer=None):
        N, d = self.X.shape
        n_rec = n_steps // thin + 1
        out = np.empty((N, n_rec, d)) if record else None
        if record:
            out[:, 0] = self.X
        if observer is not None:
            observer(0, self.X)
        for k in range(1, n_steps + 1):
            self.advance(n_steps - k + 1)
            if observer is not None:
                observer(k, self.X)
            if record and k % thin == 0:
                out[:, k // thin] = self.X
        return out


@dataclass
class Ensemble:
    """Recorded paths of independent chains, ``points[i]`` belonging to chain ``i``."""

    points: np.ndarray
    steps: np.ndarray
    config: SamplerConfig
    seeds: list
    fallback_counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, i) -> Trajectory:
        return Trajectory(
            self.points[i], self.steps, replace(self.config, seed=self.seeds[i]),
            int(self.fallback_counts[i]), dict(self.metadata),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def terminal(self) -> np.ndarray:
        return self.points[:, -1]

    def at_step(self, k) -> np.ndarray:
        j = np.searchsorted(self.steps, k)
        if j >= self.steps.size or self.steps[j] != k:
            raise KeyError(f"step {k} was not recorded")
        return self.points[:, j]


def _metadata(cfg):
    return {"algorithm": cfg.algorithm, "gaussian": GAUSSIAN_METHOD}


def _initial_batch(x0, n_chains, dim):
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        return np.broadcast_to(x0, (n_chains, x0.size)).copy()
    if x0.shape != (n_chains, dim):
        raise ValueError(f"initial points must have shape ({n_chains}, {dim})")
    return x0.copy()


def run_chain(x0, cfg: SamplerConfig, constraint, potential) -> Trajectory:
    """Run one chain seeded by ``cfg.seed``, recording every ``cfg.thin``-th iterate."""
    x0 = np.asarray(x0, dtype=float)
    if not constraint.contains(x0):
        raise InfeasibleStart("initial point lies outside the constraint set")
    eng = _Engine(x0[None], cfg, constraint, potential, [cfg.seed])
    pts = eng.run(cfg.n_steps, cfg.thin)
    steps = np.arange(0, cfg.n_steps + 1, cfg.thin)
    return Trajectory(pts[0], steps, cfg, int(eng.fallbacks[0]), _metadata(cfg))


def run_ensemble(x0, cfg: SamplerConfig, constraint, potential, n_chains: int,
                 seed_base: int, record=True, observer=None) -> Ensemble:
    """Run ``n_chains`` independent chains; chain ``i`` is seeded by ``derive_seed(seed_base, i)``.

    ``x0`` is one shared starting point or an ``(n_chains, d)`` array.
    ``observer(k, X)`` is called with the full batch after every step
    (``k = 0`` is the start), which allows streaming statistics without
    recording paths (``record=False``).
    """
    if n_chains < 1:
        raise ValueError("n_chains must be at least 1")
    X0 = _initial_batch(x0, n_chains, constraint.dim)
    seeds = [derive_seed(seed_base, i) for i in range(n_chains)]
    eng = _Engine(X0, cfg, constraint, potential, seeds)
    pts = eng.run(cfg.n_steps, cfg.thin, record=record, observer=observer)
    if pts is None:
        pts = eng.X[:, None, :].copy()
        steps = np.array([cfg.n_steps])
    else:
        steps = np.arange(0, cfg.n_steps + 1, cfg.thin)
    return Ensemble(pts, steps, cfg, seeds, eng.fallbacks.copy(), _metadata(cfg))
