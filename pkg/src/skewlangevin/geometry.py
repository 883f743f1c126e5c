"""Compact convex constraint sets: membership, normals and projections.

Two families are supported:

- :class:`Ball` -- Euclidean ball ``{x : ||x - c|| <= r}`` with closed-form
  projection and ray intersection.
- :class:`Sublevel` -- ``{x : g(x) <= level}`` for a smooth convex ``g``.
  The Euclidean projection solves the KKT system ``p = x - t grad g(p)``,
  ``g(p) = level`` by a bracketed search on the multiplier ``t``.

Every function accepts a single point of shape ``(d,)`` or a batch of shape
``(n, d)``; batches are processed row-wise.

The skew projection moves an infeasible point ``x`` back into the set along
``-n_J``, where ``n_J`` is the skew unit normal evaluated at the Euclidean
projection of ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

TOL_BOUNDARY = 1e-8
TOL_PROJ = 1e-10
MAX_ITER = 200


class GeometryError(ValueError):
    """Raised for invalid geometric input (dimension mismatch, off-boundary point)."""


class ProjectionError(RuntimeError):
    """Raised when an iterative projection fails to converge."""


class RayMiss(RuntimeError):
    """Raised when the skew-projection ray never re-enters the set."""


# ---------------------------------------------------------------------------
# Level functions for sublevel sets
# ---------------------------------------------------------------------------

@runtime_checkable
class LevelFunction(Protocol):
    dim: int

    def value(self, x: np.ndarray) -> np.ndarray: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class SmoothFunction:
    """A general smooth convex function given by value and gradient callables.

    Both callables must accept arrays of shape ``(n, d)`` and return shapes
    ``(n,)`` and ``(n, d)`` respectively.
    """

    value_fn: object
    grad_fn: object
    dim: int

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.value_fn(x[None])[0]
        return self.value_fn(x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.grad_fn(x[None])[0]
        return self.grad_fn(x)


@dataclass(frozen=True)
class SmoothedLp:
    """Smoothed l_p potential ``g(x) = sum_i (x_i^2 + eps^2)^(p/2)``.

    The function is separable, so the proximal equation
    ``u + t * g_i'(u) = x_i`` decouples per coordinate; :meth:`prox` exploits
    this. For ``p < 2`` a strictly positive ``epsilon`` is required, otherwise
    the second derivative blows up at the origin.
    """

    p: float
    epsilon: float
    dim: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.p < 2 and self.epsilon <= 0:
            raise ValueError("epsilon > 0 is required when p < 2")
        if self.dim < 1:
            raise ValueError("dim must be positive")

    @property
    def minimum(self) -> float:
        return self.dim * self.epsilon ** self.p

    def _base(self, x):
        return x * x + self.epsilon ** 2

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(self._base(x) ** (self.p / 2), axis=-1)

    def coord_grad(self, x):
        """Per-coordinate derivative ``p x (x^2 + eps^2)^(p/2 - 1)``."""
        x = np.asarray(x, dtype=float)
        if self.p == 2:
            return 2.0 * x
        return self.p * x * self._base(x) ** (self.p / 2 - 1)

    grad = coord_grad

    def coord_curv(self, x):
        """Per-coordinate second derivative (diagonal of the Hessian)."""
        x = np.asarray(x, dtype=float)
        p = self.p
        if p == 2:
            return np.full_like(x, 2.0)
        b = self._base(x)
        if self.epsilon > 0:
            return p * b ** (p / 2 - 2) * ((p - 1) * x * x + self.epsilon ** 2)
        # eps = 0 (only allowed for p >= 2): p (p - 1) |x|^(p - 2)
        return p * (p - 1) * np.abs(x) ** (p - 2)

    def prox(self, x, t, start=None):
        """Solve ``u + t * grad g(u) = x`` coordinate-wise for ``t >= 0``.

        Safeguarded Newton on ``[0, |x_i|]`` (the solution shares the sign of
        ``x_i`` and is no larger in magnitude). ``start`` warm-starts the
        iteration from a previous solution.
        """
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if t.ndim and x.ndim > t.ndim:
            t = t[..., None]
        shape = x.shape
        a = np.abs(x).ravel()
        tt = np.broadcast_to(t, shape).ravel()
        lo = np.zeros_like(a)
        hi = a.copy()
        u = a.copy() if start is None else np.clip(np.abs(np.asarray(start, dtype=float)).ravel(), lo, hi)
        # entries freeze once converged, so each result is independent of its batch
        act = np.arange(a.size)
        for _ in range(MAX_ITER):
            ua, ta, aa = u[act], tt[act], a[act]
            F = ua + ta * self.coord_grad(ua) - aa
            la = np.where(F <= 0, ua, lo[act])
            ha = np.where(F >= 0, ua, hi[act])
            un = ua - F / (1.0 + ta * self.coord_curv(ua))
            bad = (un < la) | (un > ha) | ~np.isfinite(un)
            un = np.where(bad, 0.5 * (la + ha), un)
            done = (~bad & (np.abs(un - ua) <= 1e-10 * (1.0 + aa))) | (ha - la <= 1e-16 * (1.0 + aa))
            u[act], lo[act], hi[act] = un, la, ha
            act = act[~done]
            if act.size == 0:
                break
        return np.sign(x) * u.reshape(shape)

    def prox_slope(self, u, t):
        """``d/dt g(prox(x, t))`` evaluated at ``u = prox(x, t)``."""
        gi = self.coord_grad(u)
        t = np.asarray(t, dtype=float)
        if t.ndim and np.ndim(u) > t.ndim:
            t = t[..., None]
        return -np.sum(gi * gi / (1.0 + t * self.coord_curv(u)), axis=-1)


# ---------------------------------------------------------------------------
# Constraint sets
# ---------------------------------------------------------------------------

def _as_batch(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None] if single else x
    if X.ndim != 2 or X.shape[1] != dim:
        raise GeometryError(f"expected points of dimension {dim}, got shape {x.shape}")
    return X, single


def _unbatch(X, single):
    return X[0] if single else X


def _norm(X):
    return np.sqrt(np.sum(X * X, axis=-1))


@dataclass(frozen=True, eq=False)
class Ball:
    """Euclidean ball of positive ``radius`` around ``center``."""

    center: np.ndarray
    radius: float

    def __init__(self, center, radius=1.0):
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if c.ndim != 1:
            raise GeometryError("center must be a vector")
        if not radius > 0:
            raise GeometryError(f"radius must be positive, got {radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(radius))

    @classmethod
    def unit(cls, dim: int) -> "Ball":
        return cls(np.zeros(dim), 1.0)

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def anchor(self) -> np.ndarray:
        return self.center

    def contains(self, x):
        X, single = _as_batch(x, self.dim)
        inside = _norm(X - self.center) <= self.radius
        return bool(inside[0]) if single else inside

    def on_boundary(self, x, tol=TOL_BOUNDARY):
        X, single = _as_batch(x, self.dim)
        ok = np.abs(_norm(X - self.center) - self.radius) <= tol * self.radius
        return bool(ok[0]) if single else ok

    def outward_normal(self, x):
        X, single = _as_batch(x, self.dim)
        D = X - self.center
        r = _norm(D)
        if np.any(np.abs(r - self.radius) > TOL_BOUNDARY * self.radius):
            raise GeometryError("point is not on the boundary of the ball")
        return _unbatch(D / r[:, None], single)

    def _onto_sphere(self, D, r):
        # c + D * (radius / r), shrunk by ulps until the norm test passes exactly
        scale = self.radius / r
        Y = self.center + D * scale[:, None]
        over = _norm(Y - self.center) > self.radius
        for _ in range(8):
            if not over.any():
                break
            scale = np.where(over, np.nextafter(scale, 0.0), scale)
            Y = self.center + D * scale[:, None]
            over = _norm(Y - self.center) > self.radius
        return Y

    def project(self, x):
        X, single = _as_batch(x, self.dim)
        D = X - self.center
        r = _norm(D)
        out = r > self.radius
        Y = X.copy()
        if out.any():
            Y[out] = self._onto_sphere(D[out], r[out])
        return _unbatch(Y, single)

    def ray_entry(self, X, Dir):
        """Smallest ``t >= 0`` with ``X - t Dir`` in the ball (NaN on a miss).

        Rows of ``X`` are assumed outside the ball.
        """
        Q = X - self.center
        a = np.sum(Dir * Dir, axis=-1)
        b = np.sum(Q * Dir, axis=-1)
        cc = np.sum(Q * Q, axis=-1) - self.radius ** 2
        disc = b * b - a * cc
        hit = (disc >= 0) & (b > 0)
        with np.errstate(invalid="ignore"):
            # cc / (b + sqrt(disc)) is the cancellation-free form of the small root
            t = cc / (b + np.sqrt(np.where(hit, disc, 0.0)))
        return np.where(hit, t, np.nan)

    def settle(self, Y):
        """Pull rows that overshoot the sphere by rounding back inside."""
        D = Y - self.center
        r = _norm(D)
        over = r > self.radius
        if over.any():
            Y = Y.copy()
            Y[over] = self._onto_sphere(D[over], r[over])
        return Y

    def sample_boundary(self, n, rng):
        U = rng.standard_normal((n, self.dim))
        U /= _norm(U)[:, None]
        return self.center + self.radius * U

    def sample_interior(self, n, rng, shrink=0.98):
        U = rng.standard_normal((n, self.dim))
        U /= _norm(U)[:, None]
        rad = shrink * self.radius * rng.random(n) ** (1.0 / self.dim)
        return self.center + U * rad[:, None]

    def sample_uniform(self, n, rng):
        return self.sample_interior(n, rng, shrink=1.0)


@dataclass(frozen=True, eq=False)
class Sublevel:
    """Sublevel set ``{x : g(x) <= level}`` of a smooth convex ``g``.

    ``anchor`` must be a strictly interior point; it seeds boundary sampling and
    the final feasibility correction of the projection. Convexity of ``g`` is
    assumed, not checked.
    """

    g: LevelFunction
    level: float
    anchor: np.ndarray = field(default=None)

    def __post_init__(self):
        dim = self.g.dim
        anchor = np.zeros(dim) if self.anchor is None else np.asarray(self.anchor, dtype=float)
        if anchor.shape != (dim,):
            raise GeometryError(f"anchor must have shape ({dim},)")
        if not float(self.g.value(anchor)) < self.level:
            raise GeometryError("g(anchor) must be strictly below the level")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "level", float(self.level))

    @property
    def dim(self) -> int:
        return self.g.dim

    def _gval(self, X):
        return np.asarray(self.g.value(X), dtype=float)

    def contains(self, x):
        X, single = _as_batch(x, self.dim)
        inside = self._gval(X) <= self.level
        return bool(inside[0]) if single else inside

    def on_boundary(self, x, tol=TOL_BOUNDARY):
        X, single = _as_batch(x, self.dim)
        ok = np.abs(self._gval(X) - self.level) <= tol * max(1.0, abs(self.level))
        return bool(ok[0]) if single else ok

    def outward_normal(self, x):
        X, single = _as_batch(x, self.dim)
        if not np.all(self.on_boundary(X)):
            raise GeometryError("point is not on the boundary of the sublevel set")
        G = self.g.grad(X)
        gn = _norm(G)
        if np.any(gn == 0):
            raise GeometryError("gradient of g vanishes on the boundary")
        return _unbatch(G / gn[:, None], single)

    # -- Euclidean projection ------------------------------------------------

    def _prox(self, X, t, start=None):
        """Solve ``p + t grad g(p) = X`` row-wise."""
        if hasattr(self.g, "prox"):
            return self.g.prox(X, t, start)
        return _prox_fixed_point(self.g, X, t, start)

    def project(self, x):
        X, single = _as_batch(x, self.dim)
        Y = X.copy()
        out = ~self.contains(X)
        if out.any():
            Y[out] = self._project_outside(X[out])
        return _unbatch(Y, single)

    def _project_outside(self, X):
        """Root of ``h(t) = g(prox(X, t)) - level`` by safeguarded Newton.

        ``h`` decreases in ``t`` for convex ``g``; the iteration keeps a bracket
        ``[lo, hi]`` and falls back to bisection (or doubling while ``hi`` is
        unbounded) whenever the Newton step leaves it.
        """
        n = X.shape[0]
        target = 0.01 * TOL_PROJ * max(1.0, abs(self.level))
        G0 = self.g.grad(X)
        t = (self._gval(X) - self.level) / np.maximum(np.sum(G0 * G0, axis=-1), 1e-300)
        lo = np.zeros(n)
        hi = np.full(n, np.inf)
        P = X.copy()
        has_slope = hasattr(self.g, "prox_slope")
        warm = False
        act = np.arange(n)
        for _ in range(MAX_ITER):
            Xa, ta = X[act], t[act]
            Pa = self._prox(Xa, ta, P[act] if warm else None)
            h = self._gval(Pa) - self.level
            la = np.where(h > 0, ta, lo[act])
            ha = np.where(h <= 0, ta, hi[act])
            done = (np.abs(h) <= target) | (np.isfinite(ha) & (ha - la <= 1e-15 * ha))
            if has_slope:
                with np.errstate(divide="ignore", invalid="ignore"):
                    tn = ta - h / self.g.prox_slope(Pa, ta)
            else:
                tn = np.full(act.size, np.nan)
            bad = ~np.isfinite(tn) | (tn <= la) | (tn >= ha)
            fallback = np.where(np.isfinite(ha), 0.5 * (la + ha), 2.0 * np.maximum(ta, la))
            P[act], lo[act], hi[act] = Pa, la, ha
            t[act] = np.where(done, ta, np.where(bad, fallback, tn))
            warm = True
            act = act[~done]
            if act.size == 0:
                return self._settle(P)
        raise ProjectionError("Euclidean projection did not converge")

    def _settle(self, P):
        """Nudge rows with ``g > level`` (by at most ``TOL_PROJ``) towards the anchor."""
        over = self._gval(P) > self.level
        if not over.any():
            return P
        P = P.copy()
        frac = np.full(over.sum(), 1e-14)
        for _ in range(60):
            idx = np.flatnonzero(over)
            Q = self.anchor + (1.0 - frac[:, None]) * (P[idx] - self.anchor)
            ok = self._gval(Q) <= self.level
            P[idx[ok]] = Q[ok]
            frac = frac[~ok] * 4.0
            over[idx[ok]] = False
            if not over.any():
                return P
        raise ProjectionError("could not restore feasibility after projection")

    settle = _settle

    def ray_entry(self, X, Dir):
        """Smallest ``t >= 0`` with ``g(X - t Dir) <= level`` (NaN on a miss).

        ``phi(t) = g(X - t Dir)`` is convex, so Newton's method started at
        ``t = 0`` (where ``phi > level``) increases monotonically towards the
        first crossing and never jumps over it. A non-negative slope while still
        infeasible means the ray misses the set.
        """
        n = X.shape[0]
        scale = max(1.0, abs(self.level))
        t = np.zeros(n)
        active = np.ones(n, dtype=bool)
        miss = np.zeros(n, dtype=bool)
        for _ in range(MAX_ITER):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            Y = X[idx] - t[idx, None] * Dir[idx]
            h = self._gval(Y) - self.level
            slope = -np.sum(self.g.grad(Y) * Dir[idx], axis=-1)
            done = h <= TOL_PROJ * scale
            lost = ~done & (slope >= 0)
            miss[idx[lost]] = True
            step = ~done & ~lost
            t[idx[step]] -= h[step] / slope[step]
            active[idx[done | lost]] = False
        else:
            miss |= active
        t = np.where(miss, np.nan, t)
        # Newton from the infeasible side may stop just short of the level set
        hit = np.flatnonzero(~miss)
        for _ in range(30):
            if hit.size == 0:
                break
            Y = X[hit] - t[hit, None] * Dir[hit]
            h = self._gval(Y) - self.level
            over = h > 0
            if not over.any():
                break
            slope = -np.sum(self.g.grad(Y[over]) * Dir[hit[over]], axis=-1)
            t[hit[over]] += np.maximum(2.0 * h[over] / np.abs(slope), 1e-16 * (1 + t[hit[over]]))
            hit = hit[over]
        return t

    def _boundary_along(self, U):
        """Boundary points ``anchor + s U`` for unit directions ``U``."""
        n = U.shape[0]
        lo = np.zeros(n)
        hi = np.ones(n)
        for _ in range(MAX_ITER):
            out = self._gval(self.anchor + hi[:, None] * U) > self.level
            if out.all():
                break
            hi = np.where(out, hi, 2 * hi)
        else:
            raise GeometryError("sublevel set appears unbounded")
        for _ in range(MAX_ITER):
            mid = 0.5 * (lo + hi)
            inside = self._gval(self.anchor + mid[:, None] * U) <= self.level
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
            if np.all(hi - lo <= 1e-15 * hi):
                break
        return lo

    def sample_boundary(self, n, rng):
        U = rng.standard_normal((n, self.dim))
        U /= _norm(U)[:, None]
        s = self._boundary_along(U)
        return self.anchor + s[:, None] * U

    def sample_interior(self, n, rng, shrink=0.98):
        U = rng.standard_normal((n, self.dim))
        U /= _norm(U)[:, None]
        s = self._boundary_along(U) * shrink * rng.random(n) ** (1.0 / self.dim)
        return self.anchor + s[:, None] * U


def smoothed_lp_ball(p, epsilon, level, dim=3) -> Sublevel:
    """The sublevel set of :class:`SmoothedLp` anchored at the origin."""
    return Sublevel(SmoothedLp(p, epsilon, dim), level)


def _prox_fixed_point(g, X, t, start=None):
    """Damped fixed-point iteration ``p <- p - w (p - x + t grad g(p))``.

    For convex ``g`` the map contracts once ``w`` is small enough. Accepted
    steps (those that shrink the residual) reset ``w`` to the Barzilai-Borwein
    estimate ``<s, s> / <s, y>``; rejected ones halve it.
    """
    t = np.broadcast_to(np.asarray(t, dtype=float), (X.shape[0],))
    P = X.copy() if start is None else np.array(start, dtype=float)
    w = np.ones(X.shape[0])
    scale = 1.0 + _norm(X)
    R = P - X + t[:, None] * g.grad(P)
    rn = _norm(R)
    for _ in range(50 * MAX_ITER):
        # converged, or the step has shrunk below rounding
        if np.all((rn <= 1e-13 * scale) | (w * rn <= 1e-16 * scale)):
            return P
        Pn = P - w[:, None] * R
        Rn = Pn - X + t[:, None] * g.grad(Pn)
        rnn = _norm(Rn)
        ok = rnn < rn
        S = Pn - P
        sy = np.sum(S * (Rn - R), axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            bb = np.where(sy > 0, np.sum(S * S, axis=-1) / sy, 1.0)
        P = np.where(ok[:, None], Pn, P)
        R = np.where(ok[:, None], Rn, R)
        rn = np.where(ok, rnn, rn)
        w = np.where(ok, np.clip(bb, 1e-12, 1.0), 0.5 * w)
    raise ProjectionError("proximal fixed-point iteration did not converge")


# ---------------------------------------------------------------------------
# Free-function interface
# ---------------------------------------------------------------------------

def contains(constraint, x):
    return constraint.contains(x)


def outward_normal(constraint, x):
    return constraint.outward_normal(x)


def project_euclidean(constraint, x):
    return constraint.project(x)


def skew_normal(constraint, skew_field, x):
    """Skew unit normal ``(I + J) n / sqrt(|n|^2 + |J n|^2)`` at boundary points."""
    X, single = _as_batch(x, constraint.dim)
    N = constraint.outward_normal(X)
    JN = skew_field.apply(X, N)
    denom = np.sqrt(np.sum(N * N, axis=-1) + np.sum(JN * JN, axis=-1))
    return _unbatch((N + JN) / denom[:, None], single)


def skew_project(constraint, skew_field, x, fallback="error", return_fallback=False):
    """Oblique projection of ``x`` onto the set along the skew normal.

    Feasible points are returned unchanged. For infeasible ``x`` the skew
    normal ``d`` is evaluated at ``p = project_euclidean(x)`` and the result is
    ``x - t* d`` with ``t*`` the first entry time of the ray into the set.

    ``fallback`` decides what happens when the ray misses: ``"error"`` raises
    :class:`RayMiss`, ``"euclidean"`` substitutes ``p``. With
    ``return_fallback=True`` a boolean mask of substituted rows is also returned.
    """
    if fallback not in ("error", "euclidean"):
        raise ValueError(f"unknown fallback policy {fallback!r}")
    X, single = _as_batch(x, constraint.dim)
    Y = X.copy()
    used = np.zeros(X.shape[0], dtype=bool)
    out = ~constraint.contains(X)
    if out.any():
        Xo = X[out]
        P = constraint.project(Xo)
        if getattr(skew_field, "is_zero", False):
            Yo = P
        else:
            D = skew_normal(constraint, skew_field, P)
            t = constraint.ray_entry(Xo, D)
            miss = np.isnan(t)
            if miss.any() and fallback == "error":
                raise RayMiss(f"{int(miss.sum())} skew-projection ray(s) miss the constraint set")
            Yo = P.copy()
            hit = ~miss
            Yo[hit] = constraint.settle(Xo[hit] - t[hit, None] * D[hit])
            used[np.flatnonzero(out)[miss]] = True
        Y[out] = Yo
    Y = _unbatch(Y, single)
    if return_fallback:
        return Y, (bool(used[0]) if single else used)
    return Y
