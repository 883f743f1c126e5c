"""Skew-symmetric matrix fields ``J(x)`` and numerical checks of their assumptions.

Five constructions are provided:

=====================  ==========================================================
:class:`ZeroField`      ``J = 0`` (projected Langevin baseline)
:class:`ConstantTridiag` ``+a`` on the superdiagonal, ``-a`` on the subdiagonal
:class:`Cross3D`        cross-product matrix of the axial vector ``k(x) = s x``
:class:`BlockCross`     block-diagonal 3x3 cross-product blocks, ``k_t = s_t x_t``
:class:`SublevelCurl`   blocks generated by ``grad psi``, ``psi = (level - g) h``
=====================  ==========================================================

All state-dependent fields act on 3-coordinate blocks through the cross
product ``J(x) w = k(x) x w``; coordinates left over when ``d`` is not a
multiple of three get zero rows and columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError


def cross_matrix(k):
    """Cross-product matrices ``[k]_x`` for axial vectors of shape ``(..., 3)``."""
    k = np.asarray(k, dtype=float)
    M = np.zeros(k.shape[:-1] + (3, 3))
    M[..., 0, 1] = -k[..., 2]
    M[..., 0, 2] = k[..., 1]
    M[..., 1, 0] = k[..., 2]
    M[..., 1, 2] = -k[..., 0]
    M[..., 2, 0] = -k[..., 1]
    M[..., 2, 1] = k[..., 0]
    return M


def _cross(k, v):
    # np.cross is markedly slower on small trailing axes
    k0, k1, k2 = k[..., 0], k[..., 1], k[..., 2]
    v0, v1, v2 = v[..., 0], v[..., 1], v[..., 2]
    out = np.empty(np.broadcast_shapes(k.shape, v.shape))
    out[..., 0] = k1 * v2 - k2 * v1
    out[..., 1] = k2 * v0 - k0 * v2
    out[..., 2] = k0 * v1 - k1 * v0
    return out


def _check_dim(x, dim):
    x = np.asarray(x, dtype=float)
    if dim is not None and x.shape[-1] != dim:
        raise GeometryError(f"expected dimension {dim}, got {x.shape[-1]}")
    return x


class _BlockAxial:
    """Shared machinery for fields built from per-block axial vectors."""

    dim: int | None
    is_zero = False

    def axial(self, x):
        """Axial vectors of shape ``(..., m, 3)``, one per coordinate block."""
        raise NotImplementedError

    def _n_blocks(self, d):
        return d // 3

    def matrix(self, x):
        x = _check_dim(x, self.dim)
        d = x.shape[-1]
        K = self.axial(x)
        J = np.zeros(x.shape[:-1] + (d, d))
        for b in range(K.shape[-2]):
            sl = slice(3 * b, 3 * b + 3)
            J[..., sl, sl] = cross_matrix(K[..., b, :])
        return J

    def apply(self, x, v):
        x = _check_dim(x, self.dim)
        v = _check_dim(v, x.shape[-1])
        d = x.shape[-1]
        m = self._n_blocks(d)
        K = self.axial(x)
        if d == 3 * m:
            lead = np.broadcast_shapes(K.shape[:-2], v.shape[:-1])
            V = np.broadcast_to(v, lead + (d,)).reshape(lead + (m, 3))
            return _cross(K, V).reshape(lead + (d,))
        out = np.zeros(np.broadcast_shapes(x.shape, v.shape))
        for b in range(m):
            sl = slice(3 * b, 3 * b + 3)
            out[..., sl] = _cross(K[..., b, :], v[..., sl])
        return out


@dataclass(frozen=True)
class ZeroField:
    """The zero field; turns every skew algorithm into its projected counterpart."""

    dim: int | None = None
    is_zero = True

    def matrix(self, x):
        x = _check_dim(x, self.dim)
        return np.zeros(x.shape + (x.shape[-1],))

    def apply(self, x, v):
        _check_dim(x, self.dim)
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(v)))


@dataclass(frozen=True)
class ConstantTridiag:
    """Constant field with ``a`` on the superdiagonal and ``-a`` below it."""

    a: float
    dim: int = 3
    is_zero = False

    def __post_init__(self):
        if self.a == 0:
            raise ValueError("a must be non-zero")
        if self.dim < 2:
            raise ValueError("dim must be at least 2")

    def base_matrix(self):
        J = np.zeros((self.dim, self.dim))
        i = np.arange(self.dim - 1)
        J[i, i + 1] = self.a
        J[i + 1, i] = -self.a
        return J

    def matrix(self, x):
        x = _check_dim(x, self.dim)
        return np.broadcast_to(self.base_matrix(), x.shape[:-1] + (self.dim, self.dim)).copy()

    def apply(self, x, v):
        _check_dim(x, self.dim)
        v = _check_dim(v, self.dim)
        out = np.zeros(np.broadcast_shapes(np.shape(x), v.shape))
        out[..., :-1] += self.a * v[..., 1:]
        out[..., 1:] -= self.a * v[..., :-1]
        return out


@dataclass(frozen=True)
class Cross3D(_BlockAxial):
    """``J(x) w = (s x) x w`` in three dimensions; ``J(x) x = 0`` for every ``x``."""

    s: float
    dim: int = 3

    def __post_init__(self):
        if self.s == 0:
            raise ValueError("s must be non-zero")
        if self.dim != 3:
            raise ValueError("Cross3D is defined for d = 3 only; use BlockCross")

    def axial(self, x):
        return (self.s * np.asarray(x, dtype=float))[..., None, :]

    def apply(self, x, v):
        # single block: skip the generic reshaping, same arithmetic
        x = _check_dim(x, 3)
        return _cross(self.s * x, _check_dim(v, 3))


@dataclass(frozen=True)
class BlockCross(_BlockAxial):
    """Block-diagonal cross-product field with per-block scales ``s``."""

    s: tuple
    dim: int

    def __init__(self, s, dim):
        s = tuple(float(v) for v in np.atleast_1d(s))
        if dim < 3:
            raise ValueError("BlockCross needs d >= 3")
        if len(s) != dim // 3:
            raise ValueError(f"need {dim // 3} block scales for d = {dim}, got {len(s)}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "dim", int(dim))

    def axial(self, x):
        x = np.asarray(x, dtype=float)
        m = self.dim // 3
        K = x[..., : 3 * m].reshape(x.shape[:-1] + (m, 3))
        return K * np.asarray(self.s)[:, None]


@dataclass(frozen=True)
class SublevelCurl(_BlockAxial):
    """Curl construction adapted to a sublevel set ``{g <= level}``.

    The axial vector of block ``t`` collects the block's components of
    ``s_t * grad psi`` with ``psi = (level - g) h``. Since ``psi = 0`` on the
    boundary, ``grad psi`` is parallel to the outward normal there, which makes
    ``J n = 0``; blocks built from a gradient field are divergence free.

    ``h`` is ``"one"`` (``psi = level - g``) or ``"one_plus_normsq"``
    (``h = 1 + |x|^2``). A scalar ``s`` is broadcast to every block.
    """

    g: object
    level: float
    s: tuple
    h: str

    def __init__(self, g, level, s=1.0, h="one"):
        dim = g.dim
        if dim < 3:
            raise ValueError("SublevelCurl needs d >= 3")
        if h not in ("one", "one_plus_normsq"):
            raise ValueError(f"unknown h variant {h!r}")
        eps = getattr(g, "epsilon", None)
        p = getattr(g, "p", None)
        if p is not None and eps is not None and p < 2 and eps <= 0:
            raise ValueError("the l_p curl field needs epsilon > 0 when p < 2")
        s = np.atleast_1d(np.asarray(s, dtype=float))
        m = dim // 3
        if s.size == 1:
            s = np.repeat(s, m)
        if s.size != m:
            raise ValueError(f"need {m} block scales for d = {dim}, got {s.size}")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "level", float(level))
        object.__setattr__(self, "s", tuple(s.tolist()))
        object.__setattr__(self, "h", h)

    @property
    def dim(self):
        return self.g.dim

    def grad_psi(self, x):
        x = np.asarray(x, dtype=float)
        G = self.g.grad(x)
        if self.h == "one":
            return -G
        hval = 1.0 + np.sum(x * x, axis=-1)
        gap = self.level - self.g.value(x)
        return -G * hval[..., None] + 2.0 * x * gap[..., None]

    def axial(self, x):
        x = np.asarray(x, dtype=float)
        m = self.dim // 3
        K = self.grad_psi(x)[..., : 3 * m].reshape(x.shape[:-1] + (m, 3))
        return K * np.asarray(self.s)[:, None]


# ---------------------------------------------------------------------------
# Free-function interface
# ---------------------------------------------------------------------------

def evaluate(field, x):
    """Dense matrix ``J(x)`` of shape ``(..., d, d)``."""
    return field.matrix(x)


def apply(field, x, v):
    """Matrix-free product ``J(x) v``."""
    return field.apply(x, v)


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionReport:
    max_skew_defect: float
    max_boundary_Jn: float
    max_interior_divJ: float
    boundary_samples: int
    interior_samples: int
    fd_step: float

    def passes(self, skew_tol=1e-14, boundary_tol=1e-8, div_tol=1e-4) -> bool:
        return (
            self.max_skew_defect <= skew_tol
            and self.max_boundary_Jn <= boundary_tol
            and self.max_interior_divJ <= div_tol
        )

    def as_dict(self):
        return {
            "max_skew_defect": self.max_skew_defect,
            "max_boundary_Jn": self.max_boundary_Jn,
            "max_interior_divJ": self.max_interior_divJ,
            "boundary_samples": self.boundary_samples,
            "interior_samples": self.interior_samples,
            "fd_step": self.fd_step,
        }


def divergence(field, x, fd_step=1e-5):
    """Row-wise divergence ``(div J)_i = sum_j d_j J_ij`` by central differences."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = X.shape
    div = np.zeros((n, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = fd_step
        Jp = field.matrix(X + e)
        Jm = field.matrix(X - e)
        div += (Jp[:, :, j] - Jm[:, :, j]) / (2.0 * fd_step)
    return div[0] if np.ndim(x) == 1 else div


def skew_defect(field, x):
    """``max_ij |J + J^T|`` per point."""
    J = field.matrix(x)
    return np.max(np.abs(J + np.swapaxes(J, -1, -2)), axis=(-1, -2))


def validate_assumptions(field, constraint, n_boundary=1000, n_interior=1000,
                         fd_step=1e-5, rng_seed=0) -> AssumptionReport:
    """Estimate the three structural assumptions on random samples.

    Skew-symmetry is checked on all samples, the boundary condition ``J n = 0``
    on points sampled on the boundary, and the divergence-free condition by
    central differences at interior points.
    """
    if n_boundary < 1 or n_interior < 1:
        raise ValueError("sample counts must be positive")
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    rng = np.random.default_rng(rng_seed)
    B = constraint.sample_boundary(n_boundary, rng)
    inner = constraint.sample_interior(n_interior, rng)
    N = constraint.outward_normal(B)
    JN = field.apply(B, N)
    skew = max(skew_defect(field, B).max(), skew_defect(field, inner).max())
    div = divergence(field, inner, fd_step)
    return AssumptionReport(
        max_skew_defect=float(skew),
        max_boundary_Jn=float(np.sqrt(np.sum(JN * JN, axis=-1)).max()),
        max_interior_divJ=float(np.sqrt(np.sum(div * div, axis=-1)).max()),
        boundary_samples=n_boundary,
        interior_samples=n_interior,
        fd_step=fd_step,
    )


def flux_divergence(field, potential, x, fd_step=1e-5):
    """Central-difference ``div(J grad f e^{-f})`` at points ``x``.

    Vanishes identically for skew-symmetric, divergence-free ``J``; this is
    what keeps the Gibbs density invariant under the extra drift.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = X.shape

    def flux(Y):
        G = potential.grad(Y)
        return field.apply(Y, G) * np.exp(-potential.value(Y))[:, None]

    out = np.zeros(n)
    for j in range(d):
        e = np.zeros(d)
        e[j] = fd_step
        out += (flux(X + e)[:, j] - flux(X - e)[:, j]) / (2.0 * fd_step)
    return out[0] if np.ndim(x) == 1 else out
