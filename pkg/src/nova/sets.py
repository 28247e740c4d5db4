"""Closed convex sets described by projection, membership and sampling oracles.

Every set carries a Euclidean projection; membership is derived from it
(a point belongs to the set when its projection residual is below the
tolerance), which keeps the two oracles consistent by construction.
Samplers draw points inside the set and are used by the statistical
checks (gradient verification, Lipschitz estimation, Slater probing).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, ParameterError


@dataclass(frozen=True)
class ConvexSet:
    """A closed convex set with projection / membership / sampling oracles.

    Attributes
    ----------
    dim : int
        Ambient dimension.
    kind : str
        One of ``box``, ``ball``, ``nonneg-orthant``, ``simplex``,
        ``product-of-sets``, ``custom``.
    """

    dim: int
    kind: str
    _project: Callable[[np.ndarray], np.ndarray]
    _sample: Callable[[np.random.Generator], np.ndarray]

    def project(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise InputError(f"expected point of dimension {self.dim}, got shape {u.shape}")
        return self._project(u)

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        return float(np.linalg.norm(u - self.project(u))) <= tol

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self._sample(rng)

    def distance(self, u) -> float:
        """Euclidean distance from ``u`` to the set."""
        u = np.asarray(u, dtype=float)
        return float(np.linalg.norm(u - self.project(u)))


def box(lo, hi) -> ConvexSet:
    """Axis-aligned box ``{x : lo <= x <= hi}`` (componentwise)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ParameterError("box bounds must be 1-d arrays of equal length")
    if np.any(lo > hi):
        raise ParameterError("box requires lo <= hi componentwise")
    dim = lo.size

    def project(u):
        return np.clip(u, lo, hi)

    def sample(rng):
        span_lo = np.where(np.isfinite(lo), lo, -1e3)
        span_hi = np.where(np.isfinite(hi), hi, 1e3)
        return rng.uniform(span_lo, span_hi)

    return ConvexSet(dim, "box", project, sample)


def ball(center, radius: float) -> ConvexSet:
    """Euclidean ball of given center and radius."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if radius <= 0:
        raise ParameterError("ball radius must be positive")
    dim = center.size

    def project(u):
        d = u - center
        nrm = np.linalg.norm(d)
        if nrm <= radius:
            return u.copy()
        return center + d * (radius / nrm)

    def sample(rng):
        direction = rng.normal(size=dim)
        direction /= max(np.linalg.norm(direction), 1e-300)
        r = radius * rng.uniform() ** (1.0 / dim)
        return center + r * direction

    return ConvexSet(dim, "ball", project, sample)


def nonneg_orthant(dim: int, sample_scale: float = 10.0) -> ConvexSet:
    """Nonnegative orthant; samples are drawn uniformly from [0, sample_scale]^n."""
    if dim < 1:
        raise ParameterError("dimension must be >= 1")

    def project(u):
        return np.maximum(u, 0.0)

    def sample(rng):
        return rng.uniform(0.0, sample_scale, size=dim)

    return ConvexSet(dim, "nonneg-orthant", project, sample)


def simplex(dim: int, total: float = 1.0) -> ConvexSet:
    """Scaled probability simplex ``{x >= 0 : sum(x) = total}``."""
    if dim < 1:
        raise ParameterError("dimension must be >= 1")
    if total <= 0:
        raise ParameterError("simplex total must be positive")

    def project(u):
        # Sort-based projection onto the scaled simplex.
        s = np.sort(u)[::-1]
        css = np.cumsum(s) - total
        idx = np.arange(1, dim + 1)
        cond = s - css / idx > 0
        rho = int(np.nonzero(cond)[0][-1]) + 1
        theta = css[rho - 1] / rho
        return np.maximum(u - theta, 0.0)

    def sample(rng):
        e = rng.exponential(size=dim)
        return total * e / e.sum()

    return ConvexSet(dim, "simplex", project, sample)


def whole_space(dim: int, sample_scale: float = 10.0) -> ConvexSet:
    """All of R^n (identity projection); samples from [-scale, scale]^n."""
    if dim < 1:
        raise ParameterError("dimension must be >= 1")

    def project(u):
        return u.copy()

    def sample(rng):
        return rng.uniform(-sample_scale, sample_scale, size=dim)

    return ConvexSet(dim, "custom", project, sample)


def product_of(parts: Sequence[ConvexSet]) -> ConvexSet:
    """Cartesian product of sets; projection concatenates block projections."""
    parts = tuple(parts)
    if not parts:
        raise ParameterError("product requires at least one factor")
    dims = [p.dim for p in parts]
    offsets = np.cumsum([0] + dims)
    dim = int(offsets[-1])

    def project(u):
        out = np.empty(dim)
        for p, a, b in zip(parts, offsets[:-1], offsets[1:]):
            out[a:b] = p.project(u[a:b])
        return out

    def sample(rng):
        return np.concatenate([p.sample(rng) for p in parts])

    return ConvexSet(dim, "product-of-sets", project, sample)


def custom(dim: int, project: Callable, sample: Callable) -> ConvexSet:
    """Set defined by user-supplied projection and sampling oracles."""
    return ConvexSet(dim, "custom", project, sample)
