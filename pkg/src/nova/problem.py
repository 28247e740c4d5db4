"""Problem definitions: smooth objective, smooth inequality constraints, convex set.

A problem is ``min U(x)  s.t.  g_j(x) <= 0 (j = 1..m),  x in K`` with all
functions given by evaluation oracles.  Oracles must be pure: evaluating
them never mutates shared state, so they are safe to call concurrently.

Blanket contracts that are documented rather than machine-checked:
``U`` and the ``g_j`` are continuously differentiable on ``K``, the
gradient of ``U`` is Lipschitz on ``K``, and ``U`` is coercive on ``K``
(finitely many samples cannot establish coercivity).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InputError
from .sets import ConvexSet, product_of

#: A point is accepted as feasible when every constraint value is below this
#: tolerance and the projection residual onto the convex set is below it too.
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class Constraint:
    """One smooth inequality constraint ``g(x) <= 0`` with its gradient oracle."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    name: str = ""


@dataclass(frozen=True)
class BlockPartition:
    """Partition of the variables into consecutive blocks.

    ``sizes[i]`` is the length of block ``i`` and ``sets[i]`` the convex set
    constraining it.  The global set is the Cartesian product of the block
    sets, so the global projection is the concatenation of block projections.
    """

    sizes: tuple[int, ...]
    sets: tuple[ConvexSet, ...]

    def __post_init__(self):
        if len(self.sizes) != len(self.sets):
            raise InputError("block sizes and block sets must have equal length")
        for n_i, s_i in zip(self.sizes, self.sets):
            if n_i < 1:
                raise InputError("block sizes must be positive")
            if s_i.dim != n_i:
                raise InputError("block set dimension does not match block size")

    @property
    def count(self) -> int:
        return len(self.sizes)

    @property
    def dim(self) -> int:
        return int(sum(self.sizes))

    @property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for n_i in self.sizes:
            out.append(acc)
            acc += n_i
        return tuple(out)

    def slice_of(self, i: int) -> slice:
        a = self.offsets[i]
        return slice(a, a + self.sizes[i])

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        return [x[self.slice_of(i)] for i in range(self.count)]

    def product_set(self) -> ConvexSet:
        return product_of(self.sets)


@dataclass(frozen=True)
class ProblemSpec:
    """A smooth problem with convex-set and inequality constraints.

    Parameters
    ----------
    dim : int
        Number of variables.
    objective, objective_grad : callables
        Value and gradient oracles of ``U``.
    constraints : sequence of Constraint
        The smooth inequality constraints ``g_j(x) <= 0``; may be empty.
    convex_set : ConvexSet
        The convex set ``K`` (projection + membership + sampling).
    blocks : BlockPartition, optional
        Cartesian block structure for decomposed solves.
    lipschitz_grad_U : float, optional
        Known upper bound on the Lipschitz constant of the objective
        gradient over ``K``; leave ``None`` to have it estimated on demand.
    """

    dim: int
    objective: Callable[[np.ndarray], float]
    objective_grad: Callable[[np.ndarray], np.ndarray]
    constraints: tuple[Constraint, ...]
    convex_set: ConvexSet
    blocks: Optional[BlockPartition] = None
    lipschitz_grad_U: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("problem dimension must be >= 1")
        if self.convex_set.dim != self.dim:
            raise InputError("convex set dimension does not match problem dimension")
        if self.blocks is not None and self.blocks.dim != self.dim:
            raise InputError("block sizes must sum to the problem dimension")
        if self.lipschitz_grad_U is not None and self.lipschitz_grad_U < 0:
            raise InputError("lipschitz_grad_U must be nonnegative")
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def m(self) -> int:
        return len(self.constraints)

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        return np.array([c.value(x) for c in self.constraints], dtype=float)

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise InputError(f"expected point of dimension {self.dim}, got shape {x.shape}")
        return x


def feasibility_residual(problem: ProblemSpec, x) -> float:
    """Aggregate infeasibility of ``x``: constraint excess plus set distance.

    Returns ``max(0, max_j g_j(x)) + ||x - P_K(x)||``; the result is zero
    (up to arithmetic noise) exactly on the feasible set.
    """
    x = problem.check_point(x)
    excess = 0.0
    if problem.m:
        excess = max(0.0, float(np.max(problem.constraint_values(x))))
    return excess + problem.convex_set.distance(x)


def is_feasible(problem: ProblemSpec, x, tol: float = FEASIBILITY_TOL) -> bool:
    x = problem.check_point(x)
    if problem.m and float(np.max(problem.constraint_values(x))) > tol:
        return False
    return problem.convex_set.distance(x) <= tol


def estimate_lipschitz_grad(problem: ProblemSpec, samples: int, seed: int) -> float:
    """Estimate the Lipschitz constant of the objective gradient by sampling.

    Draws ``samples`` points from the convex set, computes the largest
    difference quotient ``||grad(u) - grad(v)|| / ||u - v||`` over sampled
    pairs, and inflates it by a 1.5 safety factor.  Deterministic for a
    fixed seed.  All pairs are scanned when the sample count is modest;
    otherwise a random pairing of the same size is used.
    """
    if samples < 2:
        raise ConfigurationError("need at least two samples to estimate a Lipschitz constant")
    rng = np.random.default_rng(seed)
    try:
        pts = np.array([problem.convex_set.sample(rng) for _ in range(samples)])
    except Exception as exc:  # pragma: no cover - defensive
        raise ConfigurationError(f"convex-set sampler failed: {exc}") from exc
    grads = np.array([problem.objective_grad(p) for p in pts])

    if samples <= 512:
        du = pts[:, None, :] - pts[None, :, :]
        dg = grads[:, None, :] - grads[None, :, :]
        dist = np.linalg.norm(du, axis=-1)
        gdist = np.linalg.norm(dg, axis=-1)
        mask = dist > 1e-12
        ratio = np.where(mask, gdist / np.where(mask, dist, 1.0), 0.0)
        best = float(ratio.max()) if ratio.size else 0.0
    else:
        idx = rng.permutation(samples)
        best = 0.0
        for a, b in zip(idx[::2], idx[1::2]):
            d = float(np.linalg.norm(pts[a] - pts[b]))
            if d > 1e-12:
                best = max(best, float(np.linalg.norm(grads[a] - grads[b])) / d)
    return 1.5 * best


def check_gradients(problem: ProblemSpec, samples: int = 50, seed: int = 0,
                    step: float = 1e-6, rel_tol: float = 1e-5) -> list[str]:
    """Verify gradient oracles against central finite differences.

    Samples interior points of the convex set and compares each supplied
    gradient with a finite-difference estimate.  Returns a list of
    human-readable mismatch descriptions (empty when everything agrees).
    This check is opt-in, never run on the solve path.
    """
    rng = np.random.default_rng(seed)
    failures: list[str] = []

    def fd_grad(fn, x):
        g = np.empty_like(x)
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = step
            g[k] = (fn(x + e) - fn(x - e)) / (2.0 * step)
        return g

    oracles = [("objective", problem.objective, problem.objective_grad)]
    for j, c in enumerate(problem.constraints):
        oracles.append((c.name or f"constraint[{j}]", c.value, c.grad))

    for _ in range(samples):
        x = problem.convex_set.sample(rng)
        for label, fn, grad in oracles:
            ga = np.asarray(grad(x), dtype=float)
            gn = fd_grad(fn, x)
            denom = max(1.0, float(np.linalg.norm(gn)))
            err = float(np.linalg.norm(ga - gn)) / denom
            if err > rel_tol:
                failures.append(f"{label}: relative gradient error {err:.3e} at {x}")
    return failures


def slater_check(sub, trials: int = 256, seed: int = 0, margin: float = 1e-8) -> bool:
    """Probe for a strictly feasible point of a convex subproblem.

    Samples points of the subproblem's convex set (the anchor is always
    tried first) and reports ``True`` when a point with
    ``max_j g~_j(x) < -margin`` is found.  ``False`` means "not verified",
    never "disproved".
    """
    if not sub.constraints:
        return True
    rng = np.random.default_rng(seed)
    candidates = [np.asarray(sub.anchor, dtype=float)]
    candidates.extend(sub.cset.sample(rng) for _ in range(trials))
    for x in candidates:
        if not sub.cset.contains(x, tol=1e-9):
            continue
        worst = max(float(c.value(x)) for c in sub.constraints)
        if worst < -margin:
            return True
    return False
