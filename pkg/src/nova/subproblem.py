"""Anchored strongly convex subproblems and the recipes that build them.

A :class:`Subproblem` bundles the objective model, the constraint models
and the convex set at one anchor.  A :class:`SurrogateRecipe` knows how to
rebuild that bundle at any feasible anchor; the outer loop calls it once
per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, InputError
from .problem import FEASIBILITY_TOL, BlockPartition, ProblemSpec, feasibility_residual
from .sets import ConvexSet
from .surrogates import SurrogateConstraint, SurrogateObjective

#: Anchor self-feasibility slack: the anchor must satisfy its own
#: constraint models up to this tolerance (value tangency makes the model
#: value equal the true constraint value there).
ANCHOR_TOL = 1e-9


@dataclass(frozen=True)
class Subproblem:
    """One strongly convex subproblem: models + set, anchored at a feasible point."""

    objective: SurrogateObjective
    constraints: tuple[SurrogateConstraint, ...]
    cset: ConvexSet
    anchor: np.ndarray
    blocks: Optional[BlockPartition] = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        anchor = np.asarray(self.anchor, dtype=float)
        object.__setattr__(self, "anchor", anchor)
        for j, c in enumerate(self.constraints):
            v = float(c.value(anchor))
            if v > ANCHOR_TOL:
                raise InputError(
                    f"anchor violates its own constraint model {c.name or j}: "
                    f"value {v:.3e} > {ANCHOR_TOL}")
        if self.cset.distance(anchor) > ANCHOR_TOL:
            raise InputError("anchor lies outside the convex set")

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def dim(self) -> int:
        return self.anchor.size

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        return np.array([c.value(x) for c in self.constraints], dtype=float)

    def feasibility_excess(self, x: np.ndarray) -> float:
        """Positive part of the worst constraint-model value plus set distance."""
        excess = 0.0
        if self.m:
            excess = max(0.0, float(np.max(self.constraint_values(x))))
        return excess + self.cset.distance(x)

    # -- block access (decomposed solvers) ---------------------------------

    @property
    def is_separable(self) -> bool:
        if self.objective.per_block_components is None:
            return False
        return all(c.per_block_components is not None for c in self.constraints)

    def require_separable(self):
        if self.objective.per_block_components is None:
            raise ConfigurationError("objective model has no per-block components")
        for j, c in enumerate(self.constraints):
            if c.per_block_components is None:
                raise ConfigurationError(
                    f"constraint model {c.name or j} is not block separable")

    @property
    def block_count(self) -> int:
        return self.blocks.count if self.blocks is not None else 1

    def block_set(self, i: int) -> ConvexSet:
        if self.blocks is None:
            if i != 0:
                raise InputError("subproblem has a single block")
            return self.cset
        return self.blocks.sets[i]

    def block_slice(self, i: int) -> slice:
        if self.blocks is None:
            return slice(0, self.dim)
        return self.blocks.slice_of(i)

    def block_objective(self, i: int):
        self.require_separable()
        return self.objective.per_block_components[i]

    def block_constraint(self, j: int, i: int):
        self.require_separable()
        return self.constraints[j].per_block_components[i]


@dataclass(frozen=True)
class InnerSolution:
    """Solution of one subproblem: the best response and its certificates.

    ``multipliers`` are the nonnegative multipliers of the constraint
    models (empty when there are none or the solver cannot recover them).
    ``stationarity_residual`` is the fixed-point projection residual of
    the returned point; ``primal_residual`` its feasibility excess.
    """

    point: np.ndarray
    multipliers: np.ndarray
    inner_iterations: int
    primal_residual: float
    stationarity_residual: float


@dataclass(frozen=True)
class SurrogateRecipe:
    """How to rebuild the subproblem models at any feasible anchor.

    ``c_tilde`` is the declared strong-convexity modulus of the objective
    model (never estimated on the solve path); the step-size admissibility
    check uses it directly.
    """

    objective_builder: Callable[[ProblemSpec, np.ndarray], SurrogateObjective]
    constraint_builders: tuple[Callable[[ProblemSpec, np.ndarray], SurrogateConstraint], ...]
    c_tilde: float

    def build(self, problem: ProblemSpec, anchor, validate_anchor: bool = True) -> Subproblem:
        anchor = problem.check_point(anchor)
        if validate_anchor:
            res = feasibility_residual(problem, anchor)
            if res > FEASIBILITY_TOL:
                raise InputError(f"anchor is infeasible: residual {res:.3e}")
        objective = self.objective_builder(problem, anchor)
        constraints = tuple(b(problem, anchor) for b in self.constraint_builders)
        return Subproblem(objective, constraints, problem.convex_set, anchor,
                          blocks=problem.blocks)


def as_single_block(sub: Subproblem) -> Subproblem:
    """View a subproblem as one whole-vector block.

    Wraps the objective and constraint models into single-block
    components so the multiplier-ascent machinery can run centralized.
    Only valid when the subproblem carries no block partition.
    """
    from .surrogates import BlockComponent, SurrogateConstraint, SurrogateObjective

    if sub.blocks is not None:
        raise ConfigurationError("subproblem already has a block partition")
    if sub.is_separable:
        return sub
    obj = sub.objective
    curv = obj.curvature if obj.curvature is not None else 0.0
    objective = SurrogateObjective(
        sub.anchor, obj.value, obj.grad, obj.strong_convexity, obj.curvature,
        separable=True,
        per_block_components=(BlockComponent(obj.value, obj.grad,
                                             curvature=max(curv, obj.strong_convexity),
                                             strong_convexity=obj.strong_convexity),))
    constraints = []
    for c in sub.constraints:
        comp = BlockComponent(c.value, c.grad, curvature=c.curvature)
        constraints.append(SurrogateConstraint(c.anchor, c.value, c.grad, (comp,),
                                               lipschitz=c.lipschitz,
                                               curvature=c.curvature, name=c.name))
    return Subproblem(objective, tuple(constraints), sub.cset, sub.anchor, blocks=None)


def projected_gradient(grad: Callable, project: Callable, x0: np.ndarray,
                       step: float, tol: float, max_iter: int):
    """Fixed-step projected gradient descent.

    Iterates ``x <- P(x - step * grad(x))`` until the displacement drops
    below ``tol``.  Returns ``(x, iterations, residual)``; the final point
    always lies in the set.
    """
    x = project(np.asarray(x0, dtype=float))
    residual = 0.0
    for it in range(1, max_iter + 1):
        x_next = project(x - step * np.asarray(grad(x), dtype=float))
        residual = float(np.linalg.norm(x_next - x))
        x = x_next
        if residual <= tol:
            return x, it, residual
    return x, max_iter, residual
