"""Primal decomposition: slack allocation with a master subgradient loop.

Each block receives a slack vector ``t_i`` bounding its share of every
shared constraint; blocks solve their own constrained problems, and a
master projected-subgradient step reallocates the slack.  Because the
master keeps ``sum_i t_i <= 0`` at every iterate, the assembled point
satisfies the shared constraint models throughout the run, unlike
multiplier ascent whose intermediate iterates may violate them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConvergenceError, InfeasibilityError, ParameterError
from .parallel import ordered_map
from .subproblem import InnerSolution, Subproblem
from .dual import (LAMBDA_CEILING, block_lagrangian_min, dual_lipschitz_constant,
                   dual_solve, _assemble)
from .surrogates import estimate_value_lipschitz


@dataclass(frozen=True)
class SlackAllocation:
    """Per-block slack vectors; feasible when they sum to <= 0 componentwise."""

    t: np.ndarray  # shape (blocks, constraints)

    @property
    def feasible(self) -> bool:
        if self.t.size == 0:
            return True
        return bool(np.all(self.t.sum(axis=0) <= 1e-12))


@dataclass(frozen=True)
class BlockPrimalSolution:
    """One block's solution under its slack: point, multipliers, objective share."""

    point: np.ndarray
    multipliers: np.ndarray
    objective: float
    inner_iterations: int


def project_master(t) -> SlackAllocation:
    """Euclidean projection of slack vectors onto ``{sum_i t_i <= 0}``.

    Independently per constraint coordinate: when the column sum is
    positive, subtract the mean excess from every block; otherwise leave
    the column unchanged (halfspace projection).
    """
    t = np.asarray(t, dtype=float).copy()
    if t.ndim != 2:
        raise ParameterError("slack must be a 2-d array (blocks x constraints)")
    nblocks = t.shape[0]
    if nblocks:
        col = t.sum(axis=0)
        over = col > 0.0
        if np.any(over):
            t[:, over] -= col[over] / nblocks
    return SlackAllocation(t)


def _block_values(sub: Subproblem, i: int, xi) -> np.ndarray:
    return np.array([float(sub.block_constraint(j, i).value(xi))
                     for j in range(sub.m)])


def _block_dual_lipschitz(sub: Subproblem, i: int) -> float:
    """Dual-gradient Lipschitz bound for one slackened block.

    The block share of each constraint model inherits the full model's
    value-Lipschitz constant (moving one block moves the full model by the
    same amount), so the stacked bound carries over with the block's
    convexity modulus.
    """
    obj = sub.block_objective(i)
    c = max(obj.strong_convexity, sub.objective.strong_convexity)
    l2 = 0.0
    for j, cst in enumerate(sub.constraints):
        Lj = cst.lipschitz
        if Lj is None:
            Lj = estimate_value_lipschitz(cst.grad, sub.cset, seed=17 + j)
        l2 += Lj ** 2
    return dual_lipschitz_constant(float(np.sqrt(l2)), sub.m, c)


def block_subproblem(sub: Subproblem, i: int, t_i, tol: float = 1e-9,
                     max_iter: int = 20_000, lam0=None, x_init=None,
                     L_dual: Optional[float] = None) -> BlockPrimalSolution:
    """Solve one block under its slack: ``min model_i  s.t.  g~^i(x_i) <= t_i``.

    Multiplier ascent in the block: the Lagrangian minimizer does not
    depend on the slack (it only shifts the dual by a constant), so each
    round reuses the plain block Lagrangian solve; the dual gradient is
    the block share minus the slack.  A single shared constraint is
    handled by bisection.  Raises ``InfeasibilityError`` naming the block
    when no multiplier can push the share below its slack.
    """
    sub.require_separable()
    t_i = np.asarray(t_i, dtype=float)
    if t_i.shape != (sub.m,):
        raise ParameterError("slack vector length must equal the constraint count")

    total_inner = 0
    warm = x_init

    def evaluate(lam):
        nonlocal total_inner, warm
        xi, iters = block_lagrangian_min(sub, i, lam, tol=min(tol * 1e-2, 1e-10),
                                         x_init=warm)
        total_inner += iters
        warm = xi
        return xi, _block_values(sub, i, xi) - t_i

    if sub.m == 0:
        xi, _ = evaluate(np.zeros(0))
        obj_val = float(sub.block_objective(i).value(xi))
        return BlockPrimalSolution(xi, np.zeros(0), obj_val, total_inner)

    if sub.m == 1:
        xi, mu = _scalar_block_ascent(evaluate, tol, max_iter, i)
    else:
        if L_dual is None:
            L_dual = _block_dual_lipschitz(sub, i)
        alpha = 1.0 / L_dual
        lam = np.zeros(sub.m) if lam0 is None else np.asarray(lam0, dtype=float).copy()
        xi = None
        for n in range(max_iter):
            xi, grad = evaluate(lam)
            lam_next = np.maximum(lam + alpha * grad, 0.0)
            residual = float(np.linalg.norm(lam_next - lam)) / alpha
            excess = max(0.0, float(grad.max()))
            if residual <= tol and excess <= tol:
                break
            if float(np.max(np.abs(lam_next))) > LAMBDA_CEILING:
                raise InfeasibilityError(
                    f"block {i} looks infeasible for slack {t_i}: "
                    "multiplier divergence")
            lam = lam_next
        else:
            raise ConvergenceError(
                f"block {i} dual ascent exhausted {max_iter} rounds")
        mu = lam

    obj_val = float(sub.block_objective(i).value(xi))
    return BlockPrimalSolution(xi, mu, obj_val, total_inner)


def _scalar_block_ascent(evaluate, tol, max_iter, block_index):
    """Bisection on the monotone scalar dual gradient of one block."""
    xi, g = evaluate(np.zeros(1))
    g0 = float(g[0])
    if g0 <= tol:
        return xi, np.zeros(1)
    lo, hi = 0.0, 1.0
    rounds = 1
    while True:
        xi, g = evaluate(np.array([hi]))
        rounds += 1
        if float(g[0]) <= 0.0:
            break
        lo = hi
        hi *= 2.0
        if hi > LAMBDA_CEILING:
            raise InfeasibilityError(
                f"block {block_index} looks infeasible: bisection bracket "
                "exceeded the multiplier ceiling")
    while rounds < max_iter:
        mid = 0.5 * (lo + hi)
        xi, g = evaluate(np.array([mid]))
        rounds += 1
        gm = float(g[0])
        if abs(gm) <= tol or (hi - lo) <= 1e-15 * max(1.0, hi):
            return xi, np.array([mid])
        if gm > 0.0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(
        f"block {block_index} bisection exhausted {max_iter} rounds")


def master_subgradient(solutions) -> np.ndarray:
    """Subgradient of the master objective in the slack: ``-mu_i`` per block."""
    return -np.array([np.asarray(s.multipliers, dtype=float) for s in solutions])


def initial_slack(sub: Subproblem) -> SlackAllocation:
    """Slack from the anchor's per-block model values.

    The columns sum to the constraint-model values at the anchor, which
    are nonpositive by tangency and anchor feasibility, so every block
    starts feasible and the master starts inside its own feasible set.
    """
    t = np.zeros((sub.block_count, sub.m))
    for i in range(sub.block_count):
        xi = sub.anchor[sub.block_slice(i)]
        for j in range(sub.m):
            t[i, j] = float(sub.block_constraint(j, i).value(xi))
    return project_master(t)


def primal_solve(sub: Subproblem, beta0: float = 1.0, tol: float = 1e-6,
                 max_iter: int = 5_000, block_tol: float = 1e-9,
                 observer=None) -> InnerSolution:
    """Solve a separable subproblem by primal decomposition.

    Projected subgradient on the slack allocation with steps
    ``beta0 / (n+1)``; every master iterate keeps ``sum_i t_i <= 0``, so
    every assembled point satisfies the shared constraint models.  Stops
    when the slack stops moving: ``||t' - t|| <= tol (1 + ||t||)``.
    Returns the best-objective assembled point with the blockwise mean of
    the ``mu_i`` as the shared-constraint multiplier estimate.
    """
    sub.require_separable()
    if beta0 <= 0:
        raise ParameterError("beta0 must be positive")
    nb = sub.block_count

    if sub.m == 0:
        return dual_solve(sub, tol=tol, max_iter=max_iter, block_tol=block_tol)

    L_blocks = [_block_dual_lipschitz(sub, i) if sub.m > 1 else None
                for i in range(nb)]
    t = initial_slack(sub).t
    total_inner = 0
    warm_lams: list = [None] * nb
    warm_pts: list = [None] * nb
    best_point = None
    best_obj = np.inf
    best_mu = None
    last_move = np.inf

    for n in range(max_iter):
        def solve_one(i):
            return block_subproblem(sub, i, t[i], tol=block_tol,
                                    lam0=warm_lams[i], x_init=warm_pts[i],
                                    L_dual=L_blocks[i])

        solutions = ordered_map(solve_one, range(nb))
        total_inner += sum(s.inner_iterations for s in solutions)
        warm_lams = [s.multipliers for s in solutions]
        warm_pts = [s.point for s in solutions]
        obj = float(sum(s.objective for s in solutions))
        if observer is not None:
            observer(n, t.copy(), solutions)
        if obj < best_obj:
            best_obj = obj
            best_point = _assemble(sub, [s.point for s in solutions])
            best_mu = np.array([np.asarray(s.multipliers) for s in solutions])

        beta = beta0 / (n + 1.0)
        t_next = project_master(t - beta * master_subgradient(solutions)).t
        last_move = float(np.linalg.norm(t_next - t))
        if last_move <= tol * (1.0 + float(np.linalg.norm(t))):
            t = t_next
            break
        t = t_next
    else:
        raise ConvergenceError(
            f"primal master loop exhausted {max_iter} rounds "
            f"(last slack movement {last_move:.3e})",
            best=None if best_point is None else InnerSolution(
                best_point, best_mu.mean(axis=0), total_inner,
                sub.feasibility_excess(best_point), last_move))

    mu_mean = best_mu.mean(axis=0)
    return InnerSolution(best_point, mu_mean, total_inner,
                         sub.feasibility_excess(best_point), last_move)
