"""Solving one anchored subproblem to high accuracy.

``solve_subproblem`` dispatches between pure projected gradient (no
constraint models) and multiplier ascent (one or more), then certifies
the returned point with the fixed-point projection identity: the unique
minimizer ``x`` satisfies ``x = P_F(x - rho * grad_model(x))`` for any
positive ``rho``, where ``F`` is the subproblem's feasible set.  The
certificate is evaluated at ``rho = 1/(c + L)`` and the solve is tightened
until the residual meets the requested tolerance.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.optimize import nnls

from .errors import ConfigurationError, ConvergenceError, InputError
from .problem import ProblemSpec
from .subproblem import InnerSolution, Subproblem, as_single_block, projected_gradient
from .surrogates import SurrogateObjective, estimate_curvature
from .dual import DualStepRule, dual_solve
from . import primal as _primal


def _objective_curvature(sub: Subproblem) -> float:
    curv = sub.objective.curvature
    if curv is None:
        curv = estimate_curvature(sub.objective.grad, sub.cset, seed=3)
    return max(curv, sub.objective.strong_convexity)


def certificate_rho(sub: Subproblem) -> float:
    """The step used by the fixed-point certificate: ``1/(c + L)``."""
    return 1.0 / (sub.objective.strong_convexity + _objective_curvature(sub))


def fixed_point_residual(sub: Subproblem, x, rho: Optional[float] = None,
                         projection_tol: float = 1e-10) -> float:
    """Residual of the projection fixed-point identity at ``x``.

    ``|| x - P_F(x - rho grad_model(x)) ||`` with ``F`` the subproblem
    feasible set; the projection is exact set projection when there are no
    constraint models and a multiplier-ascent solve otherwise.
    """
    x = np.asarray(x, dtype=float)
    if rho is None:
        rho = certificate_rho(sub)
    target = x - rho * np.asarray(sub.objective.grad(x), dtype=float)
    if sub.m == 0:
        proj = sub.cset.project(target)
    else:
        proj = projection_onto_sublevel(sub, target, tol=projection_tol)
    return float(np.linalg.norm(x - proj))


def _projection_subproblem(sub: Subproblem, u: np.ndarray) -> Subproblem:
    """Same feasible set, objective replaced by half squared distance to ``u``."""
    from .surrogates import BlockComponent

    u = np.asarray(u, dtype=float)

    def value(x):
        d = x - u
        return 0.5 * float(d @ d)

    def grad(x):
        return x - u

    comps = []
    for i in range(sub.block_count):
        ui = u[sub.block_slice(i)]

        def bval(xi, ui=ui):
            d = xi - ui
            return 0.5 * float(d @ d)

        def bgrad(xi, ui=ui):
            return xi - ui

        comps.append(BlockComponent(bval, bgrad, curvature=1.0,
                                    strong_convexity=1.0))
    objective = SurrogateObjective(sub.anchor, value, grad, strong_convexity=1.0,
                                   curvature=1.0, separable=True,
                                   per_block_components=tuple(comps))
    constraints = sub.constraints
    if any(c.per_block_components is None for c in constraints):
        if sub.blocks is not None:
            raise ConfigurationError(
                "projection needs block-separable constraint models")
        wrapped = as_single_block(Subproblem(sub.objective, constraints, sub.cset,
                                             sub.anchor, blocks=None))
        constraints = wrapped.constraints
    return Subproblem(objective, constraints, sub.cset, sub.anchor,
                      blocks=sub.blocks)


def projection_onto_sublevel(sub: Subproblem, u, tol: float = 1e-10,
                             max_iter: int = 50_000) -> np.ndarray:
    """Euclidean projection of ``u`` onto the subproblem's feasible set.

    Solved as a strongly convex subproblem with objective
    ``||x - u||^2 / 2`` by the multiplier-ascent machinery.
    """
    u = np.asarray(u, dtype=float)
    if sub.m == 0:
        return sub.cset.project(u)
    proj = _projection_subproblem(sub, u)
    rule = DualStepRule("bisection") if sub.m == 1 else None
    sol = dual_solve(proj, rule, tol=tol, max_iter=max_iter)
    return sol.point


def solve_subproblem(sub: Subproblem, method: str = "auto", tol: float = 1e-8,
                     max_iter: int = 20_000, dual_rule: Optional[DualStepRule] = None,
                     lam0=None, observer=None, certify: bool = True,
                     primal_beta0: float = 1.0) -> InnerSolution:
    """Compute the unique minimizer of an anchored subproblem.

    ``method`` selects the machinery: ``projected-gradient`` (exact set
    projection each step; with constraint models present each step
    projects through a multiplier-ascent solve, which is slow but a useful
    cross-check), ``dual-ascent`` (multiplier ascent across blocks),
    ``primal-decomposition`` (slack allocation), or ``auto`` (dual ascent
    when constraint models are present, projected gradient otherwise).

    With ``certify=True`` the fixed-point projection residual of the
    returned point is evaluated at ``rho = 1/(c + L)`` and the solve is
    retried with a tighter internal tolerance until it meets ``tol``.
    """
    if method == "auto":
        method = "dual-ascent" if sub.m >= 1 else "projected-gradient"
    if method not in ("projected-gradient", "dual-ascent", "primal-decomposition"):
        raise ConfigurationError(f"unknown inner method {method!r}")

    if method == "projected-gradient":
        sol = _solve_projected_gradient(sub, tol, max_iter)
    elif method == "dual-ascent":
        if sub.m == 0:
            sol = _solve_projected_gradient(sub, tol, max_iter)
        else:
            sol = _solve_dual(sub, dual_rule, tol, max_iter, lam0, observer)
    else:
        sol = _primal.primal_solve(sub, beta0=primal_beta0,
                                   tol=max(tol * 1e-2, 1e-12), max_iter=max_iter,
                                   block_tol=min(tol * 1e-1, 1e-9),
                                   observer=observer)

    if not certify:
        return sol

    inner_total = sol.inner_iterations
    residual = fixed_point_residual(sub, sol.point, projection_tol=min(tol * 1e-2, 1e-10))
    shrink = 0.1
    attempts = 0
    while residual > tol and attempts < 3:
        attempts += 1
        tighter = tol * shrink ** attempts
        if method == "projected-gradient":
            sol = _solve_projected_gradient(sub, tighter, max_iter)
        elif method == "dual-ascent" and sub.m >= 1:
            sol = _solve_dual(sub, dual_rule, tighter, max_iter,
                              sol.multipliers if sol.multipliers.size else lam0,
                              observer)
        elif method == "primal-decomposition":
            sol = _primal.primal_solve(sub, beta0=primal_beta0,
                                       tol=max(tighter * 1e-2, 1e-13),
                                       max_iter=max_iter,
                                       block_tol=min(tighter * 1e-1, 1e-10),
                                       observer=observer)
        else:
            sol = _solve_projected_gradient(sub, tighter, max_iter)
        inner_total += sol.inner_iterations
        residual = fixed_point_residual(sub, sol.point,
                                        projection_tol=min(tighter * 1e-2, 1e-10))
    if residual > tol:
        raise ConvergenceError(
            f"inner solve certificate {residual:.3e} above tolerance {tol:.1e}",
            best=sol)
    return InnerSolution(sol.point, sol.multipliers, inner_total,
                         sub.feasibility_excess(sol.point), residual)


def _solve_projected_gradient(sub: Subproblem, tol: float, max_iter: int) -> InnerSolution:
    rho = certificate_rho(sub)
    if sub.m == 0:
        project = sub.cset.project
    else:
        def project(u):
            return projection_onto_sublevel(sub, u, tol=min(tol * 1e-2, 1e-10))
    x, iters, residual = projected_gradient(sub.objective.grad, project,
                                            sub.anchor, rho, tol * 0.5, max_iter)
    if residual > tol * 0.5:
        raise ConvergenceError(
            f"projected gradient stalled at displacement {residual:.3e}",
            best=InnerSolution(x, np.zeros(sub.m), iters,
                               sub.feasibility_excess(x), residual))
    mu = np.zeros(sub.m)
    if sub.m:
        mu = fit_multipliers_for_subproblem(sub, x)
    return InnerSolution(x, mu, iters, sub.feasibility_excess(x), residual)


def _solve_dual(sub, dual_rule, tol, max_iter, lam0, observer) -> InnerSolution:
    if not sub.is_separable:
        if sub.blocks is not None:
            sub.require_separable()  # raises naming the offending model
        sub = as_single_block(sub)
    return dual_solve(sub, dual_rule, tol=tol, max_iter=max_iter, lam0=lam0,
                      observer=observer)


def fit_multipliers_for_subproblem(sub: Subproblem, x, active_tol: float = 1e-6) -> np.ndarray:
    """Nonnegative least-squares multipliers for the active constraint models."""
    x = np.asarray(x, dtype=float)
    mu = np.zeros(sub.m)
    vals = sub.constraint_values(x)
    active = [j for j in range(sub.m) if vals[j] >= -active_tol]
    if not active:
        return mu
    A = np.column_stack([np.asarray(sub.constraints[j].grad(x), dtype=float)
                         for j in active])
    b = -np.asarray(sub.objective.grad(x), dtype=float)
    coef, _ = nnls(A, b)
    for j, c in zip(active, coef):
        mu[j] = c
    return mu


def kkt_residual_original(problem: ProblemSpec, x, mu=None) -> float:
    """Stationarity certificate for the original problem at ``(x, mu)``.

    ``|| x - P_K(x - grad_U(x) - sum_j mu_j grad_g_j(x)) ||`` plus the
    negative parts of ``mu`` and the complementarity defects
    ``|mu_j g_j(x)|``.  A small value certifies approximate stationarity
    with the supplied multipliers.  When ``mu`` is omitted it is recovered
    by a nonnegative least-squares fit over the active constraints.
    """
    x = problem.check_point(x)
    if mu is None:
        mu = fit_multipliers_original(problem, x)
    mu = np.atleast_1d(np.asarray(mu, dtype=float)) if problem.m else np.zeros(0)
    if mu.shape != (problem.m,):
        raise InputError("multiplier length does not match constraint count")

    direction = np.asarray(problem.objective_grad(x), dtype=float).copy()
    for mj, c in zip(mu, problem.constraints):
        if mj != 0.0:
            direction += mj * np.asarray(c.grad(x), dtype=float)
    res = float(np.linalg.norm(x - problem.convex_set.project(x - direction)))
    res += float(np.sum(np.maximum(0.0, -mu)))
    for mj, c in zip(mu, problem.constraints):
        res += abs(mj * float(c.value(x)))
    return res


def fit_multipliers_original(problem: ProblemSpec, x, active_tol: float = 1e-6) -> np.ndarray:
    """Nonnegative least-squares multiplier fit over active original constraints."""
    x = problem.check_point(x)
    mu = np.zeros(problem.m)
    if problem.m == 0:
        return mu
    vals = problem.constraint_values(x)
    active = [j for j in range(problem.m) if vals[j] >= -active_tol]
    if not active:
        return mu
    A = np.column_stack([np.asarray(problem.constraints[j].grad(x), dtype=float)
                         for j in active])
    b = -np.asarray(problem.objective_grad(x), dtype=float)
    coef, _ = nnls(A, b)
    for j, c in zip(active, coef):
        mu[j] = c
    return mu
