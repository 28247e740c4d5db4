"""Dual ascent for block-separable subproblems.

The shared constraint models are priced with multipliers; each block then
minimizes its own Lagrangian independently (in parallel), and the
multipliers take a projected gradient step on the concave dual.  The dual
gradient is simply the aggregated constraint-model value at the block
minimizers, and its Lipschitz constant is ``L_g^2 sqrt(m) / c`` where
``L_g`` bounds the constraint-model Lipschitz constant and ``c`` is the
strong-convexity modulus of the objective model.

With a single shared constraint the multiplier update can be replaced by
bisection on the (monotone) scalar dual gradient, which typically needs
far fewer rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, ConvergenceError, InfeasibilityError, ParameterError
from .parallel import ordered_map
from .subproblem import InnerSolution, Subproblem, projected_gradient
from .surrogates import estimate_value_lipschitz

#: Multiplier magnitude beyond which the subproblem is presumed infeasible.
#: A heuristic guard against misconfiguration; a strictly feasible
#: subproblem keeps its multipliers bounded.
LAMBDA_CEILING = 1e8


@dataclass(frozen=True)
class DualStepRule:
    """Step-size policy for the multiplier updates.

    kinds
      ``constant-range``       constant step in (0, 2/L) for the dual
                               gradient's Lipschitz constant L; defaults
                               to 1/L when ``alpha0`` is omitted.
      ``summable-diminishing`` ``alpha0 / (n+1)``: vanishing,
                               non-summable, square-summable.
      ``bisection``            bracketing on the scalar dual gradient;
                               only valid with a single shared constraint.
    """

    kind: str = "constant-range"
    alpha0: Optional[float] = None
    L_dual: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("constant-range", "summable-diminishing", "bisection"):
            raise ParameterError(f"unknown dual step rule {self.kind!r}")
        if self.kind == "summable-diminishing":
            if self.alpha0 is not None and self.alpha0 <= 0:
                raise ParameterError("alpha0 must be positive")
        if self.kind == "constant-range" and self.alpha0 is not None \
                and self.L_dual is not None:
            if not 0 < self.alpha0 < 2.0 / self.L_dual:
                raise ParameterError(
                    f"constant dual step must lie in (0, 2/L) = (0, {2.0 / self.L_dual:.6g})")

    def alpha(self, n: int, L_dual: Optional[float] = None) -> float:
        if self.kind == "summable-diminishing":
            a0 = self.alpha0 if self.alpha0 is not None else 1.0
            return a0 / (n + 1.0)
        if self.alpha0 is not None:
            return self.alpha0
        L = self.L_dual if self.L_dual is not None else L_dual
        if L is None or L <= 0:
            raise ConfigurationError("constant-range rule needs a dual Lipschitz "
                                     "constant or an explicit alpha0")
        return 1.0 / L


@dataclass
class DualState:
    """Snapshot of one multiplier iteration."""

    lam: np.ndarray
    alpha: float
    block_solutions: list
    dual_grad: np.ndarray
    dual_value: float
    iterations: list = field(default_factory=list)


def dual_lipschitz_constant(L_gtilde: float, m: int, c_tilde: float) -> float:
    """Lipschitz constant of the dual gradient: ``L_g^2 sqrt(m) / c``."""
    if L_gtilde <= 0 or m <= 0 or c_tilde <= 0:
        raise ParameterError("all inputs must be positive")
    return L_gtilde ** 2 * float(np.sqrt(m)) / c_tilde


def multiplier_update(lam, alpha: float, dual_grad) -> np.ndarray:
    """Projected gradient ascent step on the multipliers: ``[lam + alpha g]_+``."""
    lam = np.asarray(lam, dtype=float)
    return np.maximum(lam + alpha * np.asarray(dual_grad, dtype=float), 0.0)


def block_lagrangian_min(sub: Subproblem, i: int, lam, tol: float = 1e-10,
                         max_iter: int = 50_000, x_init=None):
    """Minimize one block's Lagrangian over its set.

    Solves ``min_{x_i in K_i}  model_i(x_i) + lam^T g~^i(x_i)`` by
    projected gradient with a step set from the curvature of the priced
    Lagrangian.  Returns ``(x_i, iterations)``.
    """
    sub.require_separable()
    lam = np.asarray(lam, dtype=float)
    if lam.size != sub.m:
        raise ConfigurationError("multiplier length does not match constraint count")
    if np.any(lam < 0):
        raise ParameterError("multipliers must be nonnegative")
    obj = sub.block_objective(i)
    cons = [sub.block_constraint(j, i) for j in range(sub.m)]
    cset = sub.block_set(i)

    def lag_grad(xi):
        g = np.asarray(obj.grad(xi), dtype=float).copy()
        for lj, comp in zip(lam, cons):
            if lj != 0.0:
                g += lj * np.asarray(comp.grad(xi), dtype=float)
        return g

    # Curvature of the priced Lagrangian; the objective component's own
    # curvature (not just its convexity modulus) must be counted or the
    # fixed step can overshoot on anisotropic models.
    curv = max(obj.curvature, obj.strong_convexity, 1e-12)
    curv += float(sum(lj * comp.curvature for lj, comp in zip(lam, cons)))
    step = 1.0 / curv

    x0 = x_init if x_init is not None else sub.anchor[sub.block_slice(i)]
    xi, iters, _ = projected_gradient(lag_grad, cset.project, x0, step, tol, max_iter)
    return xi, iters


def _solve_all_blocks(sub: Subproblem, lam, tol, max_iter, warm):
    """Solve every block Lagrangian; deterministic order-fixed reduction."""
    nb = sub.block_count

    def solve_one(i):
        init = warm[i] if warm is not None else None
        return block_lagrangian_min(sub, i, lam, tol=tol, max_iter=max_iter, x_init=init)

    results = ordered_map(solve_one, range(nb))
    xs = [r[0] for r in results]
    iters = [r[1] for r in results]
    return xs, iters


def block_constraint_values(sub: Subproblem, xs) -> np.ndarray:
    """Stacked per-block model values: column ``i`` holds ``g~^i(x_i)``."""
    out = np.zeros((sub.m, sub.block_count))
    for i in range(sub.block_count):
        for j in range(sub.m):
            out[j, i] = float(sub.block_constraint(j, i).value(xs[i]))
    return out


def dual_gradient(state: DualState) -> np.ndarray:
    """Gradient of the dual at the state's multipliers (aggregate model values)."""
    return state.dual_grad.copy()


def evaluate_dual(sub: Subproblem, lam, tol: float = 1e-10,
                  max_iter: int = 50_000, warm=None) -> DualState:
    """Solve all block Lagrangians at ``lam`` and assemble value and gradient."""
    xs, iters = _solve_all_blocks(sub, lam, tol, max_iter, warm)
    per_block = block_constraint_values(sub, xs)
    grad = per_block.sum(axis=1)
    value = 0.0
    for i, xi in enumerate(xs):
        value += float(sub.block_objective(i).value(xi))
    value += float(np.asarray(lam, dtype=float) @ grad)
    return DualState(np.asarray(lam, dtype=float).copy(), 0.0, xs, grad, value,
                     iterations=iters)


def resolved_dual_lipschitz(sub: Subproblem, samples: int = 256, seed: int = 0) -> float:
    """Dual-gradient Lipschitz constant from the constraint models.

    Per-constraint value-Lipschitz constants are taken from the models
    when declared and estimated by sampling otherwise; they are stacked as
    ``sqrt(sum L_j^2)``, a valid bound for the vector-valued map.
    """
    if sub.m == 0:
        raise ConfigurationError("no shared constraints to dualize")
    l2 = 0.0
    for j, c in enumerate(sub.constraints):
        Lj = c.lipschitz
        if Lj is None:
            Lj = estimate_value_lipschitz(c.grad, sub.cset, samples=samples,
                                          seed=seed + j)
        l2 += Lj ** 2
    return dual_lipschitz_constant(float(np.sqrt(l2)), sub.m,
                                   sub.objective.strong_convexity)


def _assemble(sub: Subproblem, xs) -> np.ndarray:
    if sub.blocks is None:
        return np.asarray(xs[0], dtype=float).copy()
    return np.concatenate([np.asarray(x, dtype=float) for x in xs])


def dual_solve(sub: Subproblem, rule: Optional[DualStepRule] = None,
               tol: float = 1e-8, max_iter: int = 20_000,
               lam0=None, block_tol: Optional[float] = None,
               block_max_iter: int = 50_000, observer=None,
               ceiling: float = LAMBDA_CEILING) -> InnerSolution:
    """Solve a separable subproblem by multiplier ascent.

    Iterates block solves and projected multiplier steps until the dual
    step residual ``||lam' - lam|| / alpha`` and the primal feasibility
    excess both drop below ``tol``.  Returns the assembled primal point
    with the final multipliers; ``stationarity_residual`` carries the dual
    step residual (the caller may replace it with a primal fixed-point
    certificate).

    Raises ``InfeasibilityError`` when the multipliers blow past the
    divergence ceiling and ``ConvergenceError`` (with the best iterate
    attached) when the round budget runs out.
    """
    sub.require_separable()
    rule = rule or DualStepRule()
    if block_tol is None:
        block_tol = min(tol * 1e-2, 1e-10)

    total_inner = 0
    if sub.m == 0:
        state = evaluate_dual(sub, np.zeros(0), tol=block_tol, max_iter=block_max_iter)
        total_inner = sum(state.iterations)
        point = _assemble(sub, state.block_solutions)
        if observer is not None:
            observer(0, np.zeros(0), state.block_solutions, state.iterations,
                     np.zeros(0))
        return InnerSolution(point, np.zeros(0), total_inner,
                             sub.feasibility_excess(point), 0.0)

    if rule.kind == "bisection":
        if sub.m != 1:
            raise ConfigurationError("bisection requires exactly one shared constraint")
        return _bisection_solve(sub, tol, max_iter, block_tol, block_max_iter,
                                observer, ceiling)

    L_dual = rule.L_dual
    if L_dual is None and rule.kind == "constant-range" and rule.alpha0 is None:
        L_dual = resolved_dual_lipschitz(sub)

    lam = np.zeros(sub.m) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    if lam.shape != (sub.m,) or np.any(lam < 0):
        raise ParameterError("lam0 must be a nonnegative vector of length m")

    warm = None
    best: Optional[InnerSolution] = None
    for n in range(max_iter):
        state = evaluate_dual(sub, lam, tol=block_tol, max_iter=block_max_iter, warm=warm)
        total_inner += sum(state.iterations)
        warm = state.block_solutions
        alpha = rule.alpha(n, L_dual)
        state.alpha = alpha
        if observer is not None:
            observer(n, lam, state.block_solutions, state.iterations, state.dual_grad)

        lam_next = multiplier_update(lam, alpha, state.dual_grad)
        dual_residual = float(np.linalg.norm(lam_next - lam)) / alpha
        point = _assemble(sub, state.block_solutions)
        primal_excess = max(0.0, float(state.dual_grad.max())) if sub.m else 0.0
        best = InnerSolution(point, lam.copy(), total_inner, primal_excess,
                             dual_residual)
        if dual_residual <= tol and primal_excess <= tol:
            return best
        if float(np.max(np.abs(lam_next))) > ceiling:
            raise InfeasibilityError(
                "multiplier divergence: subproblem is likely infeasible "
                f"(|lam| > {ceiling:.1e})")
        lam = lam_next

    raise ConvergenceError(
        f"dual ascent did not reach tol {tol:.1e} within {max_iter} rounds "
        f"(last residual {best.stationarity_residual:.3e})", best=best)


def _bisection_solve(sub, tol, max_iter, block_tol, block_max_iter, observer, ceiling):
    """Scalar-multiplier solve by bracketing the monotone dual gradient."""
    total_inner = 0
    rounds = 0

    def evaluate(lam_val, warm=None):
        nonlocal total_inner, rounds
        lam = np.array([lam_val])
        state = evaluate_dual(sub, lam, tol=block_tol, max_iter=block_max_iter, warm=warm)
        total_inner += sum(state.iterations)
        if observer is not None:
            observer(rounds, lam, state.block_solutions, state.iterations,
                     state.dual_grad)
        rounds += 1
        return state

    state0 = evaluate(0.0)
    g0 = float(state0.dual_grad[0])
    if g0 <= tol:
        point = _assemble(sub, state0.block_solutions)
        return InnerSolution(point, np.zeros(1), total_inner,
                             max(0.0, g0), 0.0)

    lo, g_lo, state_lo = 0.0, g0, state0
    hi = 1.0
    warm = state0.block_solutions
    while True:
        state_hi = evaluate(hi, warm=warm)
        warm = state_hi.block_solutions
        g_hi = float(state_hi.dual_grad[0])
        if g_hi <= 0.0:
            break
        lo, g_lo, state_lo = hi, g_hi, state_hi
        hi *= 2.0
        if hi > ceiling:
            raise InfeasibilityError(
                "bisection bracket exceeded the multiplier ceiling: "
                "subproblem is likely infeasible")

    best = None
    while rounds < max_iter:
        mid = 0.5 * (lo + hi)
        state = evaluate(mid, warm=warm)
        warm = state.block_solutions
        g_mid = float(state.dual_grad[0])
        point = _assemble(sub, state.block_solutions)
        best = InnerSolution(point, np.array([mid]), total_inner,
                             max(0.0, g_mid), abs(g_mid))
        if abs(g_mid) <= tol or (hi - lo) <= 1e-15 * max(1.0, hi):
            return best
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid

    raise ConvergenceError(
        f"bisection did not localize the multiplier within {max_iter} rounds",
        best=best)
