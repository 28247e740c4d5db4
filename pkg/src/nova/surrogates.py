"""Anchored convex models of the objective and of nonconvex constraints.

Given an anchor point ``y``, the solver replaces the objective by a
strongly convex model that matches its gradient at ``y``, and every
nonconvex constraint by a convex model that is tangent at ``y`` and upper
bounds the original everywhere on the set.  The upper-bound property is
what keeps every iterate feasible; the strong convexity makes each
subproblem uniquely solvable.

Builders provided here:

* :func:`lipschitz_quadratic_surrogate` -- quadratic upper bound from a
  gradient-Lipschitz constant;
* :func:`dc_linearize` -- linearize the concave part of a
  difference-of-convex split;
* :func:`hessian_shift_dc_split` -- manufacture a DC split by shifting
  with a curvature bound;
* :func:`bilinear_surrogate` -- the DC treatment of a product term
  ``x_i * x_j``;
* :func:`proximal_linear_objective`, :func:`block_convex_objective`,
  :func:`sum_utility_objective`, :func:`product_objective` -- objective
  models of increasing structure.

:func:`verify_surrogate` checks the tangency / convexity / upper-bound /
strong-monotonicity contracts empirically and reports worst violations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ParameterError
from .problem import BlockPartition
from .sets import ConvexSet


@dataclass(frozen=True)
class Smooth:
    """A smooth scalar function given by value and gradient oracles.

    ``curvature`` optionally bounds the Lipschitz constant of the gradient
    (for a quadratic: the largest absolute Hessian eigenvalue).
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    curvature: Optional[float] = None


@dataclass(frozen=True)
class BlockComponent:
    """Restriction of a separable model to one block of variables."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    curvature: float = 0.0
    strong_convexity: float = 0.0


def _zero_component(size: int) -> BlockComponent:
    zero = np.zeros(size)
    return BlockComponent(lambda xi: 0.0, lambda xi: zero, 0.0, 0.0)


@dataclass(frozen=True)
class SurrogateObjective:
    """Strongly convex objective model anchored at a feasible point.

    The gradient at the anchor coincides with the gradient of the original
    objective (checked at build time); the model need not upper bound the
    original anywhere.
    """

    anchor: np.ndarray
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    strong_convexity: float
    curvature: Optional[float] = None
    separable: bool = False
    per_block_components: Optional[tuple[BlockComponent, ...]] = None

    def __post_init__(self):
        if self.strong_convexity <= 0:
            raise ParameterError("objective model must declare a positive strong-convexity modulus")


@dataclass(frozen=True)
class SurrogateConstraint:
    """Convex upper-bound model of one constraint, anchored at a feasible point."""

    anchor: np.ndarray
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    per_block_components: Optional[tuple[BlockComponent, ...]] = None
    lipschitz: Optional[float] = None
    curvature: float = 0.0
    name: str = ""


def _tangency_guard(grad_model, grad_original, y, tol, what):
    gm = np.asarray(grad_model(y), dtype=float)
    go = np.asarray(grad_original(y), dtype=float)
    err = float(np.linalg.norm(gm - go))
    if err > tol:
        raise ConfigurationError(f"{what}: gradient mismatch {err:.3e} at the anchor")


def _normalize_blocks(blocks, dim: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Return (sizes, offsets); a missing partition means one whole-vector block."""
    if blocks is None:
        return (dim,), (0,)
    if isinstance(blocks, BlockPartition):
        return tuple(blocks.sizes), blocks.offsets
    sizes = tuple(int(s) for s in blocks)
    if sum(sizes) != dim:
        raise ParameterError("block sizes must sum to the dimension")
    out, acc = [], 0
    for s in sizes:
        out.append(acc)
        acc += s
    return sizes, tuple(out)


def _per_block_tau(tau, nblocks: int) -> np.ndarray:
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    if t.size == 1:
        t = np.full(nblocks, float(t[0]))
    if t.size != nblocks:
        raise ParameterError("tau must be a scalar or one value per block")
    return t


# ---------------------------------------------------------------------------
# Constraint models
# ---------------------------------------------------------------------------

def lipschitz_quadratic_surrogate(g: Smooth, L: float, y, blocks=None,
                                  name: str = "") -> SurrogateConstraint:
    """Quadratic upper bound of ``g`` around ``y`` from a gradient-Lipschitz bound.

    ``model(x) = g(y) + grad_g(y)^T (x - y) + (L/2) ||x - y||^2``.  The
    caller warrants that ``L`` dominates the true Lipschitz constant of the
    gradient on the set; an undersized ``L`` silently breaks the
    upper-bound property (catch it with :func:`verify_surrogate`).
    """
    if L <= 0:
        raise ParameterError("Lipschitz bound must be positive")
    y = np.asarray(y, dtype=float)
    gy = float(g.value(y))
    dgy = np.asarray(g.grad(y), dtype=float)

    def value(x):
        d = x - y
        return gy + float(dgy @ d) + 0.5 * L * float(d @ d)

    def grad(x):
        return dgy + L * (x - y)

    sizes, offsets = _normalize_blocks(blocks, y.size)
    nb = len(sizes)
    comps = []
    for i, (sz, off) in enumerate(zip(sizes, offsets)):
        sl = slice(off, off + sz)
        yi, gi = y[sl], dgy[sl]
        const = gy / nb

        def bval(xi, yi=yi, gi=gi, const=const):
            d = xi - yi
            return const + float(gi @ d) + 0.5 * L * float(d @ d)

        def bgrad(xi, yi=yi, gi=gi):
            return gi + L * (xi - yi)

        comps.append(BlockComponent(bval, bgrad, curvature=L))

    return SurrogateConstraint(y, value, grad, tuple(comps), lipschitz=None,
                               curvature=L, name=name)


def dc_linearize(g_plus: Smooth, g_minus: Smooth, y, blocks=None,
                 g_plus_blocks: Optional[Sequence[Smooth]] = None,
                 name: str = "") -> SurrogateConstraint:
    """Convex upper bound of ``g = g_plus - g_minus`` (both convex).

    Keeps the convex part and linearizes the concave one:
    ``model(x) = g_plus(x) - g_minus(y) - grad_g_minus(y)^T (x - y)``.

    When ``g_plus_blocks`` decomposes ``g_plus`` across the partition
    (their sum must equal ``g_plus``), the model is returned with
    per-block components, which the decomposed solvers require.
    """
    y = np.asarray(y, dtype=float)
    gmy = float(g_minus.value(y))
    dgmy = np.asarray(g_minus.grad(y), dtype=float)

    def value(x):
        return float(g_plus.value(x)) - gmy - float(dgmy @ (x - y))

    def grad(x):
        return np.asarray(g_plus.grad(x), dtype=float) - dgmy

    comps = None
    if g_plus_blocks is not None:
        sizes, offsets = _normalize_blocks(blocks, y.size)
        if len(g_plus_blocks) != len(sizes):
            raise ParameterError("need one convex-part component per block")
        nb = len(sizes)
        comps = []
        for i, (sz, off, part) in enumerate(zip(sizes, offsets, g_plus_blocks)):
            sl = slice(off, off + sz)
            yi, gi = y[sl], dgmy[sl]
            const = gmy / nb

            def bval(xi, part=part, yi=yi, gi=gi, const=const):
                return float(part.value(xi)) - const - float(gi @ (xi - yi))

            def bgrad(xi, part=part, gi=gi):
                return np.asarray(part.grad(xi), dtype=float) - gi

            comps.append(BlockComponent(bval, bgrad,
                                        curvature=part.curvature or 0.0))
        comps = tuple(comps)

    curv = g_plus.curvature if g_plus.curvature is not None else 0.0
    return SurrogateConstraint(y, value, grad, comps, lipschitz=None,
                               curvature=curv, name=name)


def hessian_shift_dc_split(g: Smooth, curvature_bound: float) -> tuple[Smooth, Smooth]:
    """Manufacture a DC split of ``g`` by quadratic shifting.

    With ``b = curvature_bound`` dominating the most negative Hessian
    eigenvalue of ``g`` over the set, both
    ``g_plus(x) = g(x) + (b/2)||x||^2`` and ``g_minus(x) = (b/2)||x||^2``
    are convex and ``g = g_plus - g_minus``.  Feed the pair to
    :func:`dc_linearize`.
    """
    if curvature_bound <= 0:
        raise ParameterError("curvature bound must be positive")
    b = float(curvature_bound)

    def plus_value(x):
        return float(g.value(x)) + 0.5 * b * float(x @ x)

    def plus_grad(x):
        return np.asarray(g.grad(x), dtype=float) + b * x

    plus_curv = None if g.curvature is None else g.curvature + b
    g_plus = Smooth(plus_value, plus_grad, plus_curv)
    g_minus = Smooth(lambda x: 0.5 * b * float(x @ x), lambda x: b * x, b)
    return g_plus, g_minus


def bilinear_surrogate(i1: int, i2: int, y, sign: int = 1,
                       blocks=None, name: str = "") -> SurrogateConstraint:
    """Convex upper bound of the product term ``sign * x_{i1} * x_{i2}``.

    The product is split as a difference of convex quadratics,
    ``x1*x2 = (x1+x2)^2/2 - (x1^2+x2^2)/2``, and the concave half is
    linearized at ``y``.  For ``sign=+1`` the coupled square is kept; for
    ``sign=-1`` the separable squares are kept, which makes the model
    block-separable whenever ``i1`` and ``i2`` live in different blocks.
    """
    if i1 == i2:
        raise ParameterError("bilinear term needs two distinct coordinates; "
                             "use a quadratic term for a square")
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 or -1")
    y = np.asarray(y, dtype=float)
    n = y.size
    y1, y2 = float(y[i1]), float(y[i2])

    if sign == 1:
        # keep (x1+x2)^2/2, linearize -(x1^2+x2^2)/2
        const = -0.5 * (y1 * y1 + y2 * y2) + y1 * y1 + y2 * y2

        def value(x):
            s = x[i1] + x[i2]
            return 0.5 * s * s - 0.5 * (y1 * y1 + y2 * y2) \
                - y1 * (x[i1] - y1) - y2 * (x[i2] - y2)

        def grad(x):
            g = np.zeros(n)
            s = x[i1] + x[i2]
            g[i1] = s - y1
            g[i2] = s - y2
            return g

        curvature = 2.0  # eigenvalue of the kept coupled square
        comps = None
        sizes, offsets = _normalize_blocks(blocks, n)
        # Separable only when both coordinates share a block.
        owner1 = owner2 = None
        for b, (sz, off) in enumerate(zip(sizes, offsets)):
            if off <= i1 < off + sz:
                owner1 = b
            if off <= i2 < off + sz:
                owner2 = b
        if owner1 == owner2 and owner1 is not None:
            comps = []
            for b, (sz, off) in enumerate(zip(sizes, offsets)):
                if b != owner1:
                    comps.append(_zero_component(sz))
                    continue
                j1, j2 = i1 - off, i2 - off

                def bval(xi, j1=j1, j2=j2):
                    s = xi[j1] + xi[j2]
                    return 0.5 * s * s - 0.5 * (y1 * y1 + y2 * y2) \
                        - y1 * (xi[j1] - y1) - y2 * (xi[j2] - y2)

                def bgrad(xi, j1=j1, j2=j2, sz=sz):
                    g = np.zeros(sz)
                    s = xi[j1] + xi[j2]
                    g[j1] = s - y1
                    g[j2] = s - y2
                    return g

                comps.append(BlockComponent(bval, bgrad, curvature=2.0))
            comps = tuple(comps)
        return SurrogateConstraint(y, value, grad, comps, curvature=curvature, name=name)

    # sign == -1: keep (x1^2+x2^2)/2, linearize -(x1+x2)^2/2
    s_y = y1 + y2

    def value(x):
        return 0.5 * (x[i1] ** 2 + x[i2] ** 2) - 0.5 * s_y * s_y \
            - s_y * (x[i1] - y1) - s_y * (x[i2] - y2)

    def grad(x):
        g = np.zeros(n)
        g[i1] = x[i1] - s_y
        g[i2] = x[i2] - s_y
        return g

    sizes, offsets = _normalize_blocks(blocks, n)
    participating = []
    for b, (sz, off) in enumerate(zip(sizes, offsets)):
        local = [(j, idx - off) for j, idx in ((1, i1), (2, i2)) if off <= idx < off + sz]
        participating.append(local)
    nshare = sum(1 for local in participating if local)
    comps = []
    for b, (sz, off) in enumerate(zip(sizes, offsets)):
        local = participating[b]
        if not local:
            comps.append(_zero_component(sz))
            continue
        const = (-0.5 * s_y * s_y) / nshare
        terms = tuple((jl, y1 if which == 1 else y2) for which, jl in local)

        def bval(xi, terms=terms, const=const):
            out = const
            for jl, yk in terms:
                out += 0.5 * xi[jl] ** 2 - s_y * (xi[jl] - yk)
            return out

        def bgrad(xi, terms=terms, sz=sz):
            g = np.zeros(sz)
            for jl, _ in terms:
                g[jl] = xi[jl] - s_y
            return g

        comps.append(BlockComponent(bval, bgrad, curvature=1.0))
    return SurrogateConstraint(y, value, grad, tuple(comps), curvature=1.0, name=name)


def identity_convex_constraint(g: Smooth, y, blocks=None,
                               block_values: Optional[Sequence[Smooth]] = None,
                               name: str = "") -> SurrogateConstraint:
    """Use a constraint already known to be convex as its own model."""
    y = np.asarray(y, dtype=float)
    comps = None
    if block_values is not None:
        comps = tuple(BlockComponent(p.value, p.grad, curvature=p.curvature or 0.0)
                      for p in block_values)
    return SurrogateConstraint(y, g.value, g.grad, comps,
                               curvature=g.curvature or 0.0, name=name)


def offset_constraint(surr: SurrogateConstraint, constant: float) -> SurrogateConstraint:
    """Shift a constraint model by an additive constant.

    The constant is spread evenly over the per-block components so that
    their sum still reproduces the full model.
    """
    c = float(constant)
    base_value = surr.value

    def value(x):
        return base_value(x) + c

    comps = None
    if surr.per_block_components is not None:
        nb = len(surr.per_block_components)
        comps = tuple(
            BlockComponent(
                (lambda xi, f=comp.value: f(xi) + c / nb),
                comp.grad, comp.curvature, comp.strong_convexity)
            for comp in surr.per_block_components)
    return SurrogateConstraint(surr.anchor, value, surr.grad, comps,
                               lipschitz=surr.lipschitz,
                               curvature=surr.curvature, name=surr.name)


def with_lipschitz(surr: SurrogateConstraint, L: float) -> SurrogateConstraint:
    """Attach a known value-Lipschitz constant to a constraint model."""
    return SurrogateConstraint(surr.anchor, surr.value, surr.grad,
                               surr.per_block_components, lipschitz=float(L),
                               curvature=surr.curvature, name=surr.name)


# ---------------------------------------------------------------------------
# Objective models
# ---------------------------------------------------------------------------

def proximal_linear_objective(objective_grad: Callable, tau, y,
                              blocks=None) -> SurrogateObjective:
    """First-order model with proximal damping, one term per block.

    ``model_i(x_i) = grad_i^T (x_i - y_i) + (tau_i/2) ||x_i - y_i||^2``
    with ``grad_i`` the block slice of the objective gradient at ``y``.
    Works for arbitrary nonconvex objectives.
    """
    y = np.asarray(y, dtype=float)
    sizes, offsets = _normalize_blocks(blocks, y.size)
    taus = _per_block_tau(tau, len(sizes))
    if np.any(taus <= 0):
        raise ParameterError("proximal weights must be positive")
    gy = np.asarray(objective_grad(y), dtype=float)

    tau_full = np.empty(y.size)
    for t, sz, off in zip(taus, sizes, offsets):
        tau_full[off:off + sz] = t

    def value(x):
        d = x - y
        return float(gy @ d) + 0.5 * float((tau_full * d) @ d)

    def grad(x):
        return gy + tau_full * (x - y)

    comps = []
    for t, sz, off in zip(taus, sizes, offsets):
        sl = slice(off, off + sz)
        yi, gi = y[sl], gy[sl]

        def bval(xi, yi=yi, gi=gi, t=t):
            d = xi - yi
            return float(gi @ d) + 0.5 * t * float(d @ d)

        def bgrad(xi, yi=yi, gi=gi, t=t):
            return gi + t * (xi - yi)

        comps.append(BlockComponent(bval, bgrad, curvature=float(t),
                                    strong_convexity=float(t)))

    return SurrogateObjective(y, value, grad,
                              strong_convexity=float(taus.min()),
                              curvature=float(taus.max()),
                              separable=True,
                              per_block_components=tuple(comps))


def _resolve_H(H, sizes):
    """Return (list of matrices or None per block, floor, norm) triples."""
    out = []
    if H is None:
        for sz in sizes:
            out.append((None, 1.0, 1.0))
        return out
    if len(H) != len(sizes):
        raise ParameterError("need one scaling matrix per block")
    for Hi, sz in zip(H, sizes):
        if Hi is None:
            out.append((None, 1.0, 1.0))
            continue
        Hi = np.asarray(Hi, dtype=float)
        if Hi.shape != (sz, sz):
            raise ParameterError("scaling matrix shape does not match block size")
        eig = np.linalg.eigvalsh(0.5 * (Hi + Hi.T))
        floor = float(eig.min())
        if floor <= 0:
            raise ParameterError("scaling matrices must be uniformly positive definite")
        out.append((Hi, floor, float(eig.max())))
    return out


def block_convex_objective(objective: Smooth, blocks, tau, y, H=None,
                           jointly_convex: bool = False,
                           strongly_convex_modulus: float = 0.0,
                           block_values: Optional[Sequence[Smooth]] = None) -> SurrogateObjective:
    """Model exploiting per-block (or joint) convexity of the objective.

    Default mode freezes the other blocks at the anchor:
    ``model_i(x_i) = U(x_i, y_{-i}) + (tau_i/2)(x_i-y_i)^T H_i (x_i-y_i)``,
    valid when ``U`` is convex in each block separately.  With
    ``jointly_convex=True`` the model is ``U(x) + sum_i (tau_i/2)||x_i-y_i||^2``
    instead (per-block components require ``block_values`` summing to ``U``).

    ``tau_i = 0`` is allowed only when ``strongly_convex_modulus`` declares
    the convexity the model inherits from ``U`` itself.
    """
    y = np.asarray(y, dtype=float)
    sizes, offsets = _normalize_blocks(blocks, y.size)
    nb = len(sizes)
    taus = _per_block_tau(tau, nb)
    if np.any(taus < 0):
        raise ParameterError("proximal weights must be nonnegative")
    if strongly_convex_modulus < 0:
        raise ParameterError("strong-convexity modulus must be nonnegative")
    Hinfo = _resolve_H(H, sizes)
    floors = np.array([t * fl for t, (_, fl, _) in zip(taus, Hinfo)])
    c = float(floors.min()) + float(strongly_convex_modulus)
    if c <= 0:
        raise ParameterError("tau = 0 requires a declared strong-convexity modulus")

    def prox_term(x):
        out = 0.0
        for t, sz, off, (Hi, _, _) in zip(taus, sizes, offsets, Hinfo):
            if t == 0:
                continue
            d = x[off:off + sz] - y[off:off + sz]
            out += 0.5 * t * float(d @ d) if Hi is None else 0.5 * t * float(d @ (Hi @ d))
        return out

    def prox_grad(x):
        g = np.zeros_like(x)
        for t, sz, off, (Hi, _, _) in zip(taus, sizes, offsets, Hinfo):
            if t == 0:
                continue
            d = x[off:off + sz] - y[off:off + sz]
            g[off:off + sz] = t * d if Hi is None else t * (Hi @ d)
        return g

    if jointly_convex:
        def value(x):
            return float(objective.value(x)) + prox_term(x)

        def grad(x):
            return np.asarray(objective.grad(x), dtype=float) + prox_grad(x)

        comps = None
        separable = False
        if block_values is not None:
            if len(block_values) != nb:
                raise ParameterError("need one objective component per block")
            comps = []
            for part, t, sz, off, (Hi, fl, _) in zip(block_values, taus, sizes, offsets, Hinfo):
                yi = y[off:off + sz]

                def bval(xi, part=part, yi=yi, t=t, Hi=Hi):
                    d = xi - yi
                    q = 0.0 if t == 0 else (0.5 * t * float(d @ d) if Hi is None
                                            else 0.5 * t * float(d @ (Hi @ d)))
                    return float(part.value(xi)) + q

                def bgrad(xi, part=part, yi=yi, t=t, Hi=Hi):
                    d = xi - yi
                    q = 0.0 if t == 0 else (t * d if Hi is None else t * (Hi @ d))
                    return np.asarray(part.grad(xi), dtype=float) + q

                pc = part.curvature if part.curvature is not None else 0.0
                comps.append(BlockComponent(
                    bval, bgrad, curvature=pc + float(t),
                    strong_convexity=float(t) * fl + strongly_convex_modulus))
            comps = tuple(comps)
            separable = True
        curv = None
        if objective.curvature is not None:
            curv = objective.curvature + float(taus.max(initial=0.0))
        return SurrogateObjective(y, value, grad, strong_convexity=c,
                                  curvature=curv, separable=separable,
                                  per_block_components=comps)

    # Per-block convexity mode: freeze the other blocks at the anchor.
    def embed(i, xi):
        full = y.copy()
        full[offsets[i]:offsets[i] + sizes[i]] = xi
        return full

    comps = []
    for i, (t, sz, off, (Hi, fl, _)) in enumerate(zip(taus, sizes, offsets, Hinfo)):
        yi = y[off:off + sz]

        def bval(xi, i=i, yi=yi, t=t, Hi=Hi):
            d = xi - yi
            q = 0.0 if t == 0 else (0.5 * t * float(d @ d) if Hi is None
                                    else 0.5 * t * float(d @ (Hi @ d)))
            return float(objective.value(embed(i, xi))) + q

        def bgrad(xi, i=i, yi=yi, t=t, Hi=Hi, off=off, sz=sz):
            d = xi - yi
            q = 0.0 if t == 0 else (t * d if Hi is None else t * (Hi @ d))
            gfull = np.asarray(objective.grad(embed(i, xi)), dtype=float)
            return gfull[off:off + sz] + q

        bc = objective.curvature if objective.curvature is not None else 0.0
        comps.append(BlockComponent(
            bval, bgrad, curvature=bc + float(t),
            strong_convexity=float(t) * fl + strongly_convex_modulus))
    comps = tuple(comps)

    def value(x):
        return sum(comp.value(x[off:off + sz])
                   for comp, sz, off in zip(comps, sizes, offsets))

    def grad(x):
        return np.concatenate([np.atleast_1d(comp.grad(x[off:off + sz]))
                               for comp, sz, off in zip(comps, sizes, offsets)])

    curv = None
    if objective.curvature is not None:
        curv = objective.curvature + float(taus.max(initial=0.0))
    return SurrogateObjective(y, value, grad, strong_convexity=c,
                              curvature=curv, separable=True,
                              per_block_components=comps)


def sum_utility_objective(utilities: Sequence[Smooth], convex_in, blocks, tau, y,
                          H=None) -> SurrogateObjective:
    """Model for a sum of agent utilities, preserving declared convex parts.

    ``convex_in[i]`` lists the utility indices that are convex in block
    ``i``; those are kept with the other blocks frozen at the anchor, the
    rest are linearized:

    ``model_i(x_i) = sum_{j in C_i} f_j(x_i, y_{-i})
    + sum_{k not in C_i} grad_i f_k(y)^T (x_i - y_i)
    + (tau_i/2)(x_i - y_i)^T H_i (x_i - y_i)``.
    """
    y = np.asarray(y, dtype=float)
    sizes, offsets = _normalize_blocks(blocks, y.size)
    nb = len(sizes)
    taus = _per_block_tau(tau, nb)
    if np.any(taus <= 0):
        raise ParameterError("proximal weights must be positive")
    Hinfo = _resolve_H(H, sizes)
    nutil = len(utilities)
    for i, idxs in enumerate(convex_in):
        for j in idxs:
            if not 0 <= j < nutil:
                raise ParameterError(f"utility index {j} out of range for block {i}")

    grads_at_anchor = [np.asarray(f.grad(y), dtype=float) for f in utilities]

    def embed(i, xi):
        full = y.copy()
        full[offsets[i]:offsets[i] + sizes[i]] = xi
        return full

    comps = []
    for i, (t, sz, off, (Hi, _, _)) in enumerate(zip(taus, sizes, offsets, Hinfo)):
        yi = y[off:off + sz]
        kept = tuple(sorted(set(convex_in[i])))
        linearized = tuple(j for j in range(nutil) if j not in kept)
        lin_grad = np.zeros(sz)
        for k in linearized:
            lin_grad = lin_grad + grads_at_anchor[k][off:off + sz]

        def bval(xi, i=i, yi=yi, t=t, Hi=Hi, kept=kept, lin_grad=lin_grad):
            d = xi - yi
            out = float(lin_grad @ d)
            full = embed(i, xi)
            for j in kept:
                out += float(utilities[j].value(full))
            out += 0.5 * t * float(d @ d) if Hi is None else 0.5 * t * float(d @ (Hi @ d))
            return out

        def bgrad(xi, i=i, yi=yi, t=t, Hi=Hi, kept=kept, lin_grad=lin_grad,
                  off=off, sz=sz):
            d = xi - yi
            g = lin_grad + (t * d if Hi is None else t * (Hi @ d))
            full = embed(i, xi)
            for j in kept:
                g = g + np.asarray(utilities[j].grad(full), dtype=float)[off:off + sz]
            return g

        kept_curv = sum((utilities[j].curvature or 0.0) for j in kept)
        floor_i = Hinfo[i][1]
        comps.append(BlockComponent(bval, bgrad, curvature=kept_curv + float(t),
                                    strong_convexity=float(t) * floor_i))
    comps = tuple(comps)

    def value(x):
        return sum(comp.value(x[off:off + sz])
                   for comp, sz, off in zip(comps, sizes, offsets))

    def grad(x):
        return np.concatenate([np.atleast_1d(comp.grad(x[off:off + sz]))
                               for comp, sz, off in zip(comps, sizes, offsets)])

    floors = np.array([t * fl for t, (_, fl, _) in zip(taus, Hinfo)])
    curv = max(comp.curvature for comp in comps)
    return SurrogateObjective(y, value, grad, strong_convexity=float(floors.min()),
                              curvature=curv, separable=True,
                              per_block_components=comps)


def product_objective(f1: Smooth, f2: Smooth, y, tau: float = 0.0, H=None,
                      case: str = "convex-positive",
                      inner1: Optional[SurrogateObjective] = None,
                      inner2: Optional[SurrogateObjective] = None,
                      strongly_convex_modulus: float = 0.0) -> SurrogateObjective:
    """Model for an objective that is a product of two factors.

    ``case="convex-positive"`` (both factors convex and positive):
    cross-freeze the factors, ``f1(x) f2(y) + f1(y) f2(x)``, plus an
    optional proximal term.  ``case="positive"`` (positive, possibly
    nonconvex factors): supply inner models via ``inner1`` / ``inner2``;
    the result is ``inner1(x) f2(y) + f1(y) inner2(x)``.
    ``case="general"``: supply models for the two scaled halves directly
    (``inner1`` approximating ``f1(.) f2(y)``, ``inner2`` approximating
    ``f1(y) f2(.)``) and they are summed.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if case == "convex-positive":
        f1y = float(f1.value(y))
        f2y = float(f2.value(y))
        if tau < 0:
            raise ParameterError("proximal weight must be nonnegative")
        Hinfo = _resolve_H(H, (n,)) if H is not None else [(None, 1.0, 1.0)]
        Hi, floor, hnorm = Hinfo[0]
        c = tau * floor + strongly_convex_modulus
        if c <= 0:
            raise ParameterError("tau = 0 requires a declared strong-convexity modulus")

        def value(x):
            d = x - y
            q = 0.0 if tau == 0 else (0.5 * tau * float(d @ d) if Hi is None
                                      else 0.5 * tau * float(d @ (Hi @ d)))
            return float(f1.value(x)) * f2y + f1y * float(f2.value(x)) + q

        def grad(x):
            d = x - y
            q = 0.0 if tau == 0 else (tau * d if Hi is None else tau * (Hi @ d))
            return f2y * np.asarray(f1.grad(x), dtype=float) \
                + f1y * np.asarray(f2.grad(x), dtype=float) + q

        curv = None
        if f1.curvature is not None and f2.curvature is not None:
            curv = abs(f2y) * f1.curvature + abs(f1y) * f2.curvature + tau * hnorm
        return SurrogateObjective(y, value, grad, strong_convexity=c, curvature=curv)

    if case == "positive":
        if inner1 is None or inner2 is None:
            raise ConfigurationError("positive-factor products need inner models "
                                     "for both factors")
        f1y = float(f1.value(y))
        f2y = float(f2.value(y))
        if f1y <= 0 or f2y <= 0:
            raise ConfigurationError("factors must be positive at the anchor")

        def value(x):
            return float(inner1.value(x)) * f2y + f1y * float(inner2.value(x))

        def grad(x):
            return f2y * np.asarray(inner1.grad(x), dtype=float) \
                + f1y * np.asarray(inner2.grad(x), dtype=float)

        c = f2y * inner1.strong_convexity + f1y * inner2.strong_convexity
        curv = None
        if inner1.curvature is not None and inner2.curvature is not None:
            curv = f2y * inner1.curvature + f1y * inner2.curvature
        return SurrogateObjective(y, value, grad, strong_convexity=c, curvature=curv)

    if case == "general":
        if inner1 is None or inner2 is None:
            raise ConfigurationError("general products need models for both "
                                     "scaled halves")

        def value(x):
            return float(inner1.value(x)) + float(inner2.value(x))

        def grad(x):
            return np.asarray(inner1.grad(x), dtype=float) \
                + np.asarray(inner2.grad(x), dtype=float)

        c = inner1.strong_convexity + inner2.strong_convexity
        curv = None
        if inner1.curvature is not None and inner2.curvature is not None:
            curv = inner1.curvature + inner2.curvature
        return SurrogateObjective(y, value, grad, strong_convexity=c, curvature=curv)

    raise ConfigurationError(f"unknown product case {case!r}")


# ---------------------------------------------------------------------------
# Empirical estimation helpers
# ---------------------------------------------------------------------------

def estimate_curvature(grad: Callable, cset: ConvexSet, samples: int = 256,
                       seed: int = 0, safety: float = 1.5) -> float:
    """Sampled bound on the gradient's Lipschitz constant over a set."""
    rng = np.random.default_rng(seed)
    pts = np.array([cset.sample(rng) for _ in range(samples)])
    grads = np.array([np.asarray(grad(p), dtype=float) for p in pts])
    du = pts[:, None, :] - pts[None, :, :]
    dg = grads[:, None, :] - grads[None, :, :]
    dist = np.linalg.norm(du, axis=-1)
    gdist = np.linalg.norm(dg, axis=-1)
    mask = dist > 1e-12
    ratio = np.where(mask, gdist / np.where(mask, dist, 1.0), 0.0)
    return safety * float(ratio.max()) if ratio.size else 0.0


def estimate_value_lipschitz(grad: Callable, cset: ConvexSet, samples: int = 256,
                             seed: int = 0, safety: float = 1.5) -> float:
    """Sampled bound on a function's Lipschitz constant (sup gradient norm)."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        x = cset.sample(rng)
        best = max(best, float(np.linalg.norm(np.asarray(grad(x), dtype=float))))
    return safety * best


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            mark = "pass" if c.passed else "FAIL"
            lines.append(f"{c.name:24s} {mark}  worst violation {c.worst:.3e}"
                         + (f"  ({c.detail})" if c.detail else ""))
        return "\n".join(lines)


#: Tolerances for the empirical model checks.
TANGENCY_VALUE_TOL = 1e-9
TANGENCY_GRAD_TOL = 1e-7
CONVEXITY_SLACK = 1e-10
UPPER_BOUND_SLACK = 1e-10
STRONG_CONVEXITY_SLACK = 1e-10
SEPARABILITY_TOL = 1e-12


def verify_surrogate(original: Smooth, surrogate, cset: ConvexSet,
                     samples: int = 10_000, seed: int = 0,
                     block_sizes: Optional[Sequence[int]] = None) -> VerificationReport:
    """Empirically check a model against its construction contracts.

    For a constraint model: value tangency at the anchor, gradient
    tangency, midpoint convexity along sampled segments, and the global
    upper-bound property over ``samples`` set points.  For an objective
    model: gradient tangency and the strong-monotonicity lower bound with
    the declared modulus.  When per-block components are present their sum
    is checked against the full model.  Failures are reported, never
    raised.
    """
    rng = np.random.default_rng(seed)
    y = np.asarray(surrogate.anchor, dtype=float)
    pts = [cset.sample(rng) for _ in range(samples)]
    checks: list[CheckResult] = []
    is_objective = isinstance(surrogate, SurrogateObjective)

    gy_model = np.asarray(surrogate.grad(y), dtype=float)
    gy_true = np.asarray(original.grad(y), dtype=float)
    gerr = float(np.linalg.norm(gy_model - gy_true))
    checks.append(CheckResult("gradient-tangency" if is_objective else "gradient-match",
                              gerr <= TANGENCY_GRAD_TOL, gerr))

    if not is_objective:
        verr = abs(float(surrogate.value(y)) - float(original.value(y)))
        checks.append(CheckResult("value-tangency", verr <= TANGENCY_VALUE_TOL, verr))

        worst_ub, where_ub = 0.0, None
        for x in pts:
            gap = float(original.value(x)) - float(surrogate.value(x))
            if gap > worst_ub:
                worst_ub, where_ub = gap, x
        checks.append(CheckResult("upper-bound", worst_ub <= UPPER_BOUND_SLACK, worst_ub,
                                  detail="" if where_ub is None else f"at {where_ub}"))

        worst_cvx = 0.0
        for u, v in zip(pts[0::2], pts[1::2]):
            mid = 0.5 * (u + v)
            viol = float(surrogate.value(mid)) \
                - 0.5 * (float(surrogate.value(u)) + float(surrogate.value(v)))
            worst_cvx = max(worst_cvx, viol)
        checks.append(CheckResult("midpoint-convexity", worst_cvx <= CONVEXITY_SLACK,
                                  worst_cvx))
    else:
        c = surrogate.strong_convexity
        worst_sc = 0.0
        for u, v in zip(pts[0::2], pts[1::2]):
            d = u - v
            dd = float(d @ d)
            if dd < 1e-20:
                continue
            inner = float(d @ (np.asarray(surrogate.grad(u), dtype=float)
                               - np.asarray(surrogate.grad(v), dtype=float)))
            viol = c * dd - inner
            worst_sc = max(worst_sc, viol)
        checks.append(CheckResult("strong-convexity", worst_sc <= STRONG_CONVEXITY_SLACK,
                                  worst_sc))

    comps = surrogate.per_block_components
    if comps is not None and block_sizes is not None:
        offsets, acc = [], 0
        for s in block_sizes:
            offsets.append(acc)
            acc += s
        worst_sep = 0.0
        for x in pts[:200]:
            total = sum(float(comp.value(x[o:o + s]))
                        for comp, s, o in zip(comps, block_sizes, offsets))
            worst_sep = max(worst_sep, abs(total - float(surrogate.value(x))))
        checks.append(CheckResult("separability", worst_sep <= SEPARABILITY_TOL, worst_sep))

    return VerificationReport(tuple(checks))
