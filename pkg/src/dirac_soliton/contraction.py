"""Picard iteration ``e <- L^{-1} K(eps, e)`` and continuation in ``eps``."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    BallEscapeError,
    DivergenceError,
    MaxIterError,
    SingularOperatorError,
    SolverError,
)
from .ground_state import GroundState, solve_ground_state
from .linear_operator import FieldPair, LinearizedOp, apply_L, invert_L
from .nonlinearity import K_jacobian, NonlinearContext, eval_K
from .radial_core import L4, W14, RadialField, RadialGrid

# successive differences below this multiple of machine precision (relative
# to the iterate) carry no information about the contraction factor
NOISE_FLOOR = 1e3 * np.finfo(float).eps
TAIL_RATIOS = 5
GROWTH_LIMIT = 3
# a map contracting with factor q maps the ball of radius ||T(0)|| / (1 - q)
# into itself; q = 3/4 gives the factor 4
BALL_FACTOR = 4.0


def default_delta(epsilon: float, first_step: float = 0.0) -> float:
    """Ball radius ``max(0.1, 50 eps, 4 ||L^{-1} K(eps, 0)||_{W^{1,4}})``."""
    return max(0.1, 50.0 * epsilon, BALL_FACTOR * first_step)


@dataclass(frozen=True)
class ContractionConfig:
    """Stopping rule and trust ball for the fixed-point iteration.

    ``delta=None`` selects :func:`default_delta` for each solve.
    ``iteration`` is ``'picard'`` (the contraction map itself) or
    ``'newton'`` (same fixed point, used where Picard does not contract).
    ``method`` picks the inverse of ``L`` used by Picard.
    """

    tol: float = 1e-12
    max_iter: int = 200
    delta: Optional[float] = None
    warm_start: Optional["PerturbationPair"] = None
    method: str = "banded"
    iteration: str = "picard"

    def __post_init__(self):
        if not (self.tol > 0.0):
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.delta is not None and not (self.delta > 0.0):
            raise ValueError("delta must be positive")
        if self.iteration not in ("picard", "newton"):
            raise ValueError(f"unknown iteration {self.iteration!r}")

    def with_warm_start(self, warm: Optional["PerturbationPair"]) -> "ContractionConfig":
        return ContractionConfig(
            self.tol, self.max_iter, self.delta, warm, self.method, self.iteration
        )


@dataclass(frozen=True, eq=False)
class PerturbationPair:
    """Correction ``(e1, e2)`` to the rescaled ground-state pair ``(Q, -Q')``."""

    e1: RadialField
    e2: RadialField
    epsilon: float
    theta: float
    w14_norm: float

    @classmethod
    def from_pair(cls, pair: FieldPair, epsilon: float, theta: float) -> "PerturbationPair":
        return cls(pair.first, pair.second, float(epsilon), float(theta), pair.norm(W14))

    @property
    def pair(self) -> FieldPair:
        return FieldPair(self.e1, self.e2)

    @property
    def grid(self) -> RadialGrid:
        return self.e1.grid

    def to_csv(self) -> str:
        return self.pair.to_csv(("e1", "e2"))


@dataclass(frozen=True, eq=False)
class BranchPoint:
    epsilon: float
    pair: PerturbationPair
    iterations: int
    final_residual: float
    contraction_factor: float = math.nan
    differences: tuple[float, ...] = field(default=(), repr=False)

    def record(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "theta": self.pair.theta,
            "iterations": self.iterations,
            "residual": self.final_residual,
            "w14_norm": self.pair.w14_norm,
            "contraction_factor": None
            if math.isnan(self.contraction_factor)
            else self.contraction_factor,
        }


def contraction_factor(differences: Sequence[float], scale: float) -> float:
    """Largest of the last few ratios of successive differences.

    Ratios involving a difference at the rounding level are discarded.
    """
    d = np.asarray(differences, dtype=float)
    floor = NOISE_FLOOR * max(scale, np.finfo(float).tiny)
    ratios = [d[k + 1] / d[k] for k in range(d.size - 1) if d[k + 1] > floor and d[k] > floor]
    if not ratios:
        return math.nan
    return float(max(ratios[-TAIL_RATIOS:]))


def _ball_radius(ctx, op, cfg) -> float:
    if cfg.delta is not None:
        return cfg.delta
    first = invert_L(op, eval_K(ctx, FieldPair.zeros(op.grid)), cfg.method)
    return default_delta(ctx.epsilon, first.norm(W14))


def _check_ball(e: FieldPair, delta: float, it: int, eps: float):
    size = e.norm(W14)
    if not math.isfinite(size) or size > delta:
        raise BallEscapeError(
            f"iterate {it} has W^{{1,4}} norm {size:.3e} > delta={delta:.3e} at eps={eps:g}",
            iteration=it,
            norm=size,
            delta=delta,
        )


def fixed_point_solve(
    ctx: NonlinearContext, op: LinearizedOp, cfg: ContractionConfig = ContractionConfig()
) -> BranchPoint:
    """Solve ``e = L^{-1} K(eps, e)``.

    With ``cfg.iteration='picard'`` the map is iterated until successive
    iterates differ by at most ``cfg.tol`` in the sup norm, starting from
    ``cfg.warm_start`` or zero.

    Raises
    ------
    BallEscapeError
        An iterate left the ball ``||e||_{W^{1,4}} <= delta``.
    DivergenceError
        Successive differences grew three times in a row.
    MaxIterError
        ``cfg.max_iter`` iterations without meeting ``cfg.tol``.
    """
    if ctx.gs is not op.gs:
        if not ctx.gs.grid.same_as(op.grid) or ctx.theta != op.theta:
            raise ValueError("context and operator refer to different ground states")
    grid = op.grid
    eps = ctx.epsilon
    delta = _ball_radius(ctx, op, cfg)
    if cfg.warm_start is not None:
        e = cfg.warm_start.pair
        if not e.grid.same_as(grid):
            raise ValueError("warm start is sampled on a different grid")
    else:
        e = FieldPair.zeros(grid)
    step = _newton_step if cfg.iteration == "newton" else _picard_step

    diffs: list[float] = []
    growth = 0
    for it in range(1, cfg.max_iter + 1):
        new = step(ctx, op, e, cfg.method)
        _check_ball(new, delta, it, eps)
        diff = (new - e).sup()
        if diffs and diff > diffs[-1]:
            growth += 1
        else:
            growth = 0
        diffs.append(diff)
        e = new
        if diff <= cfg.tol:
            rate = contraction_factor(diffs, e.sup()) if cfg.iteration == "picard" else math.nan
            return BranchPoint(
                eps,
                PerturbationPair.from_pair(e, eps, ctx.theta),
                it,
                diff,
                rate,
                tuple(diffs),
            )
        if growth >= GROWTH_LIMIT:
            raise DivergenceError(
                f"successive differences grew {GROWTH_LIMIT} times in a row at eps={eps:g}",
                iteration=it,
                differences=diffs,
            )
    raise MaxIterError(
        f"no convergence in {cfg.max_iter} iterations at eps={eps:g} "
        f"(last difference {diffs[-1]:.3e})",
        differences=diffs,
    )


def _picard_step(ctx, op, e, method):
    return invert_L(op, eval_K(ctx, e), method)


def _jacobian_blocks(ctx, e):
    k11, k12, k21, k22 = K_jacobian(ctx, e)
    return [[sp.diags(k11), sp.diags(k12)], [sp.diags(k21), sp.diags(k22)]]


def _newton_step(ctx, op, e, method):
    """One Newton step on ``L e - K(eps, e) = 0``."""
    J = op.matrix - op.interleave(_jacobian_blocks(ctx, e))
    res = apply_L(op, e) - eval_K(ctx, e)
    rhs = np.empty(2 * op.grid.n)
    rhs[0::2], rhs[1::2] = res.arrays()
    try:
        dx = spla.spsolve(J.tocsc(), rhs)
    except RuntimeError as exc:
        raise SingularOperatorError(f"Newton matrix is singular ({exc})", stage="newton") from exc
    if not np.all(np.isfinite(dx)):
        raise SingularOperatorError("Newton step is not finite", stage="newton")
    e1, e2 = e.arrays()
    return FieldPair.from_arrays(op.grid, e1 - dx[0::2], e2 - dx[1::2])


def picard_rate(ctx: NonlinearContext, op: LinearizedOp, pair: PerturbationPair) -> float:
    """Spectral radius of the linearized Picard map ``L^{-1} DK`` at ``pair``.

    Picard converges locally when this is below 1; it is the asymptotic
    ratio of successive differences.
    """
    n = op.grid.n
    DK = op.interleave(_jacobian_blocks(ctx, pair.pair)).tocsr()
    lu = op._lu
    T = spla.LinearOperator((2 * n, 2 * n), matvec=lambda x: lu.solve(DK @ np.ravel(x)), dtype=float)
    vals = spla.eigs(T, k=1, which="LM", return_eigenvectors=False, v0=np.ones(2 * n), tol=1e-8)
    return float(np.abs(vals[0]))


def fixed_point_residual(ctx: NonlinearContext, op: LinearizedOp, pair: PerturbationPair) -> float:
    """``||L e - K(eps, e)||_{L^4}``, evaluated with ``apply_L`` only."""
    e = pair.pair
    res = apply_L(op, e) - eval_K(ctx, e)
    return res.norm(L4)


def continuation_sweep(
    thetas: Sequence[float],
    epsilons: Sequence[float],
    cfg: ContractionConfig = ContractionConfig(),
    grid: Optional[RadialGrid] = None,
    ground_states: Optional[dict] = None,
) -> list[BranchPoint]:
    """Follow the branch ``eps -> e(eps)`` for each ``theta``.

    The largest ``eps`` is solved from the zero start and every later point
    is warm-started from its predecessor.  Points are returned grouped by
    ``theta`` in the order given.
    """
    eps_list = [float(x) for x in epsilons]
    if not eps_list:
        raise ValueError("the epsilon list is empty")
    if any(b > a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilons must be sorted in decreasing order")
    if grid is None and not ground_states:
        raise ValueError("provide a grid or precomputed ground states")
    out: list[BranchPoint] = []
    for theta in thetas:
        gs = (ground_states or {}).get(theta) or solve_ground_state(theta, grid)
        op = LinearizedOp(theta, gs)
        warm = None
        for eps in eps_list:
            ctx = NonlinearContext(theta, eps, gs)
            step_cfg = cfg.with_warm_start(warm)
            try:
                point = fixed_point_solve(ctx, op, step_cfg)
            except SolverError as exc:
                raise type(exc)(
                    f"continuation failed at theta={theta:g}, eps={eps:g}: {exc}",
                    stage=exc.stage,
                    epsilon=eps,
                    theta=theta,
                ) from exc
            out.append(point)
            warm = point.pair
    return out


def scaling_slope(points: Sequence[BranchPoint]) -> float:
    """Least-squares slope of ``log ||e||_{W^{1,4}}`` against ``log eps``."""
    pts = [p for p in points if p.epsilon > 0.0 and p.pair.w14_norm > 0.0]
    if len(pts) < 2:
        raise ValueError("a slope needs at least two points with eps > 0")
    x = np.log([p.epsilon for p in pts])
    y = np.log([p.pair.w14_norm for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def max_adjacent_gap(points: Sequence[BranchPoint]) -> float:
    """Largest sup-norm distance between consecutive branch points."""
    gaps = [(b.pair.pair - a.pair.pair).sup() for a, b in zip(points, points[1:])]
    return max(gaps) if gaps else 0.0


def admissible_epsilon(
    gs: GroundState, epsilons: Sequence[float], cfg: ContractionConfig = ContractionConfig()
) -> float:
    """Largest ``eps`` in the list for which the cold-started iteration converges.

    Returns 0 if none does.
    """
    op = LinearizedOp(gs.theta, gs)
    best = 0.0
    for eps in sorted(epsilons):
        try:
            fixed_point_solve(NonlinearContext(gs.theta, eps, gs), op, cfg)
        except SolverError:
            break
        best = eps
    return best


def branch_to_json(points: Sequence[BranchPoint], config: Optional[dict] = None) -> str:
    payload = {"config": config or {}, "points": [p.record() for p in points]}
    return json.dumps(payload, indent=2)
