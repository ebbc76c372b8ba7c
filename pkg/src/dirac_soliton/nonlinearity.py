"""Nonlinear remainder of the perturbation system and the pointwise
inequalities that control it.

With ``v = Q + e1`` and ``u = -Q' + e2`` the perturbation ``e`` solves
``L e = K(eps, e)`` where

    K1 = |v|^{2 theta} v - (2 theta + 1) Q^{2 theta} e1 - Q^{2 theta + 1}
         + (|v^2 - eps u^2|^theta - |v|^{2 theta}) v
    K2 = eps (1 + |v^2 - eps u^2|^theta) u

The ``*_ratio`` functions divide the left side of each inequality by its
right side with unit constants, so a finite supremum over a sweep is a
numerical witness for the existence of the constant.  They accept numpy
arrays and broadcast.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .ground_state import GroundState
from .linear_operator import FieldPair


@dataclass(frozen=True, eq=False)
class NonlinearContext:
    """``theta``, ``eps = m - omega`` (with m = 1/2) and the ground state."""

    theta: float
    epsilon: float
    gs: GroundState

    def __post_init__(self):
        if not (0.0 < self.theta < 2.0):
            raise ValueError("theta must lie in (0, 2)")
        if not (0.0 <= self.epsilon < 0.5):
            raise ValueError("epsilon = 1/2 - omega must lie in [0, 1/2)")
        if self.theta != self.gs.theta:
            raise ValueError("theta does not match the ground state")

    @property
    def omega(self) -> float:
        return 0.5 - self.epsilon


def eval_K(ctx: NonlinearContext, e: FieldPair) -> FieldPair:
    """Pointwise nonlinear remainder ``K(eps, e)``."""
    if not e.grid.same_as(ctx.gs.grid):
        raise ValueError("perturbation is not sampled on the ground-state grid")
    th = ctx.theta
    eps = ctx.epsilon
    Q = ctx.gs.Q.values
    e1, e2 = e.arrays()
    v = Q + e1
    u = -ctx.gs.Qprime.values + e2
    av = np.abs(v) ** (2.0 * th)
    cone = np.abs(v * v - eps * u * u) ** th
    aq = np.abs(Q) ** (2.0 * th)
    K1 = av * v - (2.0 * th + 1.0) * aq * e1 - aq * Q + (cone - av) * v
    K2 = eps * (1.0 + cone) * u
    return FieldPair.from_arrays(e.grid, K1, K2)


def K_jacobian(ctx: NonlinearContext, e: FieldPair):
    """Pointwise partial derivatives of ``K`` with respect to ``(e1, e2)``.

    Returns four arrays ``(dK1/de1, dK1/de2, dK2/de1, dK2/de2)``.  Requires
    ``theta >= 1`` so that ``|w|^theta`` is differentiable on the cone.
    """
    th = ctx.theta
    if th < 1.0:
        raise ValueError("K is not differentiable on the cancelation cone for theta < 1")
    eps = ctx.epsilon
    Q = ctx.gs.Q.values
    e1, e2 = e.arrays()
    v = Q + e1
    u = -ctx.gs.Qprime.values + e2
    w = v * v - eps * u * u
    S = np.abs(w) ** th
    dS = th * np.abs(w) ** (th - 1.0) * np.sign(w)
    Sv = 2.0 * v * dS
    Su = -2.0 * eps * u * dS
    k11 = S + v * Sv - (2.0 * th + 1.0) * np.abs(Q) ** (2.0 * th)
    k12 = v * Su
    k21 = eps * u * Sv
    k22 = eps * (1.0 + S) + eps * u * Su
    return k11, k12, k21, k22


# ---------------------------------------------------------------------------
# pointwise inequalities


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    num, den = np.broadcast_arrays(num, den)
    nz = den > 0.0
    out[nz] = num[nz] / den[nz]
    out[~nz & (num != 0.0)] = np.inf
    return out[()] if out.ndim == 0 else out


def _pow(x, p):
    """|x|^p; a negative power of 0 is +inf, which sends the ratio to 0."""
    with np.errstate(divide="ignore"):
        return np.abs(np.asarray(x, dtype=float)) ** p


def _pow_step(x, d, p):
    """``|x + d|^p - |x|^p`` without cancellation when ``d`` is small.

    Where ``|d| <= |x| / 2`` the difference is written as
    ``|x|^p expm1(p log1p(d / x))``.
    """
    x, d = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(d, dtype=float))
    direct = np.abs(x + d) ** p - np.abs(x) ** p
    same = (x * (x + d) > 0.0) & (np.abs(d) <= 0.5 * np.abs(x))
    t = np.where(same, d / np.where(same, x, 1.0), 0.0)
    fine = np.abs(x) ** p * np.expm1(p * np.log1p(t))
    return np.where(same, fine, direct)


def _taylor_remainder(a, s, theta):
    """``g(a+s) - g(a) - g'(a) s`` for ``g(t) = |t|^{2 theta} t``."""
    a, s = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(s, dtype=float))
    p = 2.0 * theta + 1.0
    ga = np.abs(a) ** (2.0 * theta) * a
    b = a + s
    direct = np.abs(b) ** (2.0 * theta) * b - ga - p * np.abs(a) ** (2.0 * theta) * s
    # away from |s| << |a| the direct form has no cancellation, and the
    # rewritten one would overflow for tiny a
    same = (a * b > 0.0) & (np.abs(s) <= 0.5 * np.abs(a))
    t = np.where(same, s / np.where(same, a, 1.0), 0.0)
    # (1 + t)^p - 1 - p t, with relative error ~ 1e-16 / |t|
    fine = ga * (np.expm1(p * np.log1p(t)) - p * t)
    return np.where(same, fine, direct)


def taylor_ratio(a, sigma, theta, drop_c1: bool | None = None):
    """Taylor remainder of ``g(t) = |t|^{2 theta} t`` against its bound.

    Returns ``|g(a+s) - g(a) - (2 theta + 1)|a|^{2 theta} s|`` divided by
    ``(|a|^{2 theta - 1} + |s|^{2 theta - 1}) s^2``.  With ``drop_c1`` (the
    default for ``theta <= 1/2``) the ``|a|`` term is left out of the bound.
    A zero numerator over a zero bound gives 0.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if drop_c1 is None:
        drop_c1 = theta <= 0.5
    s = np.asarray(sigma, dtype=float)
    num = np.abs(_taylor_remainder(a, s, theta))
    q = 2.0 * theta - 1.0
    bound = _pow(s, q)
    if not drop_c1:
        bound = bound + _pow(a, q)
    with np.errstate(invalid="ignore"):
        # inf * 0 at s = 0 when theta < 1/2; the numerator is 0 there too
        return _safe_ratio(num, bound * s * s)


def power_difference_ratio(a, b, theta, drop_c1: bool | None = None):
    """``||a - b|^theta - |a|^theta|`` against ``|a|^{theta-1}|b| + |b|^theta``.

    The first term of the bound is dropped for ``theta <= 1`` unless
    ``drop_c1`` says otherwise.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if drop_c1 is None:
        drop_c1 = theta <= 1.0
    b = np.asarray(b, dtype=float)
    num = np.abs(_pow_step(a, -b, theta))
    bound = np.abs(b) ** theta
    if not drop_c1:
        bound = bound + _pow(a, theta - 1.0) * np.abs(b)
    return _safe_ratio(num, bound)


def second_difference_numerator(a, b, c, theta):
    """``|a+b+c|^theta - |a+b|^theta - |a+c|^theta + |a|^theta``.

    Grouped as two increments in ``b`` so that it is exactly zero when ``b``
    or ``c`` is.  For ``theta = 1`` only sums and absolute values are used,
    which keeps dyadic inputs exact.
    """
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    if theta == 1.0:
        return (np.abs(a + c + b) - np.abs(a + c)) - (np.abs(a + b) - np.abs(a))
    return _pow_step(a + c, b, theta) - _pow_step(a, b, theta)


def second_difference_ratio(a, b, c, theta):
    """Second mixed difference of ``|t|^theta`` against its bound.

    The bound ``(|c|^{theta-1} + |b|^{theta-1}) |b|`` holds with the roles of
    ``b`` and ``c`` exchanged as well, so the smaller of the two is used.
    """
    if not (1.0 <= theta < 2.0):
        raise ValueError("the mixed-difference bound needs 1 <= theta < 2")
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    num = np.abs(second_difference_numerator(a, b, c, theta))
    q = theta - 1.0
    bound = (_pow(b, q) + _pow(c, q)) * np.minimum(np.abs(b), np.abs(c))
    return _safe_ratio(num, bound)


def second_difference_zero_cases(extent: float = 5.0, step: float = 0.125) -> tuple[int, float]:
    """Check the vanishing region of the mixed difference at ``theta = 1``.

    On a dyadic lattice of ``[-extent, extent]^3`` selects the points with
    ``|a| >= 5 max(|b|, |c|)`` and ``a != 0`` (then ``a + b``, ``a + c`` and
    ``a + b + c`` all share the sign of ``a``) and returns their number and
    the largest absolute numerator, which should be exactly 0.
    """
    axis = np.arange(-extent, extent + step / 2, step)
    a, b, c = np.meshgrid(axis, axis, axis, indexing="ij", sparse=True)
    region = (np.abs(a) >= 5.0 * np.maximum(np.abs(b), np.abs(c))) & (a != 0.0)
    region = np.broadcast_to(region, (axis.size,) * 3)
    num = np.broadcast_to(second_difference_numerator(a, b, c, 1.0), region.shape)
    hits = np.abs(num[region])
    return int(hits.size), float(hits.max()) if hits.size else 0.0


def counterexample_ratio(
    epsilon: float, alpha: float, theta: float, gs: GroundState, r0: float
) -> float:
    """``|E(e1, f1)| / |e1 - f1|`` at ``r0`` for the near-cone ansatz.

    ``e2 = f2 = 0`` and ``Q + e1 = h (1 + s)``, ``Q + f1 = h`` at ``r0`` with
    ``h = sqrt(eps) |Q'(r0)|`` and ``s = eps^alpha``.  The difference ``E`` is
    evaluated from its definition; for ``theta < 1`` and large ``alpha`` the
    ratio grows without bound as ``eps -> 0``.
    """
    if not (0.0 < theta < 1.0):
        raise ValueError("the counterexample concerns 0 < theta < 1")
    if gs.theta != theta:
        raise ValueError("theta does not match the ground state")
    if epsilon < 0.0 or alpha <= 0.0:
        raise ValueError("need epsilon >= 0 and alpha > 0")
    r = gs.grid.nodes
    if not (r[0] <= r0 <= r[-1]):
        raise ValueError(f"r0={r0} outside the ground-state grid")
    if epsilon == 0.0:
        return 0.0
    dq = float(PchipInterpolator(r, gs.Qprime.values)(r0))
    h = math.sqrt(epsilon) * abs(dq)
    s = epsilon**alpha
    if s == 0.0 or h == 0.0:
        return 0.0
    ve, vf = h * (1.0 + s), h
    # eps Q'(r0)^2, written as h*h so that |vf^2 - cross| is exactly zero;
    # rounding there would otherwise be amplified by the theta-th power
    cross = h * h
    E = (
        abs(ve * ve - cross) ** theta
        - abs(ve) ** (2 * theta)
        - abs(vf * vf - cross) ** theta
        + abs(vf) ** (2 * theta)
    ) * vf
    return abs(E) / (ve - vf)


def counterexample_closed_form(epsilon, alpha, theta, qprime_r0):
    """``(g(s)/s) h^{2 theta}`` with ``g(s) = (s^2+2s)^theta - ((1+s)^{2 theta} - 1)``."""
    s = epsilon**alpha
    h = math.sqrt(epsilon) * abs(qprime_r0)
    if s == 0.0:
        return 0.0
    g = (s * s + 2 * s) ** theta - math.expm1(2 * theta * math.log1p(s))
    return g / s * h ** (2 * theta)


@dataclass(frozen=True)
class CounterexampleScan:
    theta: float
    alpha: float
    r0: float
    epsilons: tuple[float, ...]
    ratios: tuple[float, ...]
    slope: float

    @property
    def predicted_slope(self) -> float:
        """Exponent ``theta + alpha (theta - 1)`` of the ratio in ``eps``."""
        return self.theta + self.alpha * (self.theta - 1.0)


def counterexample_scan(
    theta: float, alpha: float, gs: GroundState, epsilons, r0: float = 5.0
) -> CounterexampleScan:
    """Evaluate :func:`counterexample_ratio` over ``epsilons`` and fit the
    log-log slope of ratio against ``eps``."""
    eps = [float(e) for e in epsilons]
    if len(eps) < 2 or min(eps) <= 0.0:
        raise ValueError("need at least two positive epsilons")
    ratios = [counterexample_ratio(e, alpha, theta, gs, r0) for e in eps]
    slope = float(np.polyfit(np.log(eps), np.log(ratios), 1)[0])
    return CounterexampleScan(float(theta), float(alpha), float(r0), tuple(eps), tuple(ratios), slope)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepResult:
    lemma: str
    theta: float
    extent: float
    points_per_axis: int
    n_points: int
    max_ratio: float
    argmax: tuple[float, ...]


_LEMMAS: dict[str, tuple[int, Callable]] = {
    "taylor": (2, taylor_ratio),
    "power-difference": (2, power_difference_ratio),
    "second-difference": (3, second_difference_ratio),
}


CLUSTER_DEPTH = 1e-6


def sweep_axis(extent: float, points: int) -> np.ndarray:
    """Sample points on ``[-extent, extent]``, half uniform and half clustered
    geometrically toward 0 (down to ``CLUSTER_DEPTH * extent``).

    The ratios approach their suprema in degenerate limits (a vanishing
    increment), which a uniform axis resolves only slowly.  Refining the
    axis keeps both ends of the geometric part fixed.
    """
    if points < 5:
        raise ValueError("a sweep axis needs at least 5 points")
    n_geo = points // 4
    n_uni = points - 2 * n_geo
    geo = extent * np.geomspace(CLUSTER_DEPTH, 1.0, n_geo + 1)[:-1]
    uni = np.linspace(-extent, extent, n_uni)
    return np.sort(np.concatenate((-geo, geo, uni)))


def lemma_sweep(lemma: str, theta: float, extent: float, points_per_axis: int) -> SweepResult:
    """Maximum of a lemma ratio over the cube ``[-extent, extent]^d``."""
    dim, fn = _LEMMAS[lemma]
    axis = sweep_axis(extent, points_per_axis)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij", sparse=True)
    ratio = fn(*mesh, theta)
    ratio = np.broadcast_to(ratio, (points_per_axis,) * dim)
    k = int(np.argmax(ratio))
    idx = np.unravel_index(k, ratio.shape)
    return SweepResult(
        lemma,
        float(theta),
        float(extent),
        int(points_per_axis),
        int(ratio.size),
        float(ratio[idx]),
        tuple(float(axis[i]) for i in idx),
    )


def sweeps_to_csv(results: list[SweepResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lemma", "theta", "extent", "points_per_axis", "n_points", "max_ratio", "argmax"])
    for res in results:
        w.writerow(
            [
                res.lemma,
                format(res.theta, ".17g"),
                format(res.extent, ".17g"),
                res.points_per_axis,
                res.n_points,
                format(res.max_ratio, ".17g"),
                " ".join(format(x, ".17g") for x in res.argmax),
            ]
        )
    return buf.getvalue()
