"""Positive radial ground state of -Q'' - (2/r) Q' + Q = Q^{2 theta + 1}.

The profile is found by shooting on Q(0) with bisection.  Trajectories that
cross zero started too high (overshoot); trajectories that turn back up
before reaching zero started too low (undershoot).  In double precision the
bisected trajectory follows the ground state only out to r ~ 10-18, after
which it peels off along the growing mode; beyond that point the profile is
continued by its exact linear tail ``A exp(-r) / r``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BracketError, ConvergenceError, TruncationWarning
from .radial_core import (
    RadialField,
    RadialGrid,
    derivative_matrix,
    integrate_radial,
    write_columns_csv,
)

THETA_MAX = 2.0
SPLIT_TOLERANCE = 1e-8
TAIL_LIMIT = 1e-6
# the series is evaluated at r_1 / START_FRACTION and integrated out to r_1
START_FRACTION = 16.0


@dataclass(frozen=True, eq=False)
class GroundState:
    theta: float
    Q: RadialField
    Qprime: RadialField
    shoot_param: float
    splice_radius: float = math.inf
    bisection_steps: int = 0

    @property
    def grid(self) -> RadialGrid:
        return self.Q.grid

    @property
    def power(self) -> float:
        return 2.0 * self.theta + 1.0

    def to_csv(self) -> str:
        return write_columns_csv(
            {"r": self.grid.nodes, "Q": self.Q.values, "Qprime": self.Qprime.values}
        )

    def header(self, residual: float | None = None) -> dict:
        return {"theta": self.theta, "shoot_param": self.shoot_param, "residual": residual}

    def scaled(self, factor: float) -> "GroundState":
        """Same profile multiplied by ``factor`` (no longer a solution)."""
        return GroundState(
            self.theta,
            self.Q.with_values(factor * self.Q.values),
            self.Qprime.with_values(factor * self.Qprime.values),
            factor * self.shoot_param,
            self.splice_radius,
            self.bisection_steps,
        )


def _series_start(q0: float, theta: float, r: float) -> tuple[float, float]:
    p = 2.0 * theta + 1.0
    a2 = (q0 - q0**p) / 6.0
    a4 = (1.0 - p * q0 ** (p - 1.0)) * a2 / 20.0
    return q0 + a2 * r * r + a4 * r**4, 2.0 * a2 * r + 4.0 * a4 * r**3


def _trajectory(q0, theta, nodes, substeps, stop):
    r0 = nodes[0] / START_FRACTION
    q_start, p_start = _series_start(q0, theta, r0)
    ext = np.concatenate(([r0], nodes))
    q, p, status, last = kernels.nls_trajectory(ext, q_start, p_start, theta, substeps, stop)
    return q[1:], p[1:], status, max(last - 1, 0)


def classify(q0: float, theta: float, grid: RadialGrid, substeps: int = 4) -> int:
    """+1 overshoot (crosses zero), -1 undershoot, 0 undecided on the grid."""
    return _trajectory(q0, theta, grid.nodes, substeps, True)[2]


def _auto_bracket(theta, grid, substeps):
    lo = 1.0 + 1e-3
    if classify(lo, theta, grid, substeps) != kernels.UNDERSHOOT:
        raise BracketError("lower end of the automatic bracket does not undershoot")
    hi = 2.0
    for _ in range(80):
        status = classify(hi, theta, grid, substeps)
        if status == kernels.OVERSHOOT:
            return lo, hi
        if status == kernels.UNDERSHOOT:
            lo = hi
        hi *= 2.0
    raise BracketError("no overshooting initial value found below 2^80")


def solve_ground_state(
    theta: float,
    grid: RadialGrid,
    tol: float = 1e-10,
    bracket: tuple[float, float] | None = None,
    substeps: int = 4,
    max_steps: int = 200,
) -> GroundState:
    """Shoot for the ground state on ``grid``.

    Parameters
    ----------
    theta : float
        Nonlinearity exponent, ``0 < theta < 2``.
    grid : RadialGrid
        Nodes on which Q and Q' are reported.  RK4 takes ``substeps`` steps
        per grid cell.
    tol : float
        Required width of the final bisection bracket on Q(0).  Bisection
        continues to the resolution limit of double precision regardless,
        because the usable length of the trajectory depends on it.
    bracket : (float, float), optional
        Initial (undershoot, overshoot) values of Q(0).

    Raises
    ------
    ValueError
        ``theta`` outside (0, 2) or non-positive ``tol``.
    BracketError
        The bracket does not straddle the ground state.
    ConvergenceError
        The bracket is still wider than ``tol`` after ``max_steps`` halvings.
    """
    if not (0.0 < theta < THETA_MAX):
        raise ValueError(
            f"theta={theta} outside the admissible range 0 < theta < 2 "
            "where a positive ground state exists"
        )
    if not (tol > 0.0):
        raise ValueError("tol must be positive")

    nodes = grid.nodes
    if bracket is None:
        lo, hi = _auto_bracket(theta, grid, substeps)
    else:
        lo, hi = map(float, bracket)
        if classify(lo, theta, grid, substeps) != kernels.UNDERSHOOT or classify(
            hi, theta, grid, substeps
        ) != kernels.OVERSHOOT:
            raise BracketError(f"bracket [{lo}, {hi}] does not straddle the ground state")

    steps = 0
    undecided = None
    while steps < max_steps:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        status = classify(mid, theta, grid, substeps)
        steps += 1
        if status == kernels.OVERSHOOT:
            hi = mid
        elif status == kernels.UNDERSHOOT:
            lo = mid
        else:
            undecided = mid
            break
    if hi - lo > tol and undecided is None:
        raise ConvergenceError(
            f"bisection bracket width {hi - lo:.3e} > tol after {steps} steps",
            stage="ground-state",
        )

    q0 = undecided if undecided is not None else 0.5 * (lo + hi)
    if undecided is not None:
        Q, P, _, _ = _trajectory(q0, theta, nodes, substeps, False)
        split = nodes.size
    else:
        q_lo, p_lo, _, _ = _trajectory(lo, theta, nodes, substeps, False)
        q_hi, p_hi, _, _ = _trajectory(hi, theta, nodes, substeps, False)
        Q = 0.5 * (q_lo + q_hi)
        P = 0.5 * (p_lo + p_hi)
        apart = np.abs(q_lo - q_hi) > SPLIT_TOLERANCE * np.abs(Q)
        split = int(np.argmax(apart)) if apart.any() else nodes.size

    splice_radius = math.inf
    if split < nodes.size:
        rc = nodes[split]
        amp = Q[split] * rc * math.exp(rc)
        r_tail = nodes[split:]
        decay = np.exp(-r_tail)
        Q = Q.copy()
        P = P.copy()
        Q[split:] = amp * decay / r_tail
        P[split:] = -amp * decay * (1.0 / r_tail + 1.0 / r_tail**2)
        splice_radius = float(rc)

    if Q[-1] >= TAIL_LIMIT:
        warnings.warn(
            f"ground state is {Q[-1]:.2e} at r_max={grid.r_max}; enlarge the grid",
            TruncationWarning,
            stacklevel=2,
        )
    return GroundState(
        float(theta),
        RadialField(grid, Q),
        RadialField(grid, P),
        float(q0),
        splice_radius,
        steps,
    )


def ode_residual(gs: GroundState, accuracy: int = 6) -> np.ndarray:
    """Pointwise Q'' + (2/r) Q' - Q + Q^{2 theta + 1} on the grid.

    Q'' is obtained by differentiating the stored Q' (odd about the origin)
    with centered stencils of the given order.
    """
    r = gs.grid.nodes
    D = derivative_matrix(gs.grid, 1, accuracy, "odd", "one-sided")
    Q = gs.Q.values
    P = gs.Qprime.values
    return D @ P + 2.0 * P / r - Q + np.abs(Q) ** (2.0 * gs.theta) * Q


def residual_norm(gs: GroundState, accuracy: int = 6) -> float:
    """L-infinity of :func:`ode_residual` over interior nodes."""
    res = ode_residual(gs, accuracy)
    return float(np.max(np.abs(res[: -(accuracy // 2)])))


def pohozaev_residuals(gs: GroundState) -> tuple[float, float]:
    """Relative residuals of the two integral identities of the ground state.

    Returns ``(I1, I2) / int Q^{2 theta + 2}`` with

    * ``I1 = int |Q'|^2 + int Q^2 - int Q^{2 theta + 2}``
    * ``I2 = 1/2 int |Q'|^2 + 3/2 int Q^2 - 3 / (2 theta + 2) int Q^{2 theta + 2}``
    """
    Q = gs.Q.values
    grad = integrate_radial(gs.Qprime.with_values(gs.Qprime.values**2))
    mass = integrate_radial(gs.Q.with_values(Q**2))
    top = 2.0 * gs.theta + 2.0
    pot = integrate_radial(gs.Q.with_values(np.abs(Q) ** top))
    if pot == 0.0:
        raise ValueError("Pohozaev residuals are undefined for a vanishing profile")
    r1 = (grad + mass - pot) / pot
    r2 = (0.5 * grad + 1.5 * mass - 3.0 / top * pot) / pot
    return float(r1), float(r2)
