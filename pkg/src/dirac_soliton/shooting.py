"""Direct shooting for localized solutions of the radial Dirac system

    f' + (2/r) f = (|g^2 - f^2|^theta - (m - omega)) g
    g'           = (|g^2 - f^2|^theta - (m + omega)) f

with ``m = 1/2``.  This is independent of the perturbative construction and
serves as its end-to-end check.  Only the ground-state-like branch (g > 0,
no nodes) is computed.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BracketError, ConvergenceError, TruncationWarning
from .radial_core import RadialField, RadialGrid, derivative_matrix, write_columns_csv

MASS = 0.5
SPLIT_TOLERANCE = 1e-8
BRACKET_WIDTH = 1e-12
TAIL_LIMIT = 1e-6
START_FRACTION = 16.0
RESIDUAL_ACCURACY = 4
SCAN_RATIO = 1.02
SCAN_STEPS = 600


@dataclass(frozen=True, eq=False)
class SpinorProfile:
    """Physical radial components ``(f, g)`` of a standing wave."""

    f: RadialField
    g: RadialField
    omega: float
    theta: float
    m: float = MASS
    splice_radius: float = math.inf

    def __post_init__(self):
        if not self.f.grid.same_as(self.g.grid):
            raise ValueError("f and g must share one grid")

    @property
    def grid(self) -> RadialGrid:
        return self.g.grid

    @property
    def epsilon(self) -> float:
        return self.m - self.omega

    @property
    def g0(self) -> float:
        """g at the origin, extrapolated from the first nodes (g is even)."""
        r = self.grid.nodes[:3]
        v = self.g.values[:3]
        c = np.polyfit(r * r, v, 2)
        return float(c[-1])

    def scaled(self, factor: float) -> "SpinorProfile":
        return SpinorProfile(
            self.f.with_values(factor * self.f.values),
            self.g.with_values(factor * self.g.values),
            self.omega,
            self.theta,
            self.m,
            self.splice_radius,
        )

    def to_csv(self) -> str:
        return write_columns_csv({"r": self.grid.nodes, "f": self.f.values, "g": self.g.values})

    def header(self, residual: float | None = None) -> dict:
        return {
            "omega": self.omega,
            "theta": self.theta,
            "g0": self.g0,
            "residual": residual,
        }

    def header_json(self, residual: float | None = None) -> str:
        return json.dumps(self.header(residual), indent=2)


def _series_start(g0: float, theta: float, eps: float, r: float) -> tuple[float, float]:
    """Taylor start ``f = c1 r + c3 r^3``, ``g = g0 + b2 r^2 + b4 r^4``."""
    s0 = g0 ** (2.0 * theta)
    mass_minus = eps
    mass_plus = 1.0 - eps
    c1 = (s0 - mass_minus) * g0 / 3.0
    b2 = (s0 - mass_plus) * c1 / 2.0
    # d/d(r^2) of |g^2 - f^2|^theta at the origin
    ds = theta * g0 ** (2.0 * theta - 2.0) * (2.0 * g0 * b2 - c1 * c1)
    c3 = (ds * g0 + (s0 - mass_minus) * b2) / 5.0
    b4 = ((s0 - mass_plus) * c3 + ds * c1) / 4.0
    r2 = r * r
    return c1 * r + c3 * r * r2, g0 + b2 * r2 + b4 * r2 * r2


def _trajectory(g0, theta, eps, nodes, substeps, stop):
    r0 = nodes[0] / START_FRACTION
    f_start, g_start = _series_start(g0, theta, eps, r0)
    ext = np.concatenate(([r0], nodes))
    f, g, status, last = kernels.dirac_trajectory(ext, f_start, g_start, theta, eps, substeps, stop)
    return f[1:], g[1:], status, max(last - 1, 0)


def classify(g0: float, theta: float, omega: float, grid: RadialGrid, substeps: int = 4) -> int:
    """+1 if g crosses zero (g0 too large), -1 if g rises after f turns
    negative or g grows past ten times g0 (g0 too small), 0 if undecided
    on the grid."""
    return _trajectory(g0, theta, MASS - omega, grid.nodes, substeps, True)[2]


def _auto_bracket(theta, omega, grid, substeps):
    eps = MASS - omega
    lo = 1.001 * eps ** (1.0 / (2.0 * theta))
    if classify(lo, theta, omega, grid, substeps) != kernels.UNDERSHOOT:
        raise BracketError("lower end of the automatic bracket does not undershoot")
    # the overshooting g(0) form a window that can be narrow (large g(0)
    # undershoots again), so the scan steps in small ratios
    hi = SCAN_RATIO * lo
    for _ in range(SCAN_STEPS):
        status = classify(hi, theta, omega, grid, substeps)
        if status == kernels.OVERSHOOT:
            return lo, hi
        if status == kernels.UNDERSHOOT:
            lo = hi
        hi *= SCAN_RATIO
    raise BracketError("geometric scan found no overshooting g(0)")


def shoot_dirac(
    omega: float,
    theta: float,
    grid: RadialGrid,
    tol: float = 1e-6,
    bracket: tuple[float, float] | None = None,
    guess: float | None = None,
    substeps: int = 4,
    max_steps: int = 200,
) -> SpinorProfile:
    """Find the positive localized solution by bisection on ``g(0)``.

    Parameters
    ----------
    omega : float
        Frequency, ``0 < omega < 1/2``.
    grid : RadialGrid
        Physical radial grid.  It should cover 20 to 30 decay lengths
        ``1/kappa`` with ``kappa = sqrt(eps (1 - eps))``, ``eps = 1/2 - omega``.
    tol : float
        Required ``dirac_residual`` of the result.  Bisection itself always
        runs to the resolution limit of double precision.
    bracket, guess : optional
        Explicit ``(undershoot, overshoot)`` bracket, or a predicted ``g(0)``
        (for example from the rescaled construction) around which a bracket
        is sought before falling back to a geometric scan.

    Raises
    ------
    ValueError
        ``omega`` outside ``(0, 1/2)``.
    BracketError, ConvergenceError
    """
    if not (0.0 < omega < MASS):
        raise ValueError(
            f"omega={omega} outside (0, 1/2); localized solutions need |omega| < m = 1/2"
        )
    if not (1.0 <= theta < 2.0):
        raise ValueError("theta must lie in [1, 2)")
    eps = MASS - omega
    nodes = grid.nodes

    def status(x):
        return classify(x, theta, omega, grid, substeps)

    if bracket is not None:
        lo, hi = map(float, bracket)
        if status(lo) != kernels.UNDERSHOOT or status(hi) != kernels.OVERSHOOT:
            raise BracketError(f"bracket [{lo}, {hi}] does not straddle the localized solution")
    else:
        lo = hi = None
        if guess is not None:
            for width in (0.01, 0.05, 0.2):
                a, b = guess * (1 - width), guess * (1 + width)
                if status(a) == kernels.UNDERSHOOT and status(b) == kernels.OVERSHOOT:
                    lo, hi = a, b
                    break
        if lo is None:
            lo, hi = _auto_bracket(theta, omega, grid, substeps)

    steps = 0
    undecided = None
    while steps < max_steps:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        st = status(mid)
        steps += 1
        if st == kernels.OVERSHOOT:
            hi = mid
        elif st == kernels.UNDERSHOOT:
            lo = mid
        else:
            undecided = mid
            break
    if undecided is None and hi - lo > BRACKET_WIDTH * hi:
        raise ConvergenceError(
            f"bracket on g(0) still {hi - lo:.3e} wide after {steps} steps", stage="shooting"
        )

    if undecided is not None:
        f, g, _, _ = _trajectory(undecided, theta, eps, nodes, substeps, False)
        split = nodes.size
    else:
        f_lo, g_lo, _, _ = _trajectory(lo, theta, eps, nodes, substeps, False)
        f_hi, g_hi, _, _ = _trajectory(hi, theta, eps, nodes, substeps, False)
        f = 0.5 * (f_lo + f_hi)
        g = 0.5 * (g_lo + g_hi)
        apart = np.abs(g_lo - g_hi) > SPLIT_TOLERANCE * np.abs(g)
        split = int(np.argmax(apart)) if apart.any() else nodes.size

    splice = math.inf
    if split < nodes.size:
        # linear tail: g = A exp(-kappa r) / r and f = -g' / (m + omega)
        kappa = math.sqrt(eps * (1.0 - eps))
        rc = nodes[split]
        amp = g[split] * rc * math.exp(kappa * rc)
        rt = nodes[split:]
        decay = np.exp(-kappa * rt)
        g = g.copy()
        f = f.copy()
        g[split:] = amp * decay / rt
        f[split:] = amp * decay * (kappa / rt + 1.0 / rt**2) / (1.0 - eps)
        splice = float(rc)

    tail = max(abs(g[-1]), abs(f[-1]))
    if tail >= TAIL_LIMIT:
        warnings.warn(
            f"profile is {tail:.2e} at r_max={grid.r_max}; enlarge the grid",
            TruncationWarning,
            stacklevel=2,
        )
    profile = SpinorProfile(
        RadialField(grid, f), RadialField(grid, g), float(omega), float(theta), MASS, splice
    )
    residual = dirac_residual(profile)
    if not residual <= tol:
        raise ConvergenceError(
            f"residual {residual:.3e} exceeds tol={tol:g}; refine the grid",
            stage="shooting",
            residual=residual,
        )
    return profile


def dirac_residuals(profile: SpinorProfile, accuracy: int = RESIDUAL_ACCURACY):
    """Pointwise residuals of both equations (f odd, g even about 0)."""
    grid = profile.grid
    r = grid.nodes
    f, g = profile.f.values, profile.g.values
    Df = derivative_matrix(grid, 1, accuracy, "odd", "one-sided")
    Dg = derivative_matrix(grid, 1, accuracy, "even", "one-sided")
    s = np.abs(g * g - f * f) ** profile.theta
    eps = profile.m - profile.omega
    r1 = Df @ f + 2.0 * f / r - (s - eps) * g
    r2 = Dg @ g - (s - (profile.m + profile.omega)) * f
    return r1, r2


def dirac_residual(profile: SpinorProfile, accuracy: int = RESIDUAL_ACCURACY) -> float:
    """L-infinity of both residuals over interior nodes."""
    r1, r2 = dirac_residuals(profile, accuracy)
    keep = slice(0, -(accuracy // 2))
    return float(max(np.max(np.abs(r1[keep])), np.max(np.abs(r2[keep]))))
