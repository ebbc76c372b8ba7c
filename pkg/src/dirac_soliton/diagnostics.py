"""Change of variables, decay fits, 4-spinor reconstruction and comparisons."""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .contraction import PerturbationPair
from .ground_state import GroundState
from .linear_operator import FieldPair
from .radial_core import RadialField, RadialGrid
from .shooting import MASS, SpinorProfile

MIN_FIT_NODES = 10
FIT_EXCLUDED_TAIL = 0.1


def _interp(grid: RadialGrid, values: np.ndarray, parity: str, r: np.ndarray) -> np.ndarray:
    """Monotone cubic interpolation with the origin value supplied by parity."""
    nodes = grid.nodes
    if parity == "even":
        c = np.polyfit(nodes[:3] ** 2, values[:3], 2)
        origin = c[-1]
    else:
        origin = 0.0
    x = np.concatenate(([0.0], nodes))
    y = np.concatenate(([origin], values))
    return PchipInterpolator(x, y, extrapolate=False)(r)


def physical_grid(gs: GroundState, epsilon: float) -> RadialGrid:
    """Rescaled grid stretched by ``1/sqrt(eps)`` (extent ``r_max/sqrt(eps)``)."""
    return gs.grid.scaled(1.0 / math.sqrt(epsilon))


def rescale_to_physical(
    pair: PerturbationPair, gs: GroundState, grid: RadialGrid | None = None
) -> SpinorProfile:
    """Physical ``(f, g)`` from the rescaled correction ``(e1, e2)``.

    ``g(r) = eps^(1/(2 theta)) (Q + e1)(sqrt(eps) r)`` and
    ``f(r) = eps^((theta+1)/(2 theta)) (-Q' + e2)(sqrt(eps) r)``.  On the default
    grid the stretched nodes coincide with the rescaled ones and no
    interpolation takes place.
    """
    eps = pair.epsilon
    if not eps > 0.0:
        raise ValueError("eps must be positive; the physical profile degenerates at eps = 0")
    if not pair.grid.same_as(gs.grid):
        raise ValueError("perturbation and ground state live on different grids")
    theta = gs.theta
    v = gs.Q.values + pair.e1.values
    u = -gs.Qprime.values + pair.e2.values
    if grid is None:
        grid = physical_grid(gs, eps)
        vg, ug = v, u
    else:
        rho = math.sqrt(eps) * grid.nodes
        if rho[-1] > gs.grid.r_max * (1 + 1e-12):
            raise ValueError("physical grid extends beyond r_max / sqrt(eps)")
        vg = _interp(gs.grid, v, "even", rho)
        ug = _interp(gs.grid, u, "odd", rho)
    g = eps ** (1.0 / (2.0 * theta)) * vg
    f = eps ** ((theta + 1.0) / (2.0 * theta)) * ug
    return SpinorProfile(RadialField(grid, f), RadialField(grid, g), MASS - eps, theta)


def rescale_to_perturbation(profile: SpinorProfile, gs: GroundState) -> PerturbationPair:
    """Inverse of :func:`rescale_to_physical` onto the ground-state grid."""
    eps = profile.epsilon
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    theta = profile.theta
    if abs(theta - gs.theta) > 1e-12:
        raise ValueError("profile and ground state have different theta")
    r = gs.grid.nodes / math.sqrt(eps)
    if r[-1] > profile.grid.r_max * (1 + 1e-12):
        raise ValueError("profile grid does not cover r_max / sqrt(eps)")
    if profile.grid.same_as(physical_grid(gs, eps)):
        gv, fv = profile.g.values, profile.f.values
    else:
        gv = _interp(profile.grid, profile.g.values, "even", r)
        fv = _interp(profile.grid, profile.f.values, "odd", r)
    v = gv / eps ** (1.0 / (2.0 * theta))
    u = fv / eps ** ((theta + 1.0) / (2.0 * theta))
    e1 = RadialField(gs.grid, v - gs.Q.values)
    e2 = RadialField(gs.grid, u + gs.Qprime.values)
    return PerturbationPair.from_pair(FieldPair(e1, e2), eps, theta)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    fit_window: tuple[float, float]
    residual: float
    power: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def fit_decay(
    field: RadialField,
    window_fraction: tuple[float, float] = (0.5, 0.75),
    power: float = 0.0,
) -> DecayFit:
    """Exponential rate of a decaying tail.

    Least-squares line through ``(r, log(r^power |field|))`` on the window
    ``[lo, hi] * r_max``; ``rate = -slope``.  With ``power = 1`` the algebraic
    ``1/r`` factor of three-dimensional radial tails (``exp(-k r)/r``) is
    removed first, otherwise it biases the rate by ``~1/r`` on the window.
    The last 10% of the grid is never used.

    Raises
    ------
    ValueError
        Window outside ``[0, 0.9]``, fewer than 10 nodes in it, or a field
        that vanishes identically there.
    """
    lo, hi = map(float, window_fraction)
    if not (0.0 <= lo < hi <= 1.0 - FIT_EXCLUDED_TAIL + 1e-12):
        raise ValueError(f"window {window_fraction} must satisfy 0 <= lo < hi <= 0.9")
    r = field.grid.nodes
    r_max = field.grid.r_max
    mask = (r >= lo * r_max) & (r <= hi * r_max)
    if mask.sum() < MIN_FIT_NODES:
        raise ValueError(f"fit window holds {int(mask.sum())} nodes, need >= {MIN_FIT_NODES}")
    x = r[mask]
    y = np.abs(field.values[mask])
    keep = y > 0.0
    if not keep.any():
        raise ValueError("field vanishes identically on the fit window")
    if keep.sum() < MIN_FIT_NODES:
        raise ValueError("too few nonzero values on the fit window")
    x, y = x[keep], np.log(y[keep]) + power * np.log(x[keep])
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(float(res[0]) / x.size) if res.size else 0.0
    return DecayFit(float(-slope), float(intercept), (float(x[0]), float(x[-1])), rms, float(power))


@dataclass(frozen=True)
class Spinor4Sample:
    position: tuple[float, float, float]
    components: tuple[complex, complex, complex, complex]

    def bilinear(self) -> float:
        """``psi-bar psi = |psi_1|^2 + |psi_2|^2 - |psi_3|^2 - |psi_4|^2``."""
        c = self.components
        return abs(c[0]) ** 2 + abs(c[1]) ** 2 - abs(c[2]) ** 2 - abs(c[3]) ** 2


def reconstruct_spinor(
    profile: SpinorProfile, position: tuple[float, float, float], t: float = 0.0
) -> Spinor4Sample:
    """``psi = exp(-i omega t) (g, 0, i f cos(th), i f sin(th) exp(i ph))``."""
    x1, x2, x3 = map(float, position)
    r = math.sqrt(x1 * x1 + x2 * x2 + x3 * x3)
    if r > profile.grid.r_max:
        raise ValueError(f"|x| = {r:g} lies outside the profile grid (r_max = {profile.grid.r_max:g})")
    g = float(_interp(profile.grid, profile.g.values, "even", np.array([r]))[0])
    f = float(_interp(profile.grid, profile.f.values, "odd", np.array([r]))[0])
    if r > 0.0:
        cos_t = x3 / r
        # sin(th) exp(i ph) = (x1 + i x2) / r
        sin_phase = complex(x1, x2) / r
    else:
        cos_t, sin_phase = 0.0, 0j
    phase = cmath.exp(-1j * profile.omega * t)
    comps = (
        phase * g,
        0j,
        phase * 1j * f * cos_t,
        phase * 1j * f * sin_phase,
    )
    if not all(cmath.isfinite(c) for c in comps):
        raise ValueError("non-finite spinor component")
    return Spinor4Sample((x1, x2, x3), tuple(complex(c) for c in comps))


def compare_profiles(a: SpinorProfile, b: SpinorProfile) -> float:
    """Sup-norm relative difference, component by component, on the finer grid.

    Each component's difference is divided by the sup of that component in
    ``a``; the larger of the two ratios is returned.  Only the common radial
    range is compared.
    """
    if abs(a.omega - b.omega) > 1e-12 or abs(a.theta - b.theta) > 1e-12:
        raise ValueError("profiles have different omega or theta")
    fine, coarse = (a, b) if a.grid.n >= b.grid.n else (b, a)
    r_top = min(a.grid.r_max, b.grid.r_max)
    r = fine.grid.nodes[fine.grid.nodes <= r_top]

    def on_fine(p, comp, parity):
        vals = getattr(p, comp).values
        if p is fine:
            return vals[: r.size]
        return _interp(p.grid, vals, parity, r)

    worst = 0.0
    for comp, parity in (("g", "even"), ("f", "odd")):
        da = on_fine(a, comp, parity)
        db = on_fine(b, comp, parity)
        scale = np.max(np.abs(getattr(a, comp).values))
        diff = np.max(np.abs(da - db))
        if scale > 0.0:
            worst = max(worst, diff / scale)
        elif diff > 0.0:
            worst = math.inf
    return float(worst)


def comparison_record(a: SpinorProfile, b: SpinorProfile, labels=("a", "b")) -> dict:
    return {
        "omega": a.omega,
        "theta": a.theta,
        "labels": list(labels),
        "relative_difference": compare_profiles(a, b),
        "g0": [a.g0, b.g0],
    }
