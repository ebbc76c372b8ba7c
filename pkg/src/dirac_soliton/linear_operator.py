"""The linearized operator around the ground state and its inverses.

For a pair ``e = (e1, e2)`` of radial fields

    L e = ( (1 - V) e1 + (d/dr + 2/r) e2 ,  d/dr e1 + e2 ),
    V   = (2 theta + 1) Q^{2 theta}.

``L~`` denotes the same operator with ``V = 0``.  Two independent inverses
are provided:

* a banded solve of the collocated first-order system (the primary path),
* a Green's-function path that inverts ``L~`` through the Yukawa kernel
  ``exp(-|x|) / (4 pi |x|)`` and its radial derivatives, then accounts for
  ``V`` by a Krylov solve of the resulting second-kind integral equation.

The radial reductions of the kernels are written with the modified
spherical Bessel functions ``i0 = sinh(r)/r``, ``k0 = exp(-r)/r`` and
``i1 = i0'``, ``k1 = -k0'``; all exponentials are carried in scaled form so
that nothing overflows on long grids.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import ConvergenceError, SingularOperatorError, TruncationWarning
from .ground_state import GroundState
from .radial_core import (
    NormSpec,
    RadialField,
    RadialGrid,
    derivative_matrix,
    lp_norm,
    norm,
    write_columns_csv,
)

DECAY_LIMIT = 1e-8
FD_ACCURACY = 4
SERIES_CUTOFF = 0.05


@dataclass(frozen=True, eq=False)
class FieldPair:
    """Two radial fields on a shared grid."""

    first: RadialField
    second: RadialField

    def __post_init__(self):
        if not self.first.grid.same_as(self.second.grid):
            raise ValueError("both components of a FieldPair must share one grid")

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "FieldPair":
        return cls(RadialField.zeros(grid), RadialField.zeros(grid))

    @classmethod
    def from_arrays(cls, grid: RadialGrid, a, b) -> "FieldPair":
        return cls(RadialField(grid, a), RadialField(grid, b))

    @property
    def grid(self) -> RadialGrid:
        return self.first.grid

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.first.values, self.second.values

    def __add__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair.from_arrays(
            self.grid,
            self.first.values + other.first.values,
            self.second.values + other.second.values,
        )

    def __sub__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair.from_arrays(
            self.grid,
            self.first.values - other.first.values,
            self.second.values - other.second.values,
        )

    def scale(self, c: float) -> "FieldPair":
        return FieldPair.from_arrays(self.grid, c * self.first.values, c * self.second.values)

    def sup(self) -> float:
        return max(self.first.sup(), self.second.sup())

    def norm(self, spec: NormSpec) -> float:
        """Largest of the two component norms."""
        return max(norm(self.first, spec), norm(self.second, spec))

    def to_csv(self, names: tuple[str, str] = ("e1", "e2")) -> str:
        return write_columns_csv(
            {"r": self.grid.nodes, names[0]: self.first.values, names[1]: self.second.values}
        )


# ---------------------------------------------------------------------------
# modified spherical Bessel functions, exponentially scaled


def _scaled_i0(r: np.ndarray) -> np.ndarray:
    """exp(-r) sinh(r) / r."""
    return -np.expm1(-2.0 * r) / (2.0 * r)


def _scaled_i1(r: np.ndarray) -> np.ndarray:
    """exp(-r) (r cosh r - sinh r) / r^2, with a series near the origin."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = r < SERIES_CUTOFF
    x = r[small]
    x2 = x * x
    out[small] = np.exp(-x) * x * (1.0 / 3.0 + x2 * (1.0 / 30.0 + x2 * (1.0 / 840.0 + x2 / 45360.0)))
    x = r[~small]
    E = -np.expm1(-2.0 * x)
    out[~small] = (x * (2.0 - E) - E) / (2.0 * x * x)
    return out


@dataclass(frozen=True, eq=False)
class _Sweeps:
    """Scaled running integrals of one source against i_l and k_l."""

    F: np.ndarray  # exp(-r) int_0^r rho^2 i_l psi
    B: np.ndarray  # exp(r) int_r^R rho^2 k_l psi


class GreenKernels:
    """Radial reductions of the Yukawa kernel family on a fixed grid."""

    def __init__(self, grid: RadialGrid):
        self.grid = grid
        r = grid.nodes
        self._r_ext = np.concatenate(([0.0], r))
        self.i0 = _scaled_i0(r)
        self.i1 = _scaled_i1(r)
        self.k0 = 1.0 / r
        self.k1 = 1.0 / r + 1.0 / (r * r)
        # d/dr (r^2 i_l) in scaled form
        self._di0 = 2.0 * r * self.i0 + r * r * (self.i1 - self.i0)
        self._di1 = r * r * (self.i0 - self.i1)
        self._D = derivative_matrix(grid, 1, 6, None, "one-sided")

    def _check_decay(self, psi: np.ndarray):
        if abs(psi[-1]) > DECAY_LIMIT:
            warnings.warn(
                f"source is {abs(psi[-1]):.2e} at r_max={self.grid.r_max}; the "
                "truncated convolution is inaccurate",
                TruncationWarning,
                stacklevel=3,
            )

    def sweeps(self, psi: np.ndarray, order: int) -> _Sweeps:
        r = self.grid.nodes
        dpsi = self._D @ psi
        if order == 0:
            il, dil = self.i0, self._di0
            t, dt = r * psi, psi + r * dpsi
        else:
            il, dil = self.i1, self._di1
            t, dt = (r + 1.0) * psi, psi + (r + 1.0) * dpsi
        s = r * r * il * psi
        ds = dil * psi + r * r * il * dpsi
        s_ext = np.concatenate(([0.0], s))
        ds_ext = np.concatenate(([0.0], ds))
        # the backward sweep never needs the origin, only the forward one
        F, _ = kernels.exp_sweeps(self._r_ext, s_ext, ds_ext, s_ext, ds_ext)
        _, B = kernels.exp_sweeps(r, s, ds, t, dt)
        return _Sweeps(F[1:], B)

    def yukawa(self, psi: np.ndarray) -> np.ndarray:
        """(-Laplacian + 1)^{-1} psi for a radial source."""
        self._check_decay(psi)
        sw = self.sweeps(psi, 0)
        return self.k0 * sw.F + self.i0 * sw.B

    def invert_free(self, phi1: np.ndarray, phi2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        self._check_decay(phi1)
        self._check_decay(phi2)
        a = self.sweeps(phi1, 0)
        b = self.sweeps(phi2, 1)
        # e1 = Y0[phi1] - (d/dr + 2/r) Y1[phi2],  e2 = Y1[phi2] - d/dr Y0[phi1]
        e1 = self.k0 * (a.F + b.F) + self.i0 * (a.B - b.B)
        e2 = self.k1 * (b.F + a.F) + self.i1 * (b.B - a.B)
        return e1, e2


def yukawa_kernel(grid: RadialGrid) -> RadialField:
    """Samples of G(r) = exp(-r) / (4 pi r)."""
    r = grid.nodes
    return RadialField(grid, np.exp(-r) / (4.0 * math.pi * r))


def yukawa_convolve(phi: RadialField) -> RadialField:
    """Convolve a radial source with the Yukawa kernel.

    The result solves ``-e'' - (2/r) e' + e = phi``.  A warning is issued when
    ``phi`` has not decayed below 1e-8 by ``r_max``.
    """
    return phi.with_values(GreenKernels(phi.grid).yukawa(phi.values))


def invert_Ltilde(phi: FieldPair) -> FieldPair:
    """Solve ``L~ e = phi`` with the Green's kernels of the free operator."""
    e1, e2 = GreenKernels(phi.grid).invert_free(*phi.arrays())
    return FieldPair.from_arrays(phi.grid, e1, e2)


# ---------------------------------------------------------------------------
# the operator around the ground state


@dataclass(frozen=True, eq=False)
class LinearizedOp:
    """``L`` linearized around ``gs``.

    ``coupling`` multiplies the potential ``V``; 1 gives the operator of the
    perturbation problem, smaller values are used to test the Neumann series.
    """

    theta: float
    gs: GroundState
    coupling: float = 1.0

    def __post_init__(self):
        if self.theta != self.gs.theta:
            raise ValueError(f"theta={self.theta} does not match the ground state ({self.gs.theta})")
        if self.theta < 1.0:
            warnings.warn(
                f"theta={self.theta} < 1: the operator is invertible but the "
                "contraction argument built on it does not apply",
                RuntimeWarning,
                stacklevel=3,
            )

    @classmethod
    def from_ground_state(cls, gs: GroundState, coupling: float = 1.0) -> "LinearizedOp":
        return cls(gs.theta, gs, coupling)

    @property
    def grid(self) -> RadialGrid:
        return self.gs.grid

    @cached_property
    def potential(self) -> np.ndarray:
        Q = self.gs.Q.values
        return self.coupling * (2.0 * self.theta + 1.0) * np.abs(Q) ** (2.0 * self.theta)

    @cached_property
    def _derivatives(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        # e1 is even about the origin, e2 odd; both vanish beyond r_max
        D_even = derivative_matrix(self.grid, 1, FD_ACCURACY, "even", "decay")
        D_odd = derivative_matrix(self.grid, 1, FD_ACCURACY, "odd", "decay")
        return D_even, D_odd

    def interleave(self, blocks) -> sp.csc_matrix:
        """Assemble a 2x2 block operator on the unknowns ``[e1_0, e2_0, e1_1, ...]``."""
        n = self.grid.n
        A = sp.bmat(blocks, format="csr")
        perm = np.empty(2 * n, dtype=int)
        perm[0::2] = np.arange(n)
        perm[1::2] = np.arange(n) + n
        return A[perm][:, perm].tocsc()

    @cached_property
    def matrix(self) -> sp.csc_matrix:
        """Banded matrix of ``L`` acting on interleaved unknowns."""
        n = self.grid.n
        D_even, D_odd = self._derivatives
        inv_r = sp.diags(2.0 / self.grid.nodes)
        return self.interleave(
            [
                [sp.diags(1.0 - self.potential), D_odd + inv_r],
                [D_even, sp.identity(n)],
            ]
        )

    @cached_property
    def _lu(self):
        try:
            lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise SingularOperatorError(
                f"discretized operator is singular ({exc}); refine the grid",
                stage="invert-L",
            ) from exc
        diag = np.abs(lu.U.diagonal())
        if diag.min() <= 1e-14 * diag.max():
            raise SingularOperatorError(
                "discretized operator is numerically singular; refine the grid",
                stage="invert-L",
                pivot_ratio=float(diag.min() / diag.max()),
            )
        return lu

    @cached_property
    def _green(self) -> GreenKernels:
        return GreenKernels(self.grid)

    def apply(self, e: FieldPair) -> FieldPair:
        return apply_L(self, e)


def _check_grid(op: LinearizedOp, pair: FieldPair):
    if not pair.grid.same_as(op.grid):
        raise ValueError("field pair is not sampled on the operator's grid")


def apply_L(op: LinearizedOp, e: FieldPair) -> FieldPair:
    """Evaluate ``L e`` with the same differences used by the banded inverse."""
    _check_grid(op, e)
    D_even, D_odd = op._derivatives
    e1, e2 = e.arrays()
    r = op.grid.nodes
    first = (1.0 - op.potential) * e1 + D_odd @ e2 + 2.0 * e2 / r
    second = D_even @ e1 + e2
    return FieldPair.from_arrays(op.grid, first, second)


InvertMethod = Literal["banded", "green", "neumann"]


def invert_L(
    op: LinearizedOp,
    phi: FieldPair,
    method: InvertMethod = "banded",
    tol: float = 1e-12,
    max_terms: int = 200,
) -> FieldPair:
    """Solve ``L e = phi``.

    Parameters
    ----------
    method : {'banded', 'green', 'neumann'}
        ``banded`` factorizes the collocated system once and reuses it.
        ``green`` inverts the free operator with kernels and solves
        ``e1 - Y0[V e1] = (L~^{-1} phi)_1`` by GMRES.  ``neumann`` sums
        ``(-L~^{-1} M)^k L~^{-1} phi`` and only converges for weak potentials.
    tol : float
        Relative tolerance of the iterative methods.

    Raises
    ------
    SingularOperatorError
        The banded factorization has a zero pivot.
    ConvergenceError
        GMRES or the Neumann series failed to reach ``tol``.
    """
    _check_grid(op, phi)
    if method == "banded":
        rhs = np.empty(2 * op.grid.n)
        rhs[0::2], rhs[1::2] = phi.arrays()
        x = op._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SingularOperatorError("banded solve produced non-finite values", stage="invert-L")
        return FieldPair.from_arrays(op.grid, x[0::2], x[1::2])
    if method == "green":
        return _invert_green(op, phi, tol)
    if method == "neumann":
        return _invert_neumann(op, phi, tol, max_terms)
    raise ValueError(f"unknown inversion method {method!r}")


def _invert_green(op: LinearizedOp, phi: FieldPair, tol: float) -> FieldPair:
    green = op._green
    V = op.potential
    phi1, phi2 = phi.arrays()
    base1, _ = green.invert_free(phi1, phi2)
    n = op.grid.n
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        A = spla.LinearOperator((n, n), matvec=lambda x: x - green.yukawa(V * x), dtype=float)
        scale = float(np.max(np.abs(base1))) or 1.0
        e1, info = spla.gmres(A, base1 / scale, rtol=tol, atol=0.0, restart=60, maxiter=20)
    if info != 0:
        raise ConvergenceError("GMRES did not converge on the Green's path", stage="invert-L")
    e1 *= scale
    e1, e2 = green.invert_free(phi1 + V * e1, phi2)
    return FieldPair.from_arrays(op.grid, e1, e2)


def _invert_neumann(op: LinearizedOp, phi: FieldPair, tol: float, max_terms: int) -> FieldPair:
    green = op._green
    V = op.potential
    term1, term2 = green.invert_free(*phi.arrays())
    total1, total2 = term1.copy(), term2.copy()
    zero = np.zeros_like(V)
    for k in range(max_terms):
        # -L~^{-1} M t = L~^{-1} (V t1, 0)
        term1, term2 = green.invert_free(V * term1, zero)
        total1 += term1
        total2 += term2
        size = max(np.max(np.abs(term1)), np.max(np.abs(term2)))
        ref = max(np.max(np.abs(total1)), np.max(np.abs(total2)), 1e-300)
        if not math.isfinite(size):
            break
        if size <= tol * ref:
            return FieldPair.from_arrays(op.grid, total1, total2)
    raise ConvergenceError(
        f"Neumann series did not converge in {max_terms} terms; the potential is too strong",
        stage="invert-L",
    )


def smallest_singular_value(op: LinearizedOp) -> float:
    """Smallest singular value of the banded matrix, as ``1 / ||A^{-1}||_2``."""
    lu = op._lu
    m = 2 * op.grid.n
    inv = spla.LinearOperator(
        (m, m),
        matvec=lambda x: lu.solve(np.asarray(x, dtype=float).ravel()),
        rmatvec=lambda x: lu.solve(np.asarray(x, dtype=float).ravel(), trans="T"),
        dtype=float,
    )
    top = spla.svds(inv, k=1, return_singular_vectors=False, random_state=0)
    return float(1.0 / top[0])


# ---------------------------------------------------------------------------
# Hardy-type inequality


def hardy_check(f: RadialField, p: float) -> tuple[float, float]:
    """Return ``(||f / r||_p, ||f' + 2 f / r||_p)`` in the 3D radial measure."""
    return _hardy_norms(f, p, _hardy_derivative(f.grid))


def _hardy_derivative(grid: RadialGrid):
    return derivative_matrix(grid, 1, FD_ACCURACY, "odd", "one-sided")


def _hardy_norms(f: RadialField, p: float, D) -> tuple[float, float]:
    if not (p >= 2.0):
        raise ValueError("p must lie in [2, inf]")
    r = f.r
    vals = f.values
    lhs = lp_norm(f.grid, vals / r, p)
    rhs = lp_norm(f.grid, D @ vals + 2.0 * vals / r, p)
    return lhs, rhs


def hardy_fields(grid: RadialGrid, count: int, seed: int = 0) -> list[RadialField]:
    """Random smooth fields ``r P(r) exp(-b r)`` vanishing linearly at 0.

    ``P`` is a cubic with standard normal coefficients and ``b`` is uniform
    on ``[2, 4]``; the tails are below 1e-8 at ``r_max >= 20``.
    """
    rng = np.random.default_rng(seed)
    r = grid.nodes
    out = []
    for _ in range(count):
        coef = rng.standard_normal(4)
        rate = rng.uniform(2.0, 4.0)
        out.append(RadialField(grid, r * np.polyval(coef, r) * np.exp(-rate * r)))
    return out


def hardy_suite(
    grid: RadialGrid, count: int = 50, ps=(2.0, 4.0, math.inf), seed: int = 0
) -> dict[float, np.ndarray]:
    """Ratios ``||f/r||_p / ||f' + 2f/r||_p`` for ``count`` random fields."""
    fields = hardy_fields(grid, count, seed)
    D = _hardy_derivative(grid)
    out = {}
    for p in ps:
        ratios = []
        for f in fields:
            lhs, rhs = _hardy_norms(f, p, D)
            ratios.append(lhs / rhs if rhs > 0 else math.inf)
        out[float(p)] = np.array(ratios)
    return out
