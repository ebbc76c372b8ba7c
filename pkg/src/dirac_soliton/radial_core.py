"""Radial grids, sampled radial functions, derivatives, quadrature and norms.

All integrals use the three-dimensional radial measure ``4 pi r^2 dr``.  A
grid never contains ``r = 0``; quantities that need the origin (quadrature,
derivative stencils) obtain it by extrapolation or by parity reflection.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal, Optional

import numpy as np
import scipy.sparse as sp

SpacingMode = Literal["uniform", "graded"]
Parity = Optional[Literal["even", "odd"]]
Closure = Literal["one-sided", "decay"]

MIN_NODES = 16
GRADING_STRENGTH = 3.0
FOUR_PI = 4.0 * math.pi


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing positive nodes ending at ``r_max``."""

    nodes: np.ndarray
    r_max: float
    spacing_mode: SpacingMode = "uniform"

    def __post_init__(self):
        nodes = _readonly(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < MIN_NODES:
            raise ValueError(f"a radial grid needs at least {MIN_NODES} nodes")
        if nodes[0] <= 0.0 or np.any(np.diff(nodes) <= 0.0):
            raise ValueError("grid nodes must be positive and strictly increasing")
        if nodes[-1] != self.r_max:
            raise ValueError("last grid node must equal r_max")

    def __len__(self):
        return self.nodes.size

    @property
    def n(self) -> int:
        return self.nodes.size

    @cached_property
    def spacing(self) -> np.ndarray:
        """Cell widths, including the first cell ``[0, r_1]``."""
        return np.diff(np.concatenate(([0.0], self.nodes)))

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights ``w`` with ``sum(w * F) ~ int_0^r_max r^2 F dr``."""
        return _product_weights(self.nodes)

    def scaled(self, factor: float) -> "RadialGrid":
        """Grid with every node multiplied by ``factor``."""
        nodes = self.nodes * factor
        return RadialGrid(nodes, float(nodes[-1]), self.spacing_mode)

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.n == other.n and np.array_equal(self.nodes, other.nodes)
        )


def make_grid(r_max: float, n: int, spacing_mode: SpacingMode = "uniform") -> RadialGrid:
    """Build a radial grid on ``(0, r_max]`` with ``n`` nodes.

    ``uniform`` places node ``k`` at ``k * r_max / n``.  ``graded`` maps a
    uniform parameter through ``sinh`` so that cells near the origin are
    narrower than cells near ``r_max``.
    """
    if not (r_max > 0.0) or not math.isfinite(r_max):
        raise ValueError("r_max must be a positive finite number")
    if int(n) != n or n < MIN_NODES:
        raise ValueError(f"n must be an integer >= {MIN_NODES}, got {n}")
    n = int(n)
    xi = np.arange(1, n + 1) / n
    if spacing_mode == "uniform":
        nodes = r_max * xi
    elif spacing_mode == "graded":
        b = GRADING_STRENGTH
        nodes = r_max * np.sinh(b * xi) / math.sinh(b)
    else:
        raise ValueError(f"unknown spacing mode {spacing_mode!r}")
    nodes[-1] = r_max
    return RadialGrid(nodes, float(r_max), spacing_mode)


@dataclass(frozen=True, eq=False)
class RadialField:
    """One real radial function sampled on the nodes of a grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = _readonly(self.values)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(
                f"field has {values.size} values for a grid of {self.grid.n} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")

    @classmethod
    def from_function(cls, grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray]):
        return cls(grid, np.broadcast_to(fn(grid.nodes), grid.nodes.shape))

    @classmethod
    def zeros(cls, grid: RadialGrid):
        return cls(grid, np.zeros(grid.n))

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    # serialization -------------------------------------------------------
    def to_csv(self, name: str = "value") -> str:
        return write_columns_csv({"r": self.r, name: self.values})

    @classmethod
    def from_csv(cls, text: str, spacing_mode: SpacingMode = "uniform") -> "RadialField":
        cols = read_columns_csv(text)
        names = list(cols)
        r, v = cols[names[0]], cols[names[1]]
        return cls(RadialGrid(r, float(r[-1]), spacing_mode), v)

    def to_json(self) -> str:
        return json.dumps(
            {
                "spacing_mode": self.grid.spacing_mode,
                "r": self.r.tolist(),
                "values": self.values.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "RadialField":
        data = json.loads(text)
        r = np.array(data["r"], dtype=float)
        grid = RadialGrid(r, float(r[-1]), data.get("spacing_mode", "uniform"))
        return cls(grid, np.array(data["values"], dtype=float))


@dataclass(frozen=True)
class NormSpec:
    """Which norm to take: ``L^p`` (order 0) or ``W^{1,p}`` (order 1)."""

    p: float = 4.0
    order: int = 0

    def __post_init__(self):
        if not (self.p >= 2.0):
            raise ValueError("norms are defined here for p >= 2 (p may be inf)")
        if self.order not in (0, 1):
            raise ValueError("order must be 0 (L^p) or 1 (W^{1,p})")


W14 = NormSpec(4.0, 1)
L4 = NormSpec(4.0, 0)


# ---------------------------------------------------------------------------
# quadrature


def _product_weights(nodes: np.ndarray) -> np.ndarray:
    """Weights for int_0^R r^2 F(r) dr, exact when F is a quadratic.

    F is interpolated by quadratics on consecutive pairs of cells (the
    origin counts as a node); the value at the origin is extrapolated
    quadratically from the first three grid nodes.
    """
    x = np.concatenate(([0.0], nodes))
    n_int = x.size - 1
    w = np.zeros(x.size)

    starts = np.arange(0, n_int - 1, 2)
    triples = [(starts, starts + 1, starts + 2, x[starts], x[starts + 2])]
    if n_int % 2 == 1:
        last = np.array([n_int - 2])
        triples.append((last, last + 1, last + 2, x[last + 1], x[last + 2]))

    for ia, ib, ic, lo, hi in triples:
        b = x[ib]
        ta, tc = x[ia] - b, x[ic] - b
        t_lo, t_hi = lo - b, hi - b

        def prim(k):
            return (t_hi ** (k + 1) - t_lo ** (k + 1)) / (k + 1)

        # int (b + t)^2 t^m dt for m = 0, 1, 2
        mom = np.stack(
            [b * b * prim(m) + 2.0 * b * prim(m + 1) + prim(m + 2) for m in range(3)],
            axis=-1,
        )
        V = np.zeros((ia.size, 3, 3))
        V[:, 0, :] = 1.0
        V[:, 1, 0], V[:, 1, 2] = ta, tc
        V[:, 2, 0], V[:, 2, 2] = ta * ta, tc * tc
        sol = np.linalg.solve(V, mom[..., None])[..., 0]
        np.add.at(w, ia, sol[:, 0])
        np.add.at(w, ib, sol[:, 1])
        np.add.at(w, ic, sol[:, 2])

    r1, r2, r3 = nodes[:3]
    extrap = np.array(
        [
            r2 * r3 / ((r1 - r2) * (r1 - r3)),
            r1 * r3 / ((r2 - r1) * (r2 - r3)),
            r1 * r2 / ((r3 - r1) * (r3 - r2)),
        ]
    )
    out = w[1:].copy()
    out[:3] += w[0] * extrap
    return out


def integrate_radial(field: RadialField) -> float:
    """Return ``4 pi int_0^r_max field(r) r^2 dr``."""
    return FOUR_PI * float(np.dot(field.grid.weights, field.values))


def _integrate_values(grid: RadialGrid, values: np.ndarray) -> float:
    return FOUR_PI * float(np.dot(grid.weights, values))


def lp_norm(grid: RadialGrid, values: np.ndarray, p: float) -> float:
    """L^p norm of raw samples on ``grid``."""
    a = np.abs(values)
    if math.isinf(p):
        return float(np.max(a)) if a.size else 0.0
    scale = float(np.max(a)) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    integral = _integrate_values(grid, (a / scale) ** p)
    return scale * max(integral, 0.0) ** (1.0 / p)


def norm(field: RadialField, spec: NormSpec = W14) -> float:
    """L^p or W^{1,p} norm of a radial field in the 3D measure."""
    f_norm = lp_norm(field.grid, field.values, spec.p)
    if spec.order == 0:
        return f_norm
    d_norm = lp_norm(field.grid, differentiate(field).values, spec.p)
    if math.isinf(spec.p):
        return max(f_norm, d_norm)
    return (f_norm**spec.p + d_norm**spec.p) ** (1.0 / spec.p)


# ---------------------------------------------------------------------------
# finite differences


def fornberg_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives 0..m at ``x0`` (Fornberg 1988).

    Returns an array of shape ``(m + 1, len(x))``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _even_origin_coeffs(nodes: np.ndarray, terms: int) -> np.ndarray:
    """Coefficients giving F(0) from F(r_1..r_terms), exact for even
    polynomials of degree ``2 * (terms - 1)``."""
    r2 = nodes[:terms] ** 2
    V = np.vander(r2, terms, increasing=True).T
    rhs = np.zeros(terms)
    rhs[0] = 1.0
    return np.linalg.solve(V, rhs)


def derivative_matrix(
    grid: RadialGrid,
    deriv: int = 1,
    accuracy: int = 2,
    parity: Parity = None,
    closure: Closure = "one-sided",
) -> sp.csr_matrix:
    """Sparse matrix of a centered finite-difference derivative on ``grid``.

    ``parity`` reflects the field through the origin (``even``: F(-r)=F(r),
    ``odd``: F(-r)=-F(r)) so stencils near ``r -> 0`` stay centered; with
    ``parity=None`` the stencils become one-sided there.  ``closure='decay'``
    treats the field as zero beyond ``r_max``; ``'one-sided'`` shifts the
    stencils inward instead.
    """
    if accuracy % 2 or accuracy < 2:
        raise ValueError("accuracy must be a positive even integer")
    nodes = grid.nodes
    n = nodes.size
    half = accuracy // 2 + (deriv - 1) // 2
    width = 2 * half + 1

    # extended positions: k ghosts on the left, n nodes, k ghosts on the right
    left_pos: list[float] = []
    left_map: list[dict[int, float]] = []
    if parity is not None:
        sign = 1.0 if parity == "even" else -1.0
        for k in range(half - 1, -1, -1):
            left_pos.append(-nodes[k])
            left_map.append({k: sign})
        left_pos.append(0.0)
        if parity == "even":
            left_map.append({k: c for k, c in enumerate(_even_origin_coeffs(nodes, half + 1))})
        else:
            left_map.append({})
        left_pos, left_map = left_pos[-half:], left_map[-half:]
    right_pos: list[float] = []
    if closure == "decay":
        step = nodes[-1] - nodes[-2]
        right_pos = [nodes[-1] + step * (k + 1) for k in range(half)]
    elif closure != "one-sided":
        raise ValueError(f"unknown closure {closure!r}")

    positions = np.concatenate((left_pos, nodes, right_pos))
    n_left = len(left_pos)
    maps: list[dict[int, float]] = (
        left_map + [{i: 1.0} for i in range(n)] + [{} for _ in right_pos]
    )
    total = positions.size

    rows, cols, vals = [], [], []
    for i in range(n):
        centre = i + n_left
        lo = min(max(centre - half, 0), total - width)
        idx = np.arange(lo, lo + width)
        w = fornberg_weights(nodes[i], positions[idx], deriv)[deriv]
        for wk, pos in zip(w, idx):
            for col, coef in maps[pos].items():
                rows.append(i)
                cols.append(col)
                vals.append(wk * coef)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def differentiate(field: RadialField, accuracy: int = 2, parity: Parity = None) -> RadialField:
    """Radial derivative by centered differences, one-sided at the ends."""
    D = derivative_matrix(field.grid, 1, accuracy, parity, "one-sided")
    return field.with_values(D @ field.values)


# ---------------------------------------------------------------------------
# CSV helpers shared by every artifact writer


def write_columns_csv(columns: dict) -> str:
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=float) for k in names]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*arrays):
        writer.writerow([format(float(v), ".17g") for v in row])
    return buf.getvalue()


def read_columns_csv(text: str) -> dict:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, k].copy() for k, name in enumerate(header)}
