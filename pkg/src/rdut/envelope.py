"""The cost function phi and its least concave majorant on a grid.

After the change of variable the budget reads ``int Q dphi = x0`` with

    phi(x) = -int_0^{w^{-1}(1-x)} F_rho^{-1}(y) dy,   phi(0) = -E[rho], phi(1) = 0.

``build_phi`` tabulates phi on a grid together with exact per-cell
increments; ``concave_envelope`` returns the piecewise-linear concave
majorant delta through a subset of the grid nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from rdut.errors import DomainError
from rdut.preferences import WeightingFunction
from rdut.pricing_kernel import PricingKernel

MIN_GRID = 16


def make_grid(n: int, refine_ends: int = 32) -> np.ndarray:
    """Uniform nodes i/n plus ``refine_ends`` geometric nodes at each end.

    The extra nodes sit at ``2**-k / n`` and ``1 - 2**-k / n`` for
    ``k = 1..refine_ends``.
    """
    if n < MIN_GRID:
        raise DomainError(f"grid size must be at least {MIN_GRID}")
    if refine_ends < 0:
        raise DomainError("refine_ends must be non-negative")
    uniform = np.arange(n + 1, dtype=float) / n
    k = np.arange(1, refine_ends + 1, dtype=float)
    small = np.ldexp(1.0, -k.astype(int)) / n
    nodes = np.concatenate([uniform, small, 1.0 - small])
    nodes = np.unique(nodes)
    nodes[0], nodes[-1] = 0.0, 1.0
    return nodes


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Function values on nodes ``0 = x_0 < ... < x_N = 1``.

    ``increments[c]`` is ``f(x_{c+1}) - f(x_c)``.  For phi these are computed
    cell by cell from the kernel, which is more accurate than differencing
    ``values`` near either end of the grid.
    """

    nodes: np.ndarray
    values: np.ndarray
    increments: np.ndarray

    @classmethod
    def from_values(cls, nodes, values) -> "GridFunction":
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
            raise DomainError("grid function needs matching 1-d nodes and values (>= 2)")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        return cls(nodes, values, np.diff(values))

    @property
    def size(self) -> int:
        return self.nodes.size - 1

    @cached_property
    def dx(self) -> np.ndarray:
        return np.diff(self.nodes)

    @cached_property
    def slopes(self) -> np.ndarray:
        return self.increments / self.dx


def build_phi(
    kernel: PricingKernel,
    weighting: WeightingFunction,
    n: int = 4096,
    refine_ends: int = 32,
    nodes=None,
) -> GridFunction:
    """Tabulate phi(x) = -partial_expectation(w^{-1}(1 - x)).

    Each node is represented either by its lower probability
    ``p = w^{-1}(1 - x)`` (when ``p <= 1/2``) or by its upper probability
    ``q = nu(x) = 1 - p``; cell increments are formed from whichever
    representation avoids cancellation and telescope to ``E[rho]``.
    """
    if nodes is None:
        nodes = make_grid(n, refine_ends)
    else:
        nodes = np.asarray(nodes, dtype=float)
        if nodes[0] != 0.0 or nodes[-1] != 1.0 or np.any(np.diff(nodes) <= 0):
            raise DomainError("nodes must increase strictly from 0 to 1")

    p = weighting.inverse(1.0 - nodes)
    q = weighting.nu(nodes)
    p[-1], q[-1] = 0.0, 1.0
    p[0], q[0] = 1.0, 0.0
    lower = p <= 0.5

    mean = kernel.mean()
    pe = np.where(lower, kernel.partial_expectation(np.where(lower, p, 0.5)), 0.0)
    ue = np.where(~lower, kernel.upper_expectation(np.where(lower, 0.5, q)), 0.0)
    values = np.where(lower, -pe, ue - mean)
    values[0], values[-1] = -mean, 0.0

    half_lower = kernel.partial_expectation(0.5)
    half_upper = kernel.upper_expectation(0.5)
    left_lower, right_lower = lower[:-1], lower[1:]
    inc = np.empty(nodes.size - 1)
    both_low = left_lower & right_lower
    both_up = ~left_lower & ~right_lower
    straddle = ~left_lower & right_lower
    inc[both_low] = pe[:-1][both_low] - pe[1:][both_low]
    inc[both_up] = ue[1:][both_up] - ue[:-1][both_up]
    inc[straddle] = (half_lower - pe[1:][straddle]) + (half_upper - ue[:-1][straddle])
    # lower-then-upper cannot happen: p decreases along the grid
    if np.any(left_lower & ~right_lower):
        raise DomainError("weighting inverse is not monotone on the grid")
    return GridFunction(nodes, values, inc)


@dataclass(frozen=True, eq=False)
class ConcaveEnvelope:
    """Least concave majorant of a GridFunction.

    ``hull_index`` lists the grid nodes where delta touches phi (both end
    nodes included); ``slopes[k]`` is delta' on
    ``[hull_nodes[k], hull_nodes[k+1])`` and strictly decreases in k.
    """

    phi: GridFunction
    hull_index: np.ndarray
    slopes: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return self.phi.nodes

    @cached_property
    def hull_nodes(self) -> np.ndarray:
        return self.phi.nodes[self.hull_index]

    @cached_property
    def hull_values(self) -> np.ndarray:
        return self.phi.values[self.hull_index]

    @cached_property
    def cell_segment(self) -> np.ndarray:
        """Hull segment index of every grid cell."""
        seg = np.zeros(self.phi.size, dtype=int)
        seg[self.hull_index[1:-1]] = 1
        return np.cumsum(seg)

    @cached_property
    def cell_slopes(self) -> np.ndarray:
        """delta' on each grid cell."""
        return self.slopes[self.cell_segment]

    @cached_property
    def increments(self) -> np.ndarray:
        return self.cell_slopes * self.phi.dx

    @cached_property
    def values(self) -> np.ndarray:
        """delta at every grid node."""
        seg = np.append(self.cell_segment, self.slopes.size - 1)
        start = self.hull_index[seg]
        out = self.phi.values[start] + self.slopes[seg] * (self.nodes - self.nodes[start])
        out[self.hull_index] = self.hull_values
        return out

    @cached_property
    def gap(self) -> np.ndarray:
        """delta - phi at every node, accumulated within each hull segment."""
        d = self.increments - self.phi.increments
        c = np.concatenate([[0.0], np.cumsum(d)])
        seg = np.append(self.cell_segment, self.slopes.size - 1)
        out = c - c[self.hull_index[seg]]
        out[self.hull_index] = 0.0
        return out

    def delta(self, x):
        return np.interp(x, self.hull_nodes, self.hull_values)

    def delta_prime(self, x):
        """Right-continuous delta'(x); the last slope is used at x = 1."""
        arr = np.asarray(x, dtype=float)
        k = np.searchsorted(self.hull_nodes, arr, side="right") - 1
        k = np.clip(k, 0, self.slopes.size - 1)
        val = self.slopes[k]
        return float(val) if arr.ndim == 0 else val

    def affine_pieces(self):
        """(start, end, slope) of hull segments spanning more than one grid cell."""
        starts, ends = self.hull_index[:-1], self.hull_index[1:]
        wide = ends - starts > 1
        return [
            (float(self.nodes[a]), float(self.nodes[b]), float(s))
            for a, b, s in zip(starts[wide], ends[wide], self.slopes[wide])
        ]


def concave_envelope(f: GridFunction) -> ConcaveEnvelope:
    """Upper hull sweep over the grid cells, O(N).

    Cells are pushed left to right as segments; while the newest segment is
    at least as steep as the one below it on the stack, the two are merged
    (the shared vertex lies on or under the chord and leaves the hull).
    Merging sums increments, so chord slopes never come from differences
    of far-apart node values.
    """
    if f.nodes.size < 2:
        raise DomainError("envelope needs at least two nodes")
    dx = f.dx.tolist()
    df = f.increments.tolist()
    start, sdx, sdf = [], [], []
    for c in range(len(dx)):
        a, w, h = c, dx[c], df[c]
        while sdx and h * sdx[-1] >= sdf[-1] * w:
            a = start.pop()
            w += sdx.pop()
            h += sdf.pop()
        start.append(a)
        sdx.append(w)
        sdf.append(h)
    hull_index = np.array(start + [len(dx)], dtype=int)
    slopes = np.array(sdf) / np.array(sdx)
    return ConcaveEnvelope(f, hull_index, slopes)


def delta_prime(e: ConcaveEnvelope, x):
    return e.delta_prime(x)


def write_envelope_csv(path, e: ConcaveEnvelope) -> None:
    """Columns ``x, phi, delta, delta_prime`` with delta' taken right-continuously."""
    rows = zip(e.nodes, e.phi.values, e.values, e.delta_prime(e.nodes))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "phi", "delta", "delta_prime"])
        for row in rows:
            out.writerow([f"{v:.17g}" for v in row])
