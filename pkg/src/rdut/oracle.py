"""Brute-force solvers for the discretised quantile problem.

The problem is transcribed directly in terms of the outcome quantile G on
the midpoints of n uniform cells, without the change of variable or the
concave envelope:

    maximise   sum_i a_i u(G_i)
    subject to sum_i b_i G_i = x0,  0 <= G_1 <= ... <= G_n

with ``a_i = w'(1 - x_i) / n`` and ``b_i = F_rho^{-1}(1 - x_i) / n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from rdut.errors import DomainError, IllPosed, Infeasible
from rdut.preferences import UtilityFunction
from rdut.solver import BUDGET_RTOL, RDUTProblem, find_multiplier


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    x: np.ndarray
    a: np.ndarray
    b: np.ndarray
    x0: float
    utility: UtilityFunction

    def __post_init__(self):
        if np.any(self.a <= 0) or np.any(self.b <= 0):
            raise DomainError("objective and budget weights must be positive")

    @classmethod
    def from_problem(cls, p: RDUTProblem, n: int) -> "DiscreteProblem":
        x = (np.arange(n) + 0.5) / n
        a = p.weighting.derivative(1.0 - x) / n
        b = p.kernel.quantile(1.0 - x) / n
        return cls(x, a, b, float(p.x0), p.utility)

    def objective(self, g) -> float:
        with np.errstate(divide="ignore"):
            return float(np.dot(self.a, self.utility(np.asarray(g, dtype=float))))

    def cost(self, g) -> float:
        return float(np.dot(self.b, g))


def pava_inner(p: DiscreteProblem, lam: float) -> np.ndarray:
    """Maximise sum a_i u(G_i) - lam b_i G_i over non-decreasing G >= 0.

    Pool-adjacent-violators: a pool's common value c satisfies
    u'(c) * sum(a) = lam * sum(b), i.e. c = (u')^{-1}(lam * sum(b) / sum(a)).
    Adjacent pools are merged while the left value is not below the right one.
    """
    if not lam > 0:
        raise DomainError("multiplier must be positive")
    # pool value is decreasing in the ratio sum(b)/sum(a), so compare ratios
    a, b = p.a.tolist(), p.b.tolist()
    sa, sb, size = [], [], []
    for i in range(len(a)):
        ca, cb, cn = a[i], b[i], 1
        while sa and sb[-1] * ca <= cb * sa[-1]:
            ca += sa.pop()
            cb += sb.pop()
            cn += size.pop()
        sa.append(ca)
        sb.append(cb)
        size.append(cn)
    val = p.utility.inverse_marginal(lam * np.array(sb) / np.array(sa))
    return np.maximum(np.repeat(val, size), 0.0)


@dataclass(frozen=True)
class DiscreteSolution:
    g: np.ndarray
    lam: float
    objective: float
    budget: float


def discrete_solve(p: DiscreteProblem) -> DiscreteSolution:
    """Outer bisection on the multiplier around ``pava_inner``."""
    if not p.x0 > 0:
        raise Infeasible(f"x0 = {p.x0} admits no non-trivial outcome with X >= 0")

    def cost(lam):
        c = p.cost(pava_inner(p, lam))
        return c if math.isfinite(c) else math.inf

    lam, b, _ = find_multiplier(cost, p.x0)
    if not abs(b - p.x0) <= BUDGET_RTOL * p.x0:
        raise IllPosed("discrete multiplier search did not meet the budget tolerance")
    g = pava_inner(p, lam)
    return DiscreteSolution(g, lam, p.objective(g), b)


@dataclass(frozen=True)
class Enumeration:
    g: np.ndarray | None
    objective: float
    band: float
    widened: bool
    candidates: int
    in_band: int


def lattice_band(p: DiscreteProblem, levels) -> float:
    """Half the smallest budget change from moving one cell by one level.

    A single-level lattice has one candidate and an unbounded band.
    """
    lv = np.unique(np.asarray(levels, dtype=float))
    if lv.size < 2:
        return math.inf
    return 0.5 * float(np.min(p.b)) * float(np.min(np.diff(lv)))


def exhaustive_tiny(p: DiscreteProblem, levels, band: float | None = None,
                    upper_band: float | None = None) -> Enumeration:
    """Best non-decreasing level sequence with budget within the band of x0.

    Every non-decreasing sequence over ``levels`` is enumerated.  Candidates
    are kept when ``x0 - band <= budget <= x0 + upper_band``; ``upper_band``
    defaults to ``band``.  If nothing is kept the band is doubled once and
    ``widened`` is set.
    """
    n = p.a.size
    lv = sorted(set(float(v) for v in levels))
    if n > 6 or len(lv) > 8:
        raise DomainError("exhaustive search is limited to 6 cells and 8 levels")
    if band is None:
        band = lattice_band(p, lv)
    if upper_band is None:
        upper_band = band

    cands = np.array(list(itertools.combinations_with_replacement(lv, n)))
    costs = cands @ p.b
    with np.errstate(divide="ignore"):
        objs = p.utility(cands) @ p.a

    widened = False
    keep = (costs >= p.x0 - band) & (costs <= p.x0 + upper_band)
    if not keep.any():
        widened = True
        band, upper_band = 2.0 * band, 2.0 * upper_band
        keep = (costs >= p.x0 - band) & (costs <= p.x0 + upper_band)
    if not keep.any():
        return Enumeration(None, -math.inf, band, widened, len(cands), 0)
    idx = np.flatnonzero(keep)
    best = idx[np.argmax(objs[idx])]
    return Enumeration(cands[best], float(objs[best]), band, widened, len(cands), int(idx.size))


def lattice_check(p: DiscreteProblem, levels: int = 8, seed: int = 0) -> dict:
    """Compare ``discrete_solve`` with enumeration over a lattice holding its values.

    The lattice is the distinct values of the PAVA solution padded with
    seeded random levels.  Enumeration only admits budgets that do not
    exceed x0 (beyond round-off): the optimum over ``budget <= x0`` is the
    equality-constrained optimum, so PAVA must win exactly.
    """
    d = discrete_solve(p)
    lv = sorted(set(d.g.tolist()))
    rng = np.random.default_rng(seed)
    scale = float(np.median(d.g))
    while len(lv) < levels:
        lv = sorted(set(lv) | {float(rng.uniform(0.2, 2.0) * scale)})
    e = exhaustive_tiny(p, lv, upper_band=1e-9 * p.x0)
    equal = e.g is not None and bool(np.array_equal(e.g, d.g))
    return {
        "levels": lv,
        "pava": d.g.tolist(),
        "pava_objective": d.objective,
        "enumeration": None if e.g is None else e.g.tolist(),
        "enum_objective": e.objective,
        "band": e.band,
        "widened": e.widened,
        "candidates": e.candidates,
        "in_band": e.in_band,
        "equal": equal,
    }
