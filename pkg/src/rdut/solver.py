"""Optimal quantile under rank-dependent utility.

For a multiplier lam the relaxed Lagrangian is maximised point-wise by
``Q(x) = (u')^{-1}(lam * delta'(x))``, with delta the concave envelope of
phi.  The multiplier is fixed by the budget ``int Q dphi = x0``.  On the grid
delta' is constant on every cell, so Q is a right-continuous step function
and all integrals below are exact cell sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from rdut.envelope import ConcaveEnvelope, GridFunction, build_phi, concave_envelope
from rdut.errors import DomainError, IllPosed, Infeasible
from rdut.preferences import UtilityFunction, WeightingFunction
from rdut.pricing_kernel import PricingKernel

LAMBDA_BOUNDS = (1e-12, 1e12)
MAX_BISECT = 200
BUDGET_RTOL = 1e-8


@dataclass(frozen=True)
class RDUTProblem:
    """Maximise the RDUT value of X subject to E[rho X] = x0, X >= 0."""

    x0: float
    utility: UtilityFunction
    weighting: WeightingFunction
    kernel: PricingKernel
    n: int = 4096
    refine_ends: int = 32


def step_eval(nodes: np.ndarray, cells: np.ndarray, x):
    """Right-continuous step function with value ``cells[c]`` on [x_c, x_{c+1})."""
    arr = np.asarray(x, dtype=float)
    c = np.clip(np.searchsorted(nodes, arr, side="right") - 1, 0, cells.size - 1)
    val = cells[c]
    return float(val) if arr.ndim == 0 else val


def candidate_quantile(e: ConcaveEnvelope, u: UtilityFunction, lam: float) -> np.ndarray:
    """Point-wise maximiser (u')^{-1}(lam * delta') on every grid cell."""
    if not lam > 0:
        raise DomainError("multiplier must be positive")
    return u.inverse_marginal(lam * e.cell_slopes)


def budget(e: ConcaveEnvelope, phi: GridFunction, u: UtilityFunction, lam: float) -> float:
    """Stieltjes sum of the candidate quantile against phi's cell increments.

    Returns ``inf`` when the sum overflows.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        total = float(np.dot(candidate_quantile(e, u, lam), phi.increments))
    return total if math.isfinite(total) else math.inf


def _increments(f) -> np.ndarray:
    return f.increments


def lagrangian_value(q_cells, f, u: UtilityFunction, lam: float) -> float:
    """J(Q) = int u(Q) dx - lam * int Q df for a cell-wise constant Q.

    ``f`` is the GridFunction phi or its ConcaveEnvelope delta; both share
    the same cells.
    """
    q = np.asarray(q_cells, dtype=float)
    if np.any(q < 0) or np.any(np.diff(q) < 0):
        raise DomainError("Q must be non-negative and non-decreasing")
    dx = f.phi.dx if isinstance(f, ConcaveEnvelope) else f.dx
    with np.errstate(divide="ignore"):
        util = np.asarray(u(q), dtype=float)
    return float(np.dot(util, dx) - lam * np.dot(q, _increments(f)))


def find_multiplier(budget_fn, x0: float, bounds=LAMBDA_BOUNDS):
    """Root of the decreasing function ``budget_fn(lam) = x0``.

    Brackets by doubling or halving from lam = 1, then bisects in log space
    until the bracket stops shrinking.  Returns ``(lam, budget, iterations)``.
    """
    lo_bound, hi_bound = bounds
    lam = 1.0
    b = budget_fn(lam)
    steps = 0
    if b > x0:
        while b > x0:
            lam *= 2.0
            steps += 1
            if lam > hi_bound:
                raise IllPosed("no multiplier bracket below the upper bound",
                               {"lambda": lam, "budget": b})
            b = budget_fn(lam)
        lo, hi = lam / 2.0, lam
    else:
        while b < x0:
            lam /= 2.0
            steps += 1
            if lam < lo_bound:
                raise IllPosed("budget stays below x0 over the whole search range",
                               {"lambda": lam, "budget": b})
            b = budget_fn(lam)
        lo, hi = lam, lam * 2.0
        if b == x0:
            return lam, b, steps
    b_lo, b_hi = budget_fn(lo), budget_fn(hi)
    for _ in range(MAX_BISECT):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        b_mid = budget_fn(mid)
        steps += 1
        if b_mid > x0:
            lo, b_lo = mid, b_mid
        else:
            hi, b_hi = mid, b_mid
    if abs(b_lo - x0) <= abs(b_hi - x0):
        return lo, b_lo, steps
    return hi, b_hi, steps


@dataclass(frozen=True, eq=False)
class Solution:
    """Optimal quantile and multiplier for an RDUTProblem.

    ``q_cells`` holds Q* on the cells of ``envelope.nodes``.  Q*, G* and the
    wealth map are right-continuous step functions built from it.
    """

    problem: RDUTProblem
    envelope: ConcaveEnvelope
    lambda_star: float
    q_cells: np.ndarray
    objective_value: float
    budget_residual: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def nodes(self) -> np.ndarray:
        return self.envelope.nodes

    @property
    def phi(self) -> GridFunction:
        return self.envelope.phi

    @property
    def grid_size(self) -> int:
        return int(self.nodes.size)

    def q_star(self, x):
        return step_eval(self.nodes, self.q_cells, x)

    def g_star(self, x):
        """G*(x) = Q*(1 - w(1 - x))."""
        return self.q_star(self.problem.weighting.dual(x))

    @cached_property
    def q_nodes(self) -> np.ndarray:
        return np.append(self.q_cells, self.q_cells[-1])

    @cached_property
    def g_nodes(self) -> np.ndarray:
        return self.g_star(self.nodes)

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "objective_value": self.objective_value,
            "budget_residual": self.budget_residual,
            "grid_size": self.grid_size,
            "x0": self.problem.x0,
            "hull_vertices": int(self.envelope.hull_index.size),
            "diagnostics": self.diagnostics,
        }


def solve(p: RDUTProblem) -> Solution:
    """Solve the quantile problem for the problem's budget."""
    if not p.x0 > 0:
        raise Infeasible(f"x0 = {p.x0} admits no non-trivial outcome with X >= 0")
    phi = build_phi(p.kernel, p.weighting, p.n, p.refine_ends)
    env = concave_envelope(phi)
    u = p.utility

    lam, b, steps = find_multiplier(lambda l: budget(env, phi, u, l), p.x0)
    residual = b - p.x0
    if not abs(residual) <= BUDGET_RTOL * p.x0:
        raise IllPosed("multiplier search did not meet the budget tolerance",
                       {"lambda": lam, "budget": b, "x0": p.x0})
    q = candidate_quantile(env, u, lam)
    if np.any(np.diff(q) < 0):
        raise IllPosed("candidate quantile is not monotone")
    objective = float(np.dot(u(q), phi.dx))
    gap = abs(lagrangian_value(q, phi, u, lam) - lagrangian_value(q, env, u, lam))
    diagnostics = {
        "iterations": steps,
        "hull_vertices": int(env.hull_index.size),
        "affine_pieces": len(env.affine_pieces()),
        "zero_gap": gap,
        "q_min": float(q[0]),
        "q_max": float(q[-1]),
    }
    return Solution(p, env, lam, q, objective, residual, diagnostics)


def optimal_wealth(s: Solution, rho_value, k: PricingKernel | None = None):
    """X* = G*(1 - F_rho(rho)) = Q*(1 - w(F_rho(rho))).

    The survival function is used directly so that large rho keeps its
    precision.
    """
    k = s.problem.kernel if k is None else k
    return s.q_star(s.problem.weighting.dual(k.sf(rho_value)))


def rdut_objective_quantile(f, w: WeightingFunction, u: UtilityFunction, kind: str = "G",
                            epsabs: float = 1e-12, epsrel: float = 1e-12, limit: int = 500):
    """Both forms of the RDUT value of a quantile, by adaptive quadrature.

    ``f`` is a callable on (0, 1): the quantile G of the outcome when
    ``kind="G"``, or Q = G(nu(.)) when ``kind="Q"``.  Returns the pair
    ``(int u(G(x)) w'(1-x) dx, int u(Q(x)) dx)``.
    """
    if kind == "G":
        g = f
        q = lambda x: f(w.nu(x))
    elif kind == "Q":
        q = f
        g = lambda x: f(w.dual(x))
    else:
        raise DomainError("kind must be 'G' or 'Q'")
    weighted, _ = integrate.quad(lambda x: u(g(x)) * w.derivative(1.0 - x), 0.0, 1.0,
                                 epsabs=epsabs, epsrel=epsrel, limit=limit)
    changed, _ = integrate.quad(lambda x: u(q(x)), 0.0, 1.0,
                                epsabs=epsabs, epsrel=epsrel, limit=limit)
    return weighted, changed
