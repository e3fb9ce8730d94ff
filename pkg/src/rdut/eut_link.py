"""Equivalent expected-utility problem under a transformed pricing kernel.

The transformed kernel has quantile ``x -> delta'(1 - x)``.  It depends on the
original kernel and the weighting function only, never on the utility.  Its
atoms are the affine pieces of delta that span more than one grid cell.

The expected-utility problem ``max E[u(X)] s.t. E[rho_tilde X] = x0`` is
solved by the plain Lagrange condition ``u'(X) = eta * rho_tilde``; no
quantile optimisation is involved.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from rdut.envelope import ConcaveEnvelope, build_phi, concave_envelope
from rdut.errors import DomainError, IllPosed, Infeasible
from rdut.preferences import UtilityFunction, WeightingFunction
from rdut.pricing_kernel import PricingKernel
from rdut.solver import (
    BUDGET_RTOL,
    RDUTProblem,
    Solution,
    budget,
    find_multiplier,
    step_eval,
)


@dataclass(frozen=True, eq=False)
class TransformedKernel:
    """rho_tilde as a discrete law: ``values[i]`` with probability ``masses[i]``.

    Entries are listed in increasing order of rho_tilde, which is the
    reverse of the grid-cell order of the envelope.
    """

    envelope: ConcaveEnvelope

    @cached_property
    def values(self) -> np.ndarray:
        return self.envelope.cell_slopes[::-1].copy()

    @cached_property
    def masses(self) -> np.ndarray:
        return self.envelope.phi.dx[::-1].copy()

    def quantile(self, p):
        """F^{-1}(p) = delta'(1 - p)."""
        arr = np.asarray(p, dtype=float)
        if np.any(~((arr > 0) & (arr < 1))):
            raise DomainError("quantile needs 0 < p < 1")
        return self.envelope.delta_prime(1.0 - arr)

    def mean(self) -> float:
        return float(np.dot(self.values, self.masses))

    def realize(self, rho, kernel: PricingKernel):
        """rho_tilde = delta'(1 - F_rho(rho)), comonotonic with rho."""
        return self.envelope.delta_prime(kernel.sf(rho))

    @cached_property
    def atoms(self) -> list[tuple[float, float]]:
        """(value, mass) for every affine piece wider than one cell, ascending in value."""
        pieces = [(s, b - a) for a, b, s in self.envelope.affine_pieces()]
        return sorted(pieces)

    @property
    def is_atomless(self) -> bool:
        return not self.atoms


def transformed_kernel(e: ConcaveEnvelope) -> TransformedKernel:
    return TransformedKernel(e)


@dataclass(frozen=True, eq=False)
class EUTSolution:
    """Optimal wealth of the expected-utility problem, stored by its quantile.

    ``wealth_cells`` is the quantile of X_tilde on the cells of ``nodes``;
    it is the same grid as the transformed kernel's envelope.
    """

    eta: float
    nodes: np.ndarray
    wealth_cells: np.ndarray
    objective_value: float
    budget_residual: float
    kernel: TransformedKernel | None = None

    def wealth_quantile(self, x):
        return step_eval(self.nodes, self.wealth_cells, x)

    @cached_property
    def wealth_nodes(self) -> np.ndarray:
        return np.append(self.wealth_cells, self.wealth_cells[-1])


def _eut_budget(u: UtilityFunction, t: TransformedKernel, eta: float) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        total = float(np.sum(u.inverse_marginal(eta * t.values) * t.values * t.masses))
    return total if math.isfinite(total) else math.inf


def solve_eut(u: UtilityFunction, t: TransformedKernel, x0: float) -> EUTSolution:
    """X_tilde = (u')^{-1}(eta * rho_tilde) with eta fixed by E[rho_tilde X_tilde] = x0."""
    if not x0 > 0:
        raise Infeasible(f"x0 = {x0} admits no non-trivial outcome with X >= 0")
    eta, b, _ = find_multiplier(lambda e: _eut_budget(u, t, e), x0)
    if not abs(b - x0) <= BUDGET_RTOL * x0:
        raise IllPosed("EUT multiplier search did not meet the budget tolerance",
                       {"eta": eta, "budget": b, "x0": x0})
    wealth = u.inverse_marginal(eta * t.values)
    objective = float(np.dot(u(wealth), t.masses))
    # highest rho_tilde gets the lowest wealth: anti-comonotone coupling
    cells = wealth[::-1].copy()
    return EUTSolution(eta, t.envelope.nodes, cells, objective, b - x0, t)


def rdut_from_eut(e: EUTSolution, w: WeightingFunction, k: PricingKernel, rho_value):
    """X* = Q_tilde(1 - w(F_rho(rho)))."""
    return e.wealth_quantile(w.dual(k.sf(rho_value)))


def eut_from_rdut(s: Solution, t: TransformedKernel | None = None) -> EUTSolution:
    """Read the RDUT optimum as an EUT optimum.

    The quantile is carried over unchanged; the coupling with the uniform
    variable is U = F_rho(rho).
    """
    t = transformed_kernel(s.envelope) if t is None else t
    u = s.problem.utility
    q = s.q_cells
    residual = float(np.dot(q, t.envelope.cell_slopes * t.envelope.phi.dx)) - s.problem.x0
    objective = float(np.dot(u(q), t.envelope.phi.dx))
    return EUTSolution(s.lambda_star, s.nodes, q.copy(), objective, residual, t)


@dataclass
class Diagnostics:
    feasible: bool
    well_posed: bool
    attainable: bool
    unique: bool
    degenerate: bool = False
    notes: list[str] = field(default_factory=list)
    lambda_star: float | None = None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "well_posed": self.well_posed,
            "attainable": self.attainable,
            "unique": self.unique,
            "degenerate": self.degenerate,
            "lambda_star": self.lambda_star,
            "notes": list(self.notes),
        }


def diagnose(p: RDUTProblem) -> Diagnostics:
    """Feasibility, well-posedness, attainability and uniqueness of ``p``."""
    if p.x0 < 0:
        return Diagnostics(False, False, False, False, notes=["x0 < 0: no X >= 0 meets the budget"])
    if p.x0 == 0:
        return Diagnostics(True, True, True, True, degenerate=True,
                           notes=["x0 = 0: X = 0 is the only feasible outcome"])
    phi = build_phi(p.kernel, p.weighting, p.n, p.refine_ends)
    env = concave_envelope(phi)
    t = transformed_kernel(env)
    notes = []
    finite = any(math.isfinite(budget(env, phi, p.utility, lam)) for lam in (1e-6, 1.0, 1e6))
    if not finite:
        notes.append("budget is infinite at every probed multiplier")
        return Diagnostics(True, False, False, False, notes=notes)
    try:
        sol = solve_eut(p.utility, t, p.x0)
    except IllPosed as exc:
        notes.append(str(exc))
        return Diagnostics(True, True, False, False, notes=notes)
    bounded = sol.objective_value < math.inf
    if not bounded:
        notes.append("objective is unbounded above")
    if not t.is_atomless:
        notes.append(f"transformed kernel has {len(t.atoms)} atom(s)")
    return Diagnostics(True, bounded, bounded, bounded, lambda_star=sol.eta, notes=notes)


def write_rho_tilde_csv(path, t: TransformedKernel) -> None:
    """Step quantile of rho_tilde: ``p`` is the left end of each probability cell."""
    p = np.concatenate([[0.0], np.cumsum(t.masses)[:-1]])
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["p", "quantile"])
        for a, v in zip(p, t.values):
            out.writerow([f"{a:.17g}", f"{v:.17g}"])


def write_atoms_csv(path, t: TransformedKernel) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["value", "mass"])
        for v, m in t.atoms:
            out.writerow([f"{v:.17g}", f"{m:.17g}"])
