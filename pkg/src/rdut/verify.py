"""Monte-Carlo check of a solution against the original problem.

The RDUT value of a sample is the Choquet sum over order statistics with
decumulative weights ``w((N-i+1)/N) - w((N-i)/N)``; the budget is the
sample mean of rho * X.

For an atomless kernel the wealth is the deterministic map X*(rho).  When
rho has atoms the optimum may spread over a range of quantile levels inside
one atom, so each draw keeps its uniform U: rho = F^{-1}(U) and
X = G*(1 - U), which has the same joint law and is anti-comonotone.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from rdut.preferences import UtilityFunction, WeightingFunction
from rdut.solver import RDUTProblem, Solution, optimal_wealth, solve

SE_BAND = 4.0
OBJECTIVE_RTOL = 1e-2


def choquet_weights(n: int, w: WeightingFunction) -> np.ndarray:
    """Weights of the ascending order statistics; they telescope to 1."""
    levels = w.weight(np.arange(n + 1, dtype=float) / n)
    # i-th smallest sample gets w((n-i+1)/n) - w((n-i)/n)
    return np.diff(levels)[::-1]


def rdut_value_empirical(samples, w: WeightingFunction, u: UtilityFunction) -> float:
    x = np.sort(np.asarray(samples, dtype=float), kind="stable")
    if x.size < 1:
        raise ValueError("need at least one sample")
    with np.errstate(divide="ignore"):
        return float(np.dot(u(x), choquet_weights(x.size, w)))


def budget_empirical(rho_samples, wealth) -> tuple[float, float]:
    """Mean of rho * X and its standard error.

    ``wealth`` is either an array aligned with ``rho_samples`` or a callable
    mapping rho to X.
    """
    rho = np.asarray(rho_samples, dtype=float)
    x = wealth(rho) if callable(wealth) else np.asarray(wealth, dtype=float)
    prod = rho * x
    n = prod.size
    se = float(np.std(prod, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(np.mean(prod)), se


@dataclass
class VerificationReport:
    samples: int
    seed: int
    objective_analytic: float
    objective_empirical: float
    objective_rel_error: float
    budget_target: float
    budget_empirical: float
    budget_se: float
    budget_z: float
    coupling: str
    objective_ok: bool
    budget_ok: bool

    @property
    def passed(self) -> bool:
        return self.objective_ok and self.budget_ok

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def end_to_end(p: RDUTProblem, n: int, seed: int, solution: Solution | None = None) -> VerificationReport:
    """Sample rho, map it through the optimal wealth, and compare with the solver."""
    s = solve(p) if solution is None else solution
    if p.kernel.atomless:
        coupling = "rho"
        rho = p.kernel.sample(n, seed)
        x = optimal_wealth(s, rho)
    else:
        coupling = "uniform"
        v = p.kernel.uniforms(n, seed)
        rho = p.kernel.quantile(v)
        x = s.g_star(1.0 - v)
    value = rdut_value_empirical(x, p.weighting, p.utility)
    mean, se = budget_empirical(rho, x)

    rel = abs(value - s.objective_value) / max(abs(s.objective_value), 1e-300)
    dev = mean - p.x0
    if se > 0:
        z = dev / se
        budget_ok = abs(z) <= SE_BAND
    else:
        z = 0.0 if abs(dev) <= 1e-12 * p.x0 else math.copysign(math.inf, dev)
        budget_ok = abs(dev) <= 1e-12 * p.x0
    return VerificationReport(
        samples=n,
        seed=seed,
        objective_analytic=s.objective_value,
        objective_empirical=value,
        objective_rel_error=rel,
        budget_target=p.x0,
        budget_empirical=mean,
        budget_se=se,
        budget_z=z,
        coupling=coupling,
        objective_ok=rel <= OBJECTIVE_RTOL,
        budget_ok=budget_ok,
    )
