"""Portfolio choice under rank-dependent utility via the quantile formulation.

The optimal terminal wealth is found by a change of variable that moves the
probability weighting into the budget constraint, a concave-envelope
relaxation of the resulting cost function, and a scalar search for the
Lagrange multiplier.  The same solution is recovered from an expected-utility
problem under a transformed pricing kernel.
"""

from rdut.errors import DomainError, IllPosed, Infeasible, RDUTError
from rdut.preferences import UtilityFunction, WeightingFunction
from rdut.pricing_kernel import Constant, Lognormal, PricingKernel, Tabulated
from rdut.envelope import ConcaveEnvelope, GridFunction, build_phi, concave_envelope, make_grid
from rdut.solver import RDUTProblem, Solution, solve
from rdut.eut_link import EUTSolution, TransformedKernel, diagnose, solve_eut, transformed_kernel

__version__ = "0.1.0"

__all__ = [
    "ConcaveEnvelope",
    "Constant",
    "DomainError",
    "EUTSolution",
    "GridFunction",
    "IllPosed",
    "Infeasible",
    "Lognormal",
    "PricingKernel",
    "RDUTError",
    "RDUTProblem",
    "Solution",
    "Tabulated",
    "TransformedKernel",
    "UtilityFunction",
    "WeightingFunction",
    "build_phi",
    "concave_envelope",
    "diagnose",
    "make_grid",
    "solve",
    "solve_eut",
    "transformed_kernel",
]
