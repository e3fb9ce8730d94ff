"""Pricing kernels described through their quantile functions.

A kernel exposes its quantile, CDF and survival function, mean, and the two
partial expectations

    partial_expectation(p) = int_0^p F^{-1}(y) dy
    upper_expectation(q)   = int_{1-q}^1 F^{-1}(y) dy

The upper form is kept separate so that integrals near p = 1 are never
formed as a difference of two numbers close to the mean.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from rdut.errors import DomainError

_U53 = float(2**53)


def _as_float(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def _uniforms(n: int, seed: int) -> np.ndarray:
    # open interval (0, 1) so that unbounded quantiles stay finite
    rng = np.random.default_rng(seed)
    return (rng.integers(0, 2**53, size=n).astype(float) + 0.5) / _U53


class PricingKernel:
    """Common behaviour of all kernel families."""

    atomless = True

    def quantile(self, p):
        p, scalar = _as_float(p)
        if np.any(~((p > 0.0) & (p < 1.0))):
            raise DomainError("kernel quantile needs 0 < p < 1")
        return _out(self._quantile(p), scalar)

    def cdf(self, t):
        t, scalar = _as_float(t)
        return _out(self._cdf(t), scalar)

    def sf(self, t):
        """Survival function 1 - F(t)."""
        t, scalar = _as_float(t)
        return _out(self._sf(t), scalar)

    def partial_expectation(self, p):
        p, scalar = _as_float(p)
        if np.any(~((p >= 0.0) & (p <= 1.0))):
            raise DomainError("partial expectation needs 0 <= p <= 1")
        return _out(self._lower(p), scalar)

    def upper_expectation(self, q):
        q, scalar = _as_float(q)
        if np.any(~((q >= 0.0) & (q <= 1.0))):
            raise DomainError("upper expectation needs 0 <= q <= 1")
        return _out(self._upper(q), scalar)

    def uniforms(self, n: int, seed: int) -> np.ndarray:
        """The uniform draws behind ``sample(n, seed)``, strictly inside (0, 1)."""
        if n < 1:
            raise DomainError("sample size must be >= 1")
        return _uniforms(n, seed)

    def sample(self, n: int, seed: int) -> np.ndarray:
        """n draws by inverse transform of ``quantile``; deterministic in (n, seed)."""
        return self._quantile(self.uniforms(n, seed))

    def _sf(self, t):
        return 1.0 - self._cdf(t)


@dataclass(frozen=True)
class Lognormal(PricingKernel):
    """rho = exp(mu + sigma * Z) with Z standard normal."""

    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("lognormal sigma must be positive")

    def mean(self) -> float:
        return float(np.exp(self.mu + 0.5 * self.sigma**2))

    def _quantile(self, p):
        return np.exp(self.mu + self.sigma * ndtri(p))

    def _z(self, t):
        with np.errstate(divide="ignore"):
            return (np.log(np.maximum(t, 0.0)) - self.mu) / self.sigma

    def _cdf(self, t):
        return ndtr(self._z(t))

    def _sf(self, t):
        return ndtr(-self._z(t))

    def _lower(self, p):
        return self.mean() * ndtr(ndtri(p) - self.sigma)

    def _upper(self, q):
        return self.mean() * ndtr(ndtri(q) + self.sigma)

    def to_dict(self) -> dict:
        return {"family": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Constant(PricingKernel):
    """Degenerate kernel rho = c.  Atomic, so only for tests and limits."""

    c: float = 1.0
    atomless = False

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError("constant kernel must be positive")

    def mean(self) -> float:
        return float(self.c)

    def _quantile(self, p):
        return np.full_like(p, self.c)

    def _cdf(self, t):
        return np.where(t >= self.c, 1.0, 0.0)

    def _lower(self, p):
        return self.c * p

    def _upper(self, q):
        return self.c * q

    def to_dict(self) -> dict:
        return {"family": "constant", "c": self.c}


@dataclass(frozen=True, eq=False)
class Tabulated(PricingKernel):
    """Right-continuous step quantile read off a table.

    ``probs`` are strictly increasing nodes in (0, 1) and ``values`` the
    non-decreasing positive quantile levels.  ``values[j]`` holds on
    ``[probs[j], probs[j+1])``; the first level is extended down to 0 and the
    last one up to 1.  Step quantiles are atomic.
    """

    probs: np.ndarray = field(default_factory=lambda: np.array([0.5]))
    values: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    atomless = False

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).copy()
        values = np.asarray(self.values, dtype=float).copy()
        if probs.ndim != 1 or probs.shape != values.shape or probs.size == 0:
            raise DomainError("tabulated kernel needs matching 1-d probs and values")
        if np.any(~((probs > 0) & (probs < 1))) or np.any(np.diff(probs) <= 0):
            raise DomainError("tabulated probs must be strictly increasing in (0, 1)")
        if np.any(values <= 0) or np.any(np.diff(values) < 0):
            raise DomainError("tabulated quantile values must be positive and non-decreasing")
        probs.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "values", values)
        edges = np.concatenate([[0.0], probs[1:], [1.0]])
        mass = np.diff(edges)
        object.__setattr__(self, "_edges", edges)
        object.__setattr__(self, "_cum_lower", np.concatenate([[0.0], np.cumsum(mass * values)]))
        top = np.cumsum((mass * values)[::-1])[::-1]
        object.__setattr__(self, "_cum_upper", np.concatenate([top, [0.0]]))

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        """Load a two-column ``p,quantile`` CSV with a header row."""
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or {"p", "quantile"} - set(reader.fieldnames):
                raise DomainError(f"{path}: expected columns 'p,quantile'")
            rows = [(float(r["p"]), float(r["quantile"])) for r in reader]
        probs, values = zip(*rows) if rows else ((), ())
        return cls(np.array(probs), np.array(values))

    def mean(self) -> float:
        return float(self._cum_lower[-1])

    def _cell(self, p):
        return np.clip(np.searchsorted(self._edges, p, side="right") - 1, 0, self.values.size - 1)

    def _quantile(self, p):
        return self.values[self._cell(p)]

    def _cdf(self, t):
        j = np.searchsorted(self.values, t, side="right")
        return self._edges[j]

    def _lower(self, p):
        j = self._cell(p)
        return self._cum_lower[j] + (p - self._edges[j]) * self.values[j]

    def _upper(self, q):
        # int_{1-q}^1 computed from the top of the table
        p = 1.0 - q
        j = self._cell(p)
        return self._cum_upper[j + 1] + (self._edges[j + 1] - p) * self.values[j]

    def to_dict(self) -> dict:
        return {"family": "tabulated", "p": self.probs.tolist(), "quantile": self.values.tolist()}
