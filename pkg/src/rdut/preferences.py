"""Utility functions and probability weighting functions.

Both types are immutable and every method is a pure, vectorised function of
its argument.  Scalars in give scalars out; arrays in give arrays out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rdut.errors import DomainError

_BISECT_ITERS = 200
_TK_GAMMA_MIN = 0.28


def _as_float(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def _bisect_increasing(f, y):
    """Solve f(t) = y for t in [0, 1] with f increasing, f(0)=0, f(1)=1."""
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(_BISECT_ITERS):
        mid = lo + 0.5 * (hi - lo)
        below = f(mid) < y
        new_lo = np.where(below, mid, lo)
        new_hi = np.where(below, hi, mid)
        if np.array_equal(new_lo, lo) and np.array_equal(new_hi, hi):
            break
        lo, hi = new_lo, new_hi
    t = lo + 0.5 * (hi - lo)
    t = np.where(y <= 0.0, 0.0, t)
    return np.where(y >= 1.0, 1.0, t)


@dataclass(frozen=True)
class UtilityFunction:
    """Strictly concave utility on the positive reals.

    ``family`` is ``"crra"`` with ``u(x) = x**(1 - gamma) / (1 - gamma)`` or
    ``"log"`` with ``u(x) = log(x)``.  Both satisfy the Inada conditions.
    """

    family: str = "crra"
    gamma: float = 2.0

    def __post_init__(self):
        if self.family not in ("crra", "log"):
            raise DomainError(f"unknown utility family {self.family!r}")
        if self.family == "crra":
            if not (self.gamma > 0) or self.gamma == 1.0:
                raise DomainError("CRRA gamma must be positive and != 1 (use family='log')")

    @classmethod
    def crra(cls, gamma: float) -> "UtilityFunction":
        return cls("crra", float(gamma))

    @classmethod
    def log(cls) -> "UtilityFunction":
        return cls("log", 1.0)

    @property
    def risk_aversion(self) -> float:
        return 1.0 if self.family == "log" else self.gamma

    def __call__(self, x):
        x, scalar = _as_float(x)
        with np.errstate(divide="ignore"):
            if self.family == "log":
                val = np.log(x)
            else:
                e = 1.0 - self.gamma
                val = np.power(x, e) / e
        return _out(val, scalar)

    def marginal_utility(self, x):
        """u'(x); raises DomainError unless x > 0."""
        x, scalar = _as_float(x)
        if np.any(~(x > 0)):
            raise DomainError("marginal utility needs x > 0")
        with np.errstate(over="ignore"):
            val = 1.0 / x if self.family == "log" else np.power(x, -self.gamma)
        return _out(val, scalar)

    def second_derivative(self, x):
        x, scalar = _as_float(x)
        if np.any(~(x > 0)):
            raise DomainError("u'' needs x > 0")
        val = -self.risk_aversion * np.power(x, -self.risk_aversion - 1.0)
        return _out(val, scalar)

    def inverse_marginal(self, y):
        """(u')^{-1}(y); raises DomainError unless y > 0."""
        y, scalar = _as_float(y)
        if np.any(~(y > 0)):
            raise DomainError("inverse marginal utility needs y > 0")
        with np.errstate(over="ignore"):
            val = np.power(y, -1.0 / self.risk_aversion)
        return _out(val, scalar)

    def to_dict(self) -> dict:
        if self.family == "log":
            return {"family": "log"}
        return {"family": "crra", "gamma": self.gamma}


@dataclass(frozen=True)
class WeightingFunction:
    """Probability weighting w: [0, 1] -> [0, 1], w(0) = 0, w(1) = 1.

    Families and parameters:

    * ``identity``
    * ``tk``: Tversky-Kahneman, ``p**g / (p**g + (1-p)**g)**(1/g)``, g in (0.28, 1]
    * ``prelec``: ``exp(-beta * (-log p)**alpha)``, alpha, beta > 0
    * ``power``: ``p**k``, k > 0

    Besides ``w`` itself the class exposes ``dual(q) = 1 - w(1 - q)``, which is
    evaluated without cancellation for small q.  ``nu`` is the inverse of the
    dual, so ``nu(x) = 1 - w^{-1}(1 - x)``.
    """

    family: str = "identity"
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        if self.family == "tk":
            if not (_TK_GAMMA_MIN < self.gamma <= 1.0):
                raise DomainError("Tversky-Kahneman gamma must lie in (0.28, 1]")
        elif self.family == "prelec":
            if not (self.alpha > 0 and self.beta > 0):
                raise DomainError("Prelec alpha and beta must be positive")
        elif self.family == "power":
            if not self.k > 0:
                raise DomainError("power exponent must be positive")
        elif self.family != "identity":
            raise DomainError(f"unknown weighting family {self.family!r}")

    @classmethod
    def identity(cls) -> "WeightingFunction":
        return cls("identity")

    @classmethod
    def tversky_kahneman(cls, gamma: float) -> "WeightingFunction":
        return cls("tk", gamma=float(gamma))

    @classmethod
    def prelec(cls, alpha: float, beta: float = 1.0) -> "WeightingFunction":
        return cls("prelec", alpha=float(alpha), beta=float(beta))

    @classmethod
    def power(cls, k: float) -> "WeightingFunction":
        return cls("power", k=float(k))

    def to_dict(self) -> dict:
        params = {"tk": ("gamma",), "prelec": ("alpha", "beta"), "power": ("k",)}
        out = {"family": self.family}
        for name in params.get(self.family, ()):
            out[name] = getattr(self, name)
        return out

    # -- core maps --------------------------------------------------------

    def _check_unit(self, arr, what):
        if np.any(~((arr >= 0.0) & (arr <= 1.0))):
            raise DomainError(f"{what} must lie in [0, 1]")

    def _tk_log_w(self, logp, log1mp):
        g = self.gamma
        # log(p**g + (1-p)**g) built from log1p for accuracy at either end
        a, b = g * logp, g * log1mp
        big = np.maximum(a, b)
        log_d = big + np.log1p(np.exp(np.minimum(a, b) - big))
        return a - log_d / g

    def _w(self, p):
        if self.family == "identity":
            return p.copy()
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == "power":
                out = np.power(p, self.k)
            elif self.family == "prelec":
                out = np.exp(-self.beta * np.power(-np.log(p), self.alpha))
            else:
                out = np.exp(self._tk_log_w(np.log(p), np.log1p(-p)))
        out = np.where(p <= 0.0, 0.0, out)
        return np.where(p >= 1.0, 1.0, out)

    def _dual(self, q):
        if self.family == "identity":
            return q.copy()
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == "power":
                out = -np.expm1(self.k * np.log1p(-q))
            elif self.family == "prelec":
                out = -np.expm1(-self.beta * np.power(-np.log1p(-q), self.alpha))
            else:
                out = -np.expm1(self._tk_log_w(np.log1p(-q), np.log(q)))
        out = np.where(q <= 0.0, 0.0, out)
        return np.where(q >= 1.0, 1.0, out)

    def weight(self, p):
        """w(p) for p in [0, 1]; exact at both endpoints."""
        p, scalar = _as_float(p)
        self._check_unit(p, "probability")
        return _out(self._w(p), scalar)

    __call__ = weight

    def dual(self, q):
        """1 - w(1 - q), accurate for small q."""
        q, scalar = _as_float(q)
        self._check_unit(q, "probability")
        return _out(self._dual(q), scalar)

    def derivative(self, p):
        """w'(p) on the open interval (0, 1)."""
        p, scalar = _as_float(p)
        if np.any(~((p > 0.0) & (p < 1.0))):
            raise DomainError("w' is only evaluated on the open interval (0, 1)")
        if self.family == "identity":
            val = np.ones_like(p)
        elif self.family == "power":
            val = self.k * np.power(p, self.k - 1.0)
        elif self.family == "prelec":
            s = -np.log(p)
            val = self._w(p) * self.alpha * self.beta * np.power(s, self.alpha - 1.0) / p
        else:
            g = self.gamma
            pg, qg = np.power(p, g), np.power(1.0 - p, g)
            val = self._w(p) * (g / p - (pg / p - qg / (1.0 - p)) / (pg + qg))
        return _out(val, scalar)

    def inverse(self, y):
        """w^{-1}(y) for y in [0, 1]."""
        y, scalar = _as_float(y)
        self._check_unit(y, "weight")
        if self.family == "identity":
            val = y.copy()
        elif self.family == "power":
            val = np.power(y, 1.0 / self.k)
        elif self.family == "prelec":
            with np.errstate(divide="ignore"):
                val = np.exp(-np.power(-np.log(y) / self.beta, 1.0 / self.alpha))
            val = np.where(y <= 0.0, 0.0, val)
        else:
            val = _bisect_increasing(self._w, y)
        return _out(val, scalar)

    def nu(self, x):
        """nu(x) = 1 - w^{-1}(1 - x), computed as the inverse of ``dual``."""
        x, scalar = _as_float(x)
        self._check_unit(x, "argument of nu")
        if self.family == "identity":
            val = x.copy()
        elif self.family == "power":
            with np.errstate(divide="ignore"):
                val = -np.expm1(np.log1p(-x) / self.k)
        elif self.family == "prelec":
            with np.errstate(divide="ignore"):
                t = np.power(-np.log1p(-x) / self.beta, 1.0 / self.alpha)
            val = -np.expm1(-t)
            val = np.where(x >= 1.0, 1.0, val)
        else:
            val = _bisect_increasing(self._dual, x)
        return _out(val, scalar)

    def nu_prime(self, x):
        """nu'(x) = 1 / w'(1 - nu(x)) on (0, 1)."""
        x, scalar = _as_float(x)
        if np.any(~((x > 0.0) & (x < 1.0))):
            raise DomainError("nu' is only evaluated on the open interval (0, 1)")
        q = self.nu(x)
        val = 1.0 / self.derivative(1.0 - q)
        return _out(val, scalar)
