"""JSON problem configuration.

Example::

    {
      "utility":   {"family": "crra", "gamma": 2.0},
      "weighting": {"family": "tk", "gamma": 0.61},
      "kernel":    {"family": "lognormal", "mu": -0.02, "sigma": 0.2},
      "x0": 1.0,
      "grid": {"n": 4096, "refine_ends": 32}
    }

Tabulated kernels take either ``"csv": "path.csv"`` (resolved relative to the
config file) or inline ``"p"`` and ``"quantile"`` lists.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from rdut.envelope import MIN_GRID
from rdut.errors import DomainError, RDUTError
from rdut.preferences import UtilityFunction, WeightingFunction
from rdut.pricing_kernel import Constant, Lognormal, PricingKernel, Tabulated
from rdut.solver import RDUTProblem


class ConfigError(RDUTError):
    """The configuration file could not be read or validated."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class UtilityConfig(_Strict):
    family: Literal["crra", "log"]
    gamma: Optional[float] = None

    @model_validator(mode="after")
    def _gamma(self):
        if self.family == "crra" and (self.gamma is None or self.gamma <= 0 or self.gamma == 1):
            raise ValueError("crra utility needs gamma > 0, gamma != 1")
        return self


class WeightingConfig(_Strict):
    family: Literal["identity", "tk", "prelec", "power"]
    gamma: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    k: Optional[float] = None

    @model_validator(mode="after")
    def _params(self):
        need = {"tk": ("gamma",), "prelec": ("alpha",), "power": ("k",)}.get(self.family, ())
        missing = [name for name in need if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.family} weighting needs {', '.join(missing)}")
        return self


class LognormalConfig(_Strict):
    family: Literal["lognormal"]
    mu: float
    sigma: float = Field(gt=0)


class ConstantConfig(_Strict):
    family: Literal["constant"]
    c: float = Field(gt=0)


class TabulatedConfig(_Strict):
    family: Literal["tabulated"]
    csv: Optional[str] = None
    p: Optional[list[float]] = None
    quantile: Optional[list[float]] = None

    @model_validator(mode="after")
    def _source(self):
        if (self.csv is None) == (self.p is None or self.quantile is None):
            raise ValueError("tabulated kernel needs either 'csv' or both 'p' and 'quantile'")
        return self


KernelConfig = Annotated[
    Union[LognormalConfig, ConstantConfig, TabulatedConfig], Field(discriminator="family")
]


class GridConfig(_Strict):
    n: int = Field(default=4096, ge=MIN_GRID)
    refine_ends: int = Field(default=32, ge=0, le=64)


class ProblemConfig(_Strict):
    utility: UtilityConfig
    weighting: WeightingConfig = WeightingConfig(family="identity")
    kernel: KernelConfig
    x0: float
    grid: GridConfig = GridConfig()


def _utility(c: UtilityConfig) -> UtilityFunction:
    return UtilityFunction.log() if c.family == "log" else UtilityFunction.crra(c.gamma)


def _weighting(c: WeightingConfig) -> WeightingFunction:
    if c.family == "tk":
        return WeightingFunction.tversky_kahneman(c.gamma)
    if c.family == "prelec":
        return WeightingFunction.prelec(c.alpha, 1.0 if c.beta is None else c.beta)
    if c.family == "power":
        return WeightingFunction.power(c.k)
    return WeightingFunction.identity()


def _kernel(c, base: Path) -> PricingKernel:
    if c.family == "lognormal":
        return Lognormal(c.mu, c.sigma)
    if c.family == "constant":
        return Constant(c.c)
    if c.csv is not None:
        path = Path(c.csv)
        return Tabulated.from_csv(path if path.is_absolute() else base / path)
    return Tabulated(c.p, c.quantile)


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(part) for part in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "invalid config:\n" + "\n".join(lines)


def parse_config(text: str, base: Path | str = ".", grid_n: int | None = None) -> RDUTProblem:
    """Build an RDUTProblem from JSON text; ConfigError carries line or field detail."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        cfg = ProblemConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc
    n = cfg.grid.n if grid_n is None else grid_n
    try:
        return RDUTProblem(
            x0=cfg.x0,
            utility=_utility(cfg.utility),
            weighting=_weighting(cfg.weighting),
            kernel=_kernel(cfg.kernel, Path(base)),
            n=n,
            refine_ends=cfg.grid.refine_ends,
        )
    except (DomainError, OSError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path, grid_n: int | None = None) -> RDUTProblem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, base=path.parent, grid_n=grid_n)
