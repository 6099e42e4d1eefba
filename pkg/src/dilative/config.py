"""Experiment configuration: a YAML tree validated into typed descriptors."""
from __future__ import annotations

import hashlib
import json
from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .charfn import FinDimQuery, GFLPModel, LevyModel, ZBetaModel
from .errors import ConfigInvalid, DilativeError
from .kernels import Fractional, Indicator, StepDiscretized
from .levy import DiscreteLevyMeasure, DiscreteMeasureExponent, GaussianRef, SemistableLogPeriodic
from .quadrature import QuadratureSpec
from .scaling import default_grid, semistable_alpha
from .simulate import RcAr1Spec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SemistableCfg(_Strict):
    type: Literal["semistable"]
    gamma: float = Field(gt=0, lt=2)
    c: float = Field(gt=1)
    eta: float = Field(default=0.0, ge=0, le=0.1)
    validate_density: bool = True


class DiscreteCfg(_Strict):
    type: Literal["discrete"]
    atoms: list[tuple[float, float]] = Field(min_length=1)
    compensation: Literal["full", "none"] = "full"


class GaussianCfg(_Strict):
    type: Literal["gaussian"]
    sigma2: float = Field(default=1.0, ge=0)


ExponentCfg = Annotated[Union[SemistableCfg, DiscreteCfg, GaussianCfg], Field(discriminator="type")]


class FractionalCfg(_Strict):
    type: Literal["fractional"]
    kappa: float = Field(gt=0, lt=0.5)


class IndicatorCfg(_Strict):
    type: Literal["indicator"]


class StepCfg(_Strict):
    type: Literal["step"]
    c: float = Field(gt=1)
    base: FractionalCfg


KernelCfg = Annotated[Union[FractionalCfg, IndicatorCfg, StepCfg], Field(discriminator="type")]


class LevyModelCfg(_Strict):
    variant: Literal["levy"]
    exponent: ExponentCfg


class GflpModelCfg(_Strict):
    variant: Literal["gflp"]
    kernel: KernelCfg
    exponent: ExponentCfg


class ZBetaModelCfg(_Strict):
    variant: Literal["zbeta"]
    beta: float = Field(gt=-1, lt=1)
    C: float = Field(default=1.0, gt=0)


class RcAr1Cfg(_Strict):
    variant: Literal["rc_ar1"]
    beta: float = Field(gt=-1, lt=1)
    mixing: Literal["power", "point"] = "power"
    point: float = Field(default=0.0, ge=0, lt=1)


ModelCfg = Annotated[Union[LevyModelCfg, GflpModelCfg, ZBetaModelCfg, RcAr1Cfg], Field(discriminator="variant")]


class QueryCfg(_Strict):
    times: list[float] = Field(min_length=1)
    thetas: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _same_length(self):
        if len(self.times) != len(self.thetas):
            raise ValueError("times and thetas must have equal length")
        return self

    def query(self) -> FinDimQuery:
        return FinDimQuery(tuple(self.times), tuple(self.thetas))


class GridCfg(_Strict):
    k_max: int = Field(default=3, ge=1, le=3)
    times: list[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 4.0], min_length=1)
    queries: Optional[list[QueryCfg]] = None

    def build(self) -> list[FinDimQuery]:
        if self.queries is not None:
            return [q.query() for q in self.queries]
        return default_grid(self.k_max, tuple(self.times))


class ParamsCfg(_Strict):
    alpha: Optional[float] = None
    delta: float = 0.0
    c: Optional[float] = Field(default=None, gt=1)
    T: list[float] = Field(default_factory=lambda: [1.0])

    @field_validator("T")
    @classmethod
    def _positive(cls, v):
        if any(not t > 0 for t in v):
            raise ValueError("scales T must be positive")
        return v


class SchemeCfg(_Strict):
    alpha: Optional[float] = None
    delta: float = -1.0
    direction: Optional[Literal["expand", "shrink"]] = None
    n_ladder: list[int] = Field(default_factory=list)
    estimator: Literal["sample", "conditional"] = "sample"
    calibration: Optional[QueryCfg] = None
    check: Literal["within", "trend"] = "within"
    budget: int = Field(default=10**7, ge=1)

    @field_validator("n_ladder")
    @classmethod
    def _ladder(cls, v):
        if any(n < 1 for n in v):
            raise ValueError("ladder entries must be >= 1")
        return v


class PathGridCfg(_Strict):
    inner: float = Field(default=8.0, gt=0)
    step: float = Field(default=0.02, gt=0)
    span: float = Field(default=1e7, gt=0)
    ratio: float = Field(default=1.05, gt=1)


class SimulateCfg(_Strict):
    times: list[float] = Field(min_length=1)
    n_paths: int = Field(default=1000, ge=1)
    grid: PathGridCfg = Field(default_factory=PathGridCfg)


class ToleranceCfg(_Strict):
    member: float = Field(default=1e-8, gt=0)
    relative: bool = False
    quad_rel: float = Field(default=1e-8, gt=0)
    quad_abs: float = Field(default=1e-10, gt=0)


class ExperimentConfig(_Strict):
    command: Literal["verify-scaling", "simulate", "aggregate", "eval-psi"]
    seed: int = Field(ge=0, lt=2**64)
    model: ModelCfg
    params: ParamsCfg = Field(default_factory=ParamsCfg)
    grid: GridCfg = Field(default_factory=GridCfg)
    scheme: SchemeCfg = Field(default_factory=SchemeCfg)
    simulate: Optional[SimulateCfg] = None
    n_mc: int = Field(default=1000, ge=1)
    output: Optional[str] = None
    tolerance: ToleranceCfg = Field(default_factory=ToleranceCfg)

    @model_validator(mode="after")
    def _command_needs(self):
        if self.command == "simulate" and self.simulate is None:
            raise ValueError("the simulate command needs a 'simulate' section")
        if self.command in ("verify-scaling", "eval-psi") and self.model.variant == "rc_ar1":
            raise ValueError("rc_ar1 has no analytic log-CF; use it with simulate or aggregate")
        return self

    def digest(self) -> str:
        """SHA-256 of the canonical JSON of everything that affects results."""
        payload = self.model_dump(mode="json", exclude={"output"})
        return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


_UNION_TAGS = {
    "levy", "gflp", "zbeta", "rc_ar1", "semistable", "discrete", "gaussian", "fractional", "indicator", "step",
}


def _path(loc) -> str:
    # pydantic inserts the discriminator value into the location of tagged unions
    return ".".join(str(p) for p in loc if p not in _UNION_TAGS) or "<root>"


def parse_config(data: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate a config tree; ``overrides`` maps dotted paths to replacement values."""
    if not isinstance(data, dict):
        raise ConfigInvalid("config root must be a mapping", "parse_config")
    data = json.loads(json.dumps(data))  # detached copy
    for dotted, value in (overrides or {}).items():
        node = data
        *head, last = dotted.split(".")
        for key in head:
            node = node.setdefault(key, {})
        node[last] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigInvalid(f"{_path(err['loc'])}: {err['msg']}", "parse_config") from None


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}", "load_config") from None
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"config is not valid YAML: {exc}", "load_config") from None
    return parse_config(data, overrides)


# builders -----------------------------------------------------------------


def build_exponent(cfg):
    if cfg.type == "semistable":
        return SemistableLogPeriodic(cfg.gamma, cfg.c, cfg.eta, validate=cfg.validate_density)
    if cfg.type == "discrete":
        return DiscreteMeasureExponent(DiscreteLevyMeasure(tuple(cfg.atoms)), cfg.compensation)
    return GaussianRef(cfg.sigma2)


def build_kernel(cfg):
    if cfg.type == "fractional":
        return Fractional(cfg.kappa)
    if cfg.type == "indicator":
        return Indicator()
    return StepDiscretized(Fractional(cfg.base.kappa), cfg.c, 1.0)


def quad_spec(cfg: ExperimentConfig) -> QuadratureSpec:
    return QuadratureSpec(rel_tol=cfg.tolerance.quad_rel, abs_tol=cfg.tolerance.quad_abs)


def build_model(cfg: ExperimentConfig):
    m = cfg.model
    try:
        if m.variant == "levy":
            return LevyModel(build_exponent(m.exponent))
        if m.variant == "gflp":
            return GFLPModel(build_kernel(m.kernel), build_exponent(m.exponent), quad_spec(cfg))
        if m.variant == "zbeta":
            return ZBetaModel(m.beta, m.C, quad_spec(cfg))
        return RcAr1Spec(m.beta, m.mixing, m.point)
    except DilativeError:
        raise
    except ValueError as exc:
        raise ConfigInvalid(f"model: {exc}", "build_model") from None


def resolve_alpha(cfg: ExperimentConfig, alpha: float | None, delta: float) -> float:
    """Explicit alpha, else the one implied by a semistable exponent, a kernel or the Z_beta model."""
    if alpha is not None:
        return alpha
    m = cfg.model
    if m.variant == "levy" and m.exponent.type == "semistable":
        return semistable_alpha(m.exponent.gamma, delta)
    if m.variant == "zbeta":
        return 1.0 - m.beta / 2.0
    if m.variant == "gflp":
        return build_kernel(m.kernel).alpha
    if m.variant == "rc_ar1":
        return 1.0 - m.beta / 2.0
    raise ConfigInvalid("params.alpha is required for this model", "resolve_alpha")
