"""
This module defines the configuration files of the commands, validated with
pydantic models.
"""
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from deconv.common import QuadratureSpec
from deconv.errors import ConfigurationError
from deconv.estimator import KnMode, PenaltyConfig, PenaltyVariant
from deconv.noise import NOISE_FACTORIES, NoiseModel, builtin_noise
from deconv.processes import (
    DependentProcess,
    builtin_process,
    check_process_parameters,
)
from deconv.targets import TargetDensity, builtin_target, check_target_parameters
from deconv.utils.source import read_structured_file, unflatten_keys

KnSetting = Union[PositiveInt, Literal["auto", "exact"]]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class NoiseSection(Section):
    name: str
    scale: float = Field(default=1.0, gt=0)

    @field_validator("name")
    @classmethod
    def check_name(cls, value: str) -> str:
        if value not in NOISE_FACTORIES:
            raise ValueError(f"expected one of {', '.join(NOISE_FACTORIES)}")
        return value

    def build(self) -> NoiseModel:
        return builtin_noise(self.name, self.scale)


class TargetSection(BaseModel):
    """Target name; any other key is a parameter of the named target."""

    model_config = ConfigDict(extra="allow", frozen=True)

    name: str = "gaussian"

    @property
    def params(self) -> Dict[str, Any]:
        return dict(self.model_extra or {})

    @model_validator(mode="after")
    def check_parameters(self) -> "TargetSection":
        check_target_parameters(self.name, self.params)
        return self

    def build(self) -> TargetDensity:
        return builtin_target(self.name, self.params)


class ProcessSection(BaseModel):
    """Process name; any other key is a parameter of the named process."""

    model_config = ConfigDict(extra="allow", frozen=True)

    name: str = "iid"

    @property
    def params(self) -> Dict[str, Any]:
        return dict(self.model_extra or {})

    @model_validator(mode="after")
    def check_parameters(self) -> "ProcessSection":
        check_process_parameters(self.name, self.params)
        return self

    def build(self, target: TargetDensity) -> DependentProcess:
        return builtin_process(self.name, self.params, target)


class PenaltySection(Section):
    a: float = Field(default=1.5, gt=1)
    variant: Optional[PenaltyVariant] = None
    beta_sum: Optional[float] = Field(default=None, ge=0)
    tau_sum: Optional[float] = Field(default=None, ge=0)
    scale: float = Field(default=1.0, gt=0)

    def build(self, noise: NoiseModel) -> PenaltyConfig:
        return PenaltyConfig(
            a=self.a,
            variant=self.variant or default_variant(noise),
            beta_sum=self.beta_sum,
            tau_sum=self.tau_sum,
            scale=self.scale,
        )


class QuadSection(Section):
    tolerance: float = Field(default=1e-8, gt=0)
    limit: PositiveInt = 200
    max_nodes: PositiveInt = 2**22
    nodes: Optional[PositiveInt] = None
    max_nodes_2d: PositiveInt = 2**20

    def build(self) -> QuadratureSpec:
        return QuadratureSpec(**self.model_dump())


def default_variant(noise: NoiseModel) -> PenaltyVariant:
    """
    Returns the penalty matching the noise: no_noise without noise, ordinary for
    ordinary smooth noise and supersmooth otherwise.
    """
    if noise.noise_free:
        return PenaltyVariant.NO_NOISE
    if noise.smoothness.is_ordinary_smooth:
        return PenaltyVariant.ORDINARY
    return PenaltyVariant.SUPERSMOOTH


def parse_grid(value: str) -> np.ndarray:
    """
    Parses a grid description start:stop:step, both ends included.

    parse_grid("-1:1:0.5") -> [-1.0, -0.5, 0.0, 0.5, 1.0]
    """
    try:
        start, stop, step = (float(part) for part in value.split(":"))
    except ValueError:
        raise ConfigurationError(f"expected start:stop:step, got {value!r}", "grid")
    if not step > 0 or not stop > start:
        raise ConfigurationError(
            f"expected start < stop and a positive step, got {value!r}", "grid"
        )
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def kn_policy(value: KnSetting) -> Union[KnMode, int]:
    return value if isinstance(value, int) else KnMode(value)


class EstimateConfig(Section):
    input: str
    noise: NoiseSection
    penalty: PenaltySection = PenaltySection()
    kn: KnSetting = "auto"
    grid: str = "-5:5:0.01"
    m_max: Optional[PositiveInt] = None
    workers: Optional[PositiveInt] = None
    out: Optional[str] = None
    report: Optional[str] = None
    quad: QuadSection = QuadSection()

    @field_validator("grid")
    @classmethod
    def check_grid(cls, value: str) -> str:
        parse_grid(value)
        return value

    def grid_points(self) -> np.ndarray:
        return parse_grid(self.grid)


class ExperimentConfig(Section):
    """
    Settings of a Monte Carlo experiment. oracle_replications defaults to
    replications; aggregation selects the mean or the 10% trimmed mean of the MISE.
    """

    target: TargetSection = TargetSection()
    noise: NoiseSection
    process: ProcessSection = ProcessSection()
    n_values: List[PositiveInt]
    replications: PositiveInt = 20
    oracle_replications: Optional[PositiveInt] = None
    penalty: PenaltySection = PenaltySection()
    seed: Optional[int] = None
    kn: KnSetting = "auto"
    m_max: Optional[PositiveInt] = None
    workers: Optional[PositiveInt] = None
    aggregation: Literal["mean", "trimmed"] = "mean"
    include_oracle: bool = True
    quad: QuadSection = QuadSection()

    @field_validator("n_values")
    @classmethod
    def check_n_values(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one sample size is required")
        if any(later <= earlier for earlier, later in zip(value, value[1:])):
            raise ValueError("sample sizes must be strictly increasing")
        if value[0] < 2:
            raise ValueError("sample sizes must be at least 2")
        return value

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigurationError(
                "experiments require a seed, in the configuration file or with --seed",
                "seed",
            )
        return self.seed


class SimulateConfig(Section):
    target: TargetSection = TargetSection()
    noise: NoiseSection = NoiseSection(name="none")
    process: ProcessSection = ProcessSection()
    n: PositiveInt
    seed: int
    out: Optional[str] = None


class PenaltiesConfig(Section):
    noise: NoiseSection
    penalty: PenaltySection = PenaltySection()
    n: PositiveInt
    m_max: PositiveInt = 20
    out: Optional[str] = None
    quad: QuadSection = QuadSection()


CONFIG_KINDS = {
    "estimate": EstimateConfig,
    "experiment": ExperimentConfig,
    "simulate": SimulateConfig,
    "penalties": PenaltiesConfig,
}


def _key_path(location) -> str:
    return ".".join(str(part) for part in location)


def validation_error_message(error: ValidationError) -> str:
    return "; ".join(
        f"{_key_path(item['loc']) or 'config'}: {item['msg']}"
        for item in error.errors()
    )


def validate_config(data: Dict[str, Any], kind: Optional[str] = None):
    """
    Validates a configuration mapping, nested or with flat dotted keys. The kind is
    estimate when the mapping names an input file, experiment otherwise.
    """
    data = unflatten_keys(data)
    if kind is None:
        kind = "estimate" if "input" in data else "experiment"
    model = CONFIG_KINDS.get(kind)
    if model is None:
        raise ConfigurationError(f"unknown configuration kind {kind!r}")
    try:
        return model.model_validate(data)
    except ValidationError as validation_error:
        error = ConfigurationError(validation_error_message(validation_error))
        error.key_path = _key_path(validation_error.errors()[0]["loc"])
        raise error from validation_error


def parse_config(
    path: Union[str, Path], kind: Optional[str] = None
) -> Section:
    """
    Reads and validates a YAML, JSON or TOML configuration file.
    """
    return validate_config(read_structured_file(path), kind)
