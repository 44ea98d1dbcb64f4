"""
Run configuration
Flat `key = value` files parsed with python-dotenv's parser and validated
with pydantic
"""
import itertools
import logging
from typing import Dict, List, Literal, Optional

from dotenv.parser import parse_stream
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from midasme.core.config import settings
from midasme.core.exceptions import ConfigError
from midasme.services.estimation_service import SearchConfig
from midasme.services.monte_carlo_service import Scenario

logger = logging.getLogger(__name__)

LIST_FIELDS = ("T", "jmax", "theta", "sigma_u2", "sigma_v2", "rho")


class RunConfig(BaseModel):
    """Validated contents of a run configuration file"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: Literal["simulate", "diagnose", "fit"]
    T: List[int] = Field(default_factory=list)
    jmax: List[int] = Field(default_factory=list)
    theta: List[float] = Field(default_factory=list)
    sigma_u2: List[float] = Field(default_factory=lambda: [0.0])
    sigma_v2: List[float] = Field(default_factory=lambda: [0.0])
    sigma_eps2: float = Field(default=1.0, gt=0.0)
    p: int = Field(default=2, ge=0)
    m: int = Field(default=3, ge=1)
    reps: int = Field(default=1000, ge=1)
    seed: Optional[int] = Field(default=None, ge=0)
    theta_lo: float = Field(default=1.001, gt=1.0)
    theta_hi: float = 50.0
    gss_iters: int = Field(default=50, ge=1)
    out_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)
    threads: Optional[int] = Field(default=None, ge=1)
    a: float = 0.0
    rho: Optional[List[float]] = None
    b: float = 1.0
    ar_coef: float = Field(default=0.8, gt=-1.0, lt=1.0)
    t_large: int = Field(default=100_000, ge=10_000)
    rate_seeds: int = Field(default=3, ge=0)
    covariance: Literal["auto", "proposition", "sandwich"] = "auto"
    low_csv: Optional[str] = None
    high_csv: Optional[str] = None
    bootstrap: int = Field(default=0, ge=0)
    include_clamped: bool = True

    @field_validator(*LIST_FIELDS, mode="before")
    @classmethod
    def _split_list(cls, v):
        if isinstance(v, str):
            items = [item.strip() for item in v.split(",")]
            if any(item == "" for item in items):
                raise ValueError("empty entry in comma-separated list")
            return items
        return v

    @field_validator("T", "jmax")
    @classmethod
    def _positive_ints(cls, v: List[int]) -> List[int]:
        if any(x < 1 for x in v):
            raise ValueError("values must be positive integers")
        return v

    @field_validator("theta")
    @classmethod
    def _theta_above_one(cls, v: List[float]) -> List[float]:
        if any(x <= 1.0 for x in v):
            raise ValueError("theta values must exceed 1")
        return v

    @field_validator("sigma_u2", "sigma_v2")
    @classmethod
    def _nonnegative(cls, v: List[float]) -> List[float]:
        if not v or any(x < 0.0 for x in v):
            raise ValueError("variances must be a non-empty list of values >= 0")
        return v

    @model_validator(mode="after")
    def _mode_requirements(self):
        if self.theta_hi <= self.theta_lo:
            raise ValueError(f"theta_hi ({self.theta_hi}) must exceed theta_lo ({self.theta_lo})")
        if self.rho is not None and len(self.rho) != self.p:
            raise ValueError(f"rho has {len(self.rho)} entries but p={self.p}")

        if self.mode in ("simulate", "diagnose"):
            for name in ("T", "jmax", "theta"):
                if not getattr(self, name):
                    raise ValueError(f"{name} is required in {self.mode} mode")
            if self.seed is None:
                raise ValueError(f"seed is required in {self.mode} mode")
        else:
            if not self.low_csv or not self.high_csv:
                raise ValueError("low_csv and high_csv are required in fit mode")
            if len(self.jmax) != 1:
                raise ValueError("fit mode needs exactly one jmax")
            if len(self.sigma_u2) != 1 or len(self.sigma_v2) != 1:
                raise ValueError("fit mode needs a single sigma_u2 and sigma_v2")
        return self

    @property
    def search(self) -> SearchConfig:
        return SearchConfig(theta_lo=self.theta_lo, theta_hi=self.theta_hi, iterations=self.gss_iters)

    @property
    def n_threads(self) -> int:
        return self.threads or settings.threads


def parse_config_text(text_lines, source: str = "<config>") -> RunConfig:
    """
    Parse `key = value` lines into a RunConfig

    Args:
        text_lines: Open text stream
        source: Name used in log messages

    Returns:
        RunConfig with defaults applied
    """
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    for binding in parse_stream(text_lines):
        line = binding.original.line
        if binding.error:
            raise ConfigError(f"cannot parse '{binding.original.string.strip()}'", line=line)
        if binding.key is None:
            continue
        if binding.value is None:
            raise ConfigError(f"'{binding.key}' has no value", line=line, field=binding.key)
        if binding.key not in RunConfig.model_fields:
            raise ConfigError("unknown key", line=line, field=binding.key)
        if binding.key in values:
            raise ConfigError(f"duplicate key (first set on line {lines[binding.key]})",
                              line=line, field=binding.key)
        values[binding.key] = binding.value.strip()
        lines[binding.key] = line

    if "mode" not in values:
        raise ConfigError("mode is required", field="mode")

    try:
        cfg = RunConfig(**values)
    except ValidationError as e:
        err = e.errors()[0]
        field = str(err["loc"][0]) if err["loc"] else None
        raise ConfigError(err["msg"], line=lines.get(field), field=field) from e

    logger.debug(f"Loaded {cfg.mode} configuration from {source}")
    return cfg


def load_config(path: str) -> RunConfig:
    """Read and validate a configuration file"""
    with open(path, encoding="utf-8") as stream:
        return parse_config_text(stream, source=path)


def expand_grid(cfg: RunConfig) -> List[Scenario]:
    """
    Cartesian product of the grid axes

    T varies fastest, then theta, jmax, sigma_v2 and sigma_u2.
    """
    scenarios = []
    for su2, sv2, jmax, theta, T in itertools.product(
        cfg.sigma_u2, cfg.sigma_v2, cfg.jmax, cfg.theta, cfg.T
    ):
        scenarios.append(Scenario(
            T=T,
            jmax=jmax,
            theta2=theta,
            sigma_u2=su2,
            sigma_v2=sv2,
            p=cfg.p,
            m=cfg.m,
            reps=cfg.reps,
            master_seed=cfg.seed or 0,
            a=cfg.a,
            rho=cfg.rho,
            b=cfg.b,
            ar_coef=cfg.ar_coef,
            sigma_eps2=cfg.sigma_eps2,
            search=cfg.search,
            include_clamped=cfg.include_clamped,
        ))
    return scenarios
