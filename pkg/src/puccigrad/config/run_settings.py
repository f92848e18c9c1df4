"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from puccigrad.exceptions import ConfigError
from puccigrad.grid.boundary import BoundarySpec, ConstantBoundary
from puccigrad.grid.domains import DiskDomain, Domain
from puccigrad.levelset.measure import MonotoneRHS
from puccigrad.operators.pucci import Ellipticity
from puccigrad.solvers.outer_fixedpoint import ProblemSpec, SchedulePlan

Mode = Literal["solve", "oracle-compare", "convergence-study", "property-check"]


class ProblemSettings(BaseModel):
    """
    Pydantic model for the problem block. ``f`` is a list of (s, f(s))
    breakpoints.
    The model is configured to forbid extra fields that are not defined in the model.
    """

    model_config = ConfigDict(extra="forbid")
    gamma: float = Field(default=1.0, ge=0.0)
    lam: float = Field(default=1.0, gt=0.0)
    Lam: float = Field(default=1.0, gt=0.0)
    f: MonotoneRHS = MonotoneRHS.constant(1.0)
    g: BoundarySpec = ConstantBoundary(value=0.0)
    p: float | None = None

    @field_validator("f", mode="before")
    @classmethod
    def breakpoints_from_list(cls, value: Any) -> Any:
        if isinstance(value, (int, float)):
            return {"breakpoints": [(0.0, float(value))]}
        if isinstance(value, (list, tuple)):
            return {"breakpoints": value}
        return value

    @model_validator(mode="after")
    def check_ellipticity(self):
        if not self.lam <= self.Lam:
            raise ValueError(f"Ellipticity needs lam <= Lam, got lam={self.lam}, Lam={self.Lam}.")
        return self

    def to_problem(self, domain: Domain) -> ProblemSpec:
        return ProblemSpec(
            gamma=self.gamma,
            ell=Ellipticity(lam=self.lam, Lam=self.Lam),
            f=self.f,
            g=self.g,
            domain=domain,
            p=self.p,
        )


class AcceptanceSettings(BaseModel):
    """
    Pydantic model for the thresholds of the oracle-compare and
    convergence-study verdicts.
    The model is configured to forbid extra fields that are not defined in the model.
    """

    model_config = ConfigDict(extra="forbid")
    tolerance: float = Field(default=5e-2, gt=0.0)
    oracle_samples: int = Field(default=4096, ge=256)
    oracle_residual_tol: float = Field(default=1e-5, gt=0.0)
    require_monotone: bool = True
    min_error_ratio: float | None = Field(default=None, gt=0.0)
    check_cauchy: bool = False
    # eps0 of a second ladder sharing eps_min whose result must agree
    alternate_eps0: float | None = Field(default=None, gt=0.0)


class PropertyCheckSettings(BaseModel):
    """
    Pydantic model for the sizes of the seeded property suites.
    The model is configured to forbid extra fields that are not defined in the model.
    """

    model_config = ConfigDict(extra="forbid")
    resolution: int = Field(default=16, ge=8)
    matrices: int = Field(default=1000, ge=1)
    fields: int = Field(default=50, ge=1)
    max_principle_pairs: int = Field(default=20, ge=1)
    comparison_pairs: int = Field(default=10, ge=1)
    eps: float = Field(default=1e-2, gt=0.0)


class RunConfig(BaseSettings):
    """
    Pydantic model for a puccigrad run.
    The model is configured to forbid extra fields that are not defined in the model.
    Every field can be set through PUCCIGRAD_<FIELD> environment variables,
    nested fields through PUCCIGRAD_<BLOCK>__<FIELD>.
    """

    model_config = ConfigDict(extra="forbid", env_nested_delimiter="__", env_prefix="PUCCIGRAD_")

    mode: Mode = "solve"
    domain: Domain = DiskDomain()
    resolutions: list[int] = [32]
    problem: ProblemSettings = ProblemSettings()
    schedule: SchedulePlan = SchedulePlan()
    acceptance: AcceptanceSettings = AcceptanceSettings()
    property_check: PropertyCheckSettings = PropertyCheckSettings()
    output_dir: str = "puccigrad_out"
    seed: int = 0
    threads: int = Field(default=1, ge=1)
    log_path: str | None = None
    debug: bool = False

    @field_validator("resolutions")
    @classmethod
    def check_resolutions(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("At least one resolution is required.")
        for k, n in enumerate(value):
            if n < 8:
                raise ValueError(f"Resolution {k} must be at least 8, got {n}.")
        return value

    @model_validator(mode="after")
    def check_dimension(self):
        g = self.problem.g
        if getattr(g, "kind", None) == "affine" and len(g.gradient) != self.domain.dimension:
            raise ValueError(
                f"Affine boundary gradient has {len(g.gradient)} entries, "
                f"the domain is {self.domain.dimension}-dimensional."
            )
        if self.problem.p is not None and not self.problem.p > self.domain.dimension:
            raise ValueError(
                f"Integrability exponent p must exceed N={self.domain.dimension}, got {self.problem.p}."
            )
        return self

    def problem_spec(self) -> ProblemSpec:
        return self.problem.to_problem(self.domain)

    def plan(self) -> SchedulePlan:
        """
        The schedule with the run's thread count applied.
        """
        return self.schedule.model_copy(update={"threads": self.threads})

    def echo(self) -> dict:
        """
        The configuration as written to the run report. Runtime knobs that do
        not change results (threads, logging) are left out so that reports
        compare equal across them.
        """
        return self.model_dump(mode="json", exclude={"threads", "log_path", "debug"})


def _line_of(node: yaml.Node | None, loc: tuple) -> int | None:
    """
    1-based line of the deepest key of ``loc`` found in a composed YAML tree.
    Location parts that are not keys (union tags) are skipped.
    """
    line = None
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                if key_node.value == str(part):
                    line = key_node.start_mark.line + 1
                    node = value_node
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if part < len(node.value):
                node = node.value[part]
                line = node.start_mark.line + 1
    return line


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """
    Load and validate a run configuration.

    Parameters
    ----------
    path : str | Path | None
        YAML configuration file; defaults only if None.
    **overrides
        Top-level fields replacing the file's values.

    Returns
    -------
    RunConfig
        The fully validated configuration.

    Raises
    ------
    ConfigError
        On a YAML syntax error or the first violated constraint, with the
        line of the offending key when it can be located.
    """
    node, data = None, {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"Cannot read configuration {path}: {e}") from e
        try:
            node = yaml.compose(text)
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            problem = getattr(e, "problem", None) or str(e)
            raise ConfigError(
                f"YAML parse error: {problem}", line=mark.line + 1 if mark else None
            ) from e
        if not isinstance(data, dict):
            raise ConfigError("Configuration must be a mapping.", line=1)

    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**data)
    except ValidationError as e:
        error = e.errors()[0]
        message = error["msg"].removeprefix("Value error, ")
        where = ".".join(str(part) for part in error["loc"])
        raise ConfigError(
            f"{where}: {message}" if where else message, line=_line_of(node, error["loc"])
        ) from e
