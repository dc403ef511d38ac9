import os
from pathlib import Path
from typing import Literal, Annotated, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, NonNegativeInt, field_validator, \
    model_validator

from ebdg.numerics.timeint import Scheme
from ebdg.utils import parse_fraction

CaseName = Literal["advect1d", "shock1d", "sod_periodic", "dmr", "cylinder"]
MeshBoundaryKind = Literal["supersonic_inflow", "outflow_extrapolate", "slip_wall", "farfield"]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# Metadata
class Metadata(Section):
    project_name: str = "EBDG run"
    description: str = ""


# Setup
class PrimitiveSpec(Section):
    rho: PositiveFloat
    velocity: list[float]
    pressure: PositiveFloat

    @field_validator("velocity")
    @classmethod
    def validate_velocity(cls, v: list[float]) -> list[float]:
        if len(v) not in (1, 2):
            raise ValueError(f"Velocity needs one or two components, got {len(v)}.")
        return v


class BoundarySpec(Section):
    kind: MeshBoundaryKind
    state: PrimitiveSpec | None = None

    @model_validator(mode="after")
    def validate_state(self):
        if self.kind in ("supersonic_inflow", "farfield") and self.state is None:
            raise ValueError(f"Boundary kind '{self.kind}' needs a prescribed state.")
        return self


class CaseMode(Section):
    mode: Literal["case"] = "case"
    case: CaseName
    h: PositiveFloat | None = None
    mach: float = Field(default=2.0, ge=1.0)
    end_time: float | None = Field(default=None, ge=0.0)
    s_ref: float | None = None
    element: Literal["quad", "triangle"] = "quad"
    level: PositiveInt = 1

    @field_validator("h", mode="before")
    @classmethod
    def parse_h(cls, v):
        if v is None or isinstance(v, (int, float)):
            return v
        return parse_fraction(v)


class MeshMode(Section):
    mode: Literal["mesh"] = "mesh"
    mesh_path: str
    boundaries: dict[str, BoundarySpec]
    initial_state: PrimitiveSpec
    end_time: float = Field(ge=0.0)

    @model_validator(mode="after")
    def validate_dimensions(self):
        # loaded meshes are two-dimensional
        states = [self.initial_state] + [b.state for b in self.boundaries.values() if b.state is not None]
        wrong = [s for s in states if len(s.velocity) != 2]
        if wrong:
            raise ValueError("Mesh runs need two velocity components in every state.")
        return self


# Physics and discretization
class Gas(Section):
    gamma: float = Field(default=1.4, gt=1.0)
    s_ref: float = 0.0


class Discretization(Section):
    p: int = Field(default=2, ge=1, le=4)
    scheme: str = "ssprk33"
    safety: float = Field(default=0.8, gt=0.0, le=1.0)
    cfl_route: Literal["reference", "element"] = "reference"
    interpolation: Literal["lagrange", "full"] = "lagrange"

    @field_validator("scheme")
    @classmethod
    def normalize_scheme(cls, v: str) -> str:
        return Scheme.from_name(v).kind


class Limiter(Section):
    mode: Literal["entropy", "positivity", "none"] = "entropy"
    strategy: Literal["local", "global"] = "local"
    global_bound: float | Literal["initial"] | None = None
    density_floor: PositiveFloat = 1e-13
    epsilon_threshold: float = Field(default=1e-3, ge=0.0)
    strict_mean_check: bool = True

    @model_validator(mode="after")
    def validate_global_bound(self):
        if self.strategy == "global" and self.global_bound is None:
            raise ValueError("The global strategy needs 'global_bound' (a value or 'initial').")
        return self


class Run(Section):
    max_steps: PositiveInt | None = None
    steady_tolerance: PositiveFloat | None = None
    check_conservation: bool = False


# Output
class Output(Section):
    output_directory: str = "./output"
    formats: set[Literal["csv", "parquet"]] = {"csv", "parquet"}
    field_interval: NonNegativeInt = 0
    summary_interval: PositiveInt = 1
    plot_resolution: int | None = Field(default=None, ge=2)


# Processing
class Processing(Section):
    enable_parallel_processing: bool = True
    max_workers: PositiveInt = max(1, (os.cpu_count() or 1) - 1)

    @field_validator("max_workers")
    @classmethod
    def cap_max_workers(cls, v: int) -> int:
        cpu_count = os.cpu_count()
        if cpu_count and v > cpu_count:
            return cpu_count
        return v


# Top level
class RunConfig(Section):
    metadata: Metadata = Metadata()
    # case or mesh runs are mutually exclusive; tables need no setup
    setup: Annotated[Union[CaseMode, MeshMode], Field(discriminator="mode")] | None = None
    gas: Gas = Gas()
    discretization: Discretization = Discretization()
    limiter: Limiter = Limiter()
    run: Run = Run()
    output: Output = Output()
    processing: Processing = Processing()

    @property
    def s_ref(self) -> float:
        if self.setup is not None and self.setup.mode == "case" and self.setup.s_ref is not None:
            return self.setup.s_ref
        return self.gas.s_ref


# Functions
def validate_configuration(file_path: str | Path) -> RunConfig:
    path = Path(file_path)

    if not path.exists():
        raise FileNotFoundError(f"Configuration file not found at {path}.")
    if not path.is_file():
        raise ValueError(f"Configuration file at {path} is not a file.")

    with path.open() as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise ValueError(f"Configuration file at {path} does not contain a mapping.")
    return RunConfig.model_validate(data)
