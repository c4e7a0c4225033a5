"""
Validated experiment configuration.

Each ``[section]`` of an experiment file maps onto one block model below;
``ExperimentConfig`` ties them together and runs the cross-field checks
(required blocks per experiment, matching dimensions, smoothness needed by
a probabilistic Lipschitz constant).
"""

from __future__ import annotations

from enum import Enum
from typing import Annotated, Literal

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from config import (
    BOUND_DT,
    DEFAULT_WORKERS,
    EPISODE_CAP,
    F_BAR,
    FINE_DT,
    GAIN_MARGIN,
    SUP_SAFETY_FACTOR,
    T_P,
)
from modules.control.simulation import ControlAffineSystem, ReferenceSpec, benchmark_system
from modules.control.tracking import ClosedLoop, benchmark_gains, closed_loop
from modules.errors import ConfigError
from modules.gp.domain import DomainBox
from modules.gp.kernels import KernelFamily, KernelSpec, parse_family
from utils.parsers import extract_seeds, parse_lipschitz, parse_tau


class Experiment(str, Enum):
    TRACKING = "tracking"
    DENSITY_SWEEP = "density_sweep"
    EPISODIC = "episodic"
    VALIDATE_BOUNDS = "validate_bounds"
    VALIDATE_LIPSCHITZ = "validate_lipschitz"


def _as_list(value):
    # configobj hands single values back as scalars and lists as lists
    if value is None or isinstance(value, (list, tuple)):
        return value
    return [value]


FloatList = Annotated[list[float], BeforeValidator(_as_list)]
PositiveList = Annotated[list[PositiveFloat], BeforeValidator(_as_list)]
Probability = Annotated[float, Field(gt=0.0, lt=1.0)]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class KernelBlock(_Block):
    family: str = KernelFamily.SQUARED_EXPONENTIAL.value
    signal_variance: PositiveFloat = 1.0
    lengthscales: PositiveList = [1.0, 1.0]

    @field_validator("family", mode="before")
    @classmethod
    def _known_family(cls, value):
        return parse_family(value).value

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def to_spec(self) -> KernelSpec:
        return KernelSpec(self.family, self.signal_variance, tuple(self.lengthscales))


class PlantBlock(_Block):
    system: Literal["benchmark"] = "benchmark"
    theta: FloatList | None = None
    gains: FloatList | None = None

    @property
    def dim(self) -> int:
        return 2

    def control_system(self) -> ControlAffineSystem:
        return benchmark_system()

    def loop(self) -> ClosedLoop:
        """Closed loop from explicit gains or from the ``(theta1, theta2)`` parameterization."""
        plant = self.control_system().plant
        if self.gains is not None:
            return closed_loop(plant, self.gains)
        if self.theta is None:
            raise ConfigError([("plant.theta", "either theta or gains is required")])
        return closed_loop(plant, benchmark_gains(*self.theta))

    @model_validator(mode="after")
    def _gain_shapes(self):
        if self.theta is not None and len(self.theta) != 2:
            raise ValueError("theta takes exactly two values (theta1, theta2)")
        if self.gains is not None and len(self.gains) != self.dim:
            raise ValueError(f"gains needs {self.dim} values")
        return self


class BoundBlock(_Block):
    tau: float | Literal["auto"] = 0.01
    delta: Probability = 0.01
    lipschitz: float | Literal["probabilistic"] = 2.0
    lipschitz_delta: Probability | None = None
    box_edge: PositiveFloat = 10.0
    box_center: FloatList | None = None

    @field_validator("tau", mode="before")
    @classmethod
    def _tau(cls, value):
        return parse_tau(value)

    @field_validator("lipschitz", mode="before")
    @classmethod
    def _lipschitz(cls, value):
        return parse_lipschitz(value)

    @model_validator(mode="after")
    def _probabilistic_needs_delta(self):
        if self.lipschitz == "probabilistic" and self.lipschitz_delta is None:
            raise ValueError("lipschitz = probabilistic needs lipschitz_delta")
        return self

    def box(self, dim: int) -> DomainBox:
        return DomainBox(dim, self.box_edge, tuple(self.box_center or ()))


class ReferenceBlock(_Block):
    amplitude: float = 2.0
    frequency: PositiveFloat = 1.0

    def to_spec(self, dim: int) -> ReferenceSpec:
        return ReferenceSpec(self.amplitude, self.frequency, dim)


class TrainingBlock(_Block):
    noise_variance: PositiveFloat = 0.01
    lower: FloatList = [0.0, -4.0]
    upper: FloatList = [3.0, 4.0]
    points_per_axis: PositiveInt = 5
    file: str | None = None

    @model_validator(mode="after")
    def _ordered_corners(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper need the same number of coordinates")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("lower must not exceed upper")
        return self

    def grid(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, self.points_per_axis) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])


class SimulationBlock(_Block):
    horizon: PositiveFloat = T_P
    fine_dt: PositiveFloat = FINE_DT
    bound_dt: PositiveFloat = BOUND_DT
    sup_safety: Annotated[float, Field(ge=1.0)] = SUP_SAFETY_FACTOR

    @model_validator(mode="after")
    def _steps_fit(self):
        if self.fine_dt > self.horizon:
            raise ValueError("fine_dt must not exceed horizon")
        return self


class DensitySweepBlock(_Block):
    pitches: PositiveList = [2.0, 1.0, 0.5, 0.4, 0.25]
    kappa: PositiveFloat = 10.0
    lower: FloatList = [-4.0, -4.0]
    upper: FloatList = [4.0, 4.0]
    f_bar: PositiveFloat = F_BAR
    density_points: PositiveInt = 64

    @field_validator("pitches")
    @classmethod
    def _at_least_two(cls, value):
        if len(value) < 2:
            raise ValueError("a slope needs at least two pitches")
        return value


class EpisodicBlock(_Block):
    target_error: PositiveFloat = 0.025
    xi: Probability = 0.95
    episode_cap: PositiveInt = EPISODE_CAP
    gain_margin: Annotated[float, Field(ge=1.0)] = GAIN_MARGIN
    density_points: PositiveInt = 64


class ValidationBlock(_Block):
    trials: PositiveInt = 200
    grid_points: Annotated[int, Field(ge=2)] = 41
    training_points: PositiveInt = 25
    pitch: PositiveFloat = 1.0 / 64.0
    required_coverage: Annotated[float, Field(gt=0.0, le=1.0)] = 0.99


# Blocks each experiment reads; missing ones are reported by name.
REQUIRED_BLOCKS: dict[Experiment, tuple[str, ...]] = {
    Experiment.TRACKING: ("kernel", "plant", "bound", "reference", "training", "simulation"),
    Experiment.DENSITY_SWEEP: ("kernel", "plant", "bound", "reference", "training", "simulation", "density_sweep"),
    Experiment.EPISODIC: ("kernel", "plant", "bound", "reference", "training", "simulation", "episodic"),
    Experiment.VALIDATE_BOUNDS: ("kernel", "bound", "training", "validation"),
    Experiment.VALIDATE_LIPSCHITZ: ("kernel", "bound", "validation"),
}

CONTROL_EXPERIMENTS = (Experiment.TRACKING, Experiment.DENSITY_SWEEP, Experiment.EPISODIC)


class ExperimentConfig(_Block):
    experiment: Experiment
    seeds: list[int] = [0]
    output: str | None = None
    workers: PositiveInt = DEFAULT_WORKERS

    kernel: KernelBlock | None = None
    plant: PlantBlock | None = None
    bound: BoundBlock | None = None
    reference: ReferenceBlock | None = None
    training: TrainingBlock | None = None
    simulation: SimulationBlock | None = None
    density_sweep: DensitySweepBlock | None = None
    episodic: EpisodicBlock | None = None
    validation: ValidationBlock | None = None

    @field_validator("seeds", mode="before")
    @classmethod
    def _seed_ranges(cls, value):
        if isinstance(value, int):
            return [value]
        if isinstance(value, (list, tuple)):
            if all(isinstance(v, int) for v in value):
                return list(value)
            value = ",".join(str(v) for v in value)
        return extract_seeds(str(value))

    @model_validator(mode="after")
    def _cross_checks(self):
        missing = [name for name in REQUIRED_BLOCKS[self.experiment] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.experiment.value} needs the block(s): {', '.join(missing)}")

        spec_dim = self.kernel.dim
        family = parse_family(self.kernel.family)
        if self.bound.lipschitz == "probabilistic" and family is KernelFamily.MATERN32:
            raise ValueError(
                "lipschitz = probabilistic needs a kernel with fourth-order partials; "
                "matern32 sample paths are not smooth enough"
            )
        if self.bound.box_center is not None and len(self.bound.box_center) != spec_dim:
            raise ValueError(f"bound.box_center needs {spec_dim} coordinates")
        if self.experiment in CONTROL_EXPERIMENTS:
            if len(self.training.lower) != spec_dim:
                raise ValueError(f"training corners need {spec_dim} coordinates")
            if spec_dim != self.plant.dim:
                raise ValueError(f"kernel has {spec_dim} lengthscales, the plant state is {self.plant.dim}-D")
            if family is KernelFamily.LINEAR:
                raise ValueError("tracking certificates need a stationary kernel")
        if self.experiment is Experiment.TRACKING and self.plant.theta is None and self.plant.gains is None:
            raise ValueError("tracking needs plant.theta or plant.gains")
        if self.experiment is Experiment.DENSITY_SWEEP and len(self.density_sweep.lower) != spec_dim:
            raise ValueError(f"density_sweep corners need {spec_dim} coordinates")
        if self.experiment is Experiment.VALIDATE_LIPSCHITZ:
            if spec_dim != 1:
                raise ValueError("validate_lipschitz draws 1-D prior functions; use one lengthscale")
            if self.bound.lipschitz_delta is None:
                raise ValueError("validate_lipschitz needs bound.lipschitz_delta")
            if family is KernelFamily.MATERN32:
                raise ValueError("validate_lipschitz needs a kernel with fourth-order partials")
        return self

    def dump(self) -> dict:
        return self.model_dump(mode="json", exclude_none=True)


def _field_path(loc: tuple) -> str:
    parts = [str(p) for p in loc if not isinstance(p, int)]
    return ".".join(parts) or "<root>"


def validate_config(data: dict) -> ExperimentConfig:
    """Parse a plain dict into ``ExperimentConfig`` or raise ``ConfigError`` per field."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        diagnostics = []
        for err in exc.errors():
            msg = err["msg"].removeprefix("Value error, ")
            diagnostics.append((_field_path(err["loc"]), msg))
        raise ConfigError(diagnostics) from None
