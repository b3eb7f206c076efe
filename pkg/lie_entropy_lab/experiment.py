import hashlib
import json
from datetime import datetime
from fractions import Fraction
from typing import Annotated, Any

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    ValidationError,
    field_validator,
    model_validator,
)

from lie_entropy_lab.config import ARTIFACT_VERSION, DEDUP_TOL, DEFAULT_SIGMAS, SUPPORT_CAP
from lie_entropy_lab.errors import ConfigError
from lie_entropy_lab.groups import LieGroupModel, ModelName, element, pair_distances
from lie_entropy_lab.kernels import SmoothingKernel
from lie_entropy_lab.logger import logger
from lie_entropy_lab.measures import FinSuppMeasure, convolution_power, separation_profile
from lie_entropy_lab.montecarlo import RngStream
from lie_entropy_lab.walks import StoppingKind, StoppingTimeSpec

SANOV_PAIR = [
    [[1, 2], [0, 1]],
    [[1, 0], [2, 1]],
]


def parse_scalar(value: Any) -> Fraction | float:
    """JSON ints and "p/q" strings stay exact; floats and decimal strings become floats."""
    if isinstance(value, bool):
        raise ValueError("Booleans are not numbers here.")
    if isinstance(value, Fraction | float):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text) if "/" in text else float(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"Not a rational or decimal literal: {value!r}") from exc
    raise ValueError(f"Expected a number, got {type(value).__name__}.")


def format_scalar(value: Fraction | float) -> int | str | float:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return value.numerator
        return f"{value.numerator}/{value.denominator}"
    return value


Scalar = Annotated[Any, BeforeValidator(parse_scalar), PlainSerializer(format_scalar)]
Entries = list[list[Scalar]] | list[Scalar]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_default=True)


class ModelBlock(StrictModel):
    name: ModelName = ModelName.sl2r
    dim: int | None = None

    def create(self) -> LieGroupModel:
        return LieGroupModel.create(self.name, self.dim)


class MeasureBlock(StrictModel):
    generators: list[Entries] = Field(default_factory=lambda: [list(g) for g in SANOV_PAIR])
    weights: list[Scalar] | None = None
    power: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def validate_weights(self):
        if not self.generators:
            raise ValueError("A measure needs at least one generator.")
        if self.weights is not None and len(self.weights) != len(self.generators):
            raise ValueError("One weight per generator is required.")
        return self


class KernelBlock(StrictModel):
    a: float = Field(default=2.0, ge=1)
    scales: list[float] = Field(default_factory=lambda: [0.01, 0.02, 0.04])

    @field_validator("scales")
    def validate_scales(cls, v):
        if not v or any(r <= 0 for r in v):
            raise ValueError("Kernel scales must be positive.")
        return v


class McBlock(StrictModel):
    n_samples: int = Field(default=20000, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)


class TolerancesBlock(StrictModel):
    sigmas: float = DEFAULT_SIGMAS
    dedup_tol: float = DEDUP_TOL

    @model_validator(mode="after")
    def validate_positive(self):
        for name in ("sigmas", "dedup_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"constraint tolerances.{name} > 0 violated")
        return self


class ConstantsBlock(StrictModel):
    c_G: float = Field(default=1.0, gt=0)
    c_err: float = Field(default=1.0, ge=0)
    chart_bias: float = Field(default=1.0, ge=0)
    product_bound: float = Field(default=10.0, gt=0)
    variance_bound: float = Field(default=10.0, gt=0)
    increase_slack: float = Field(default=1.0, ge=0)
    jacobian_bound: float = Field(default=1.0, gt=0)


class SeparationBlock(StrictModel):
    n_max: int = Field(default=6, ge=1)
    support_cap: int = Field(default=SUPPORT_CAP, gt=0)


class StoppingBlock(StrictModel):
    kind: StoppingKind = StoppingKind.renewal
    schedule: list[Scalar] = Field(default_factory=lambda: [Fraction(t) for t in (4, 6, 8)])
    costs: dict[int, Scalar] | None = Field(
        default_factory=lambda: {0: Fraction(1), 1: Fraction(2)}
    )
    cap: int = Field(default=64, gt=0)


class ScalesBlock(StrictModel):
    r_lo: float = Field(default=0.005, gt=0)
    r_hi: float = Field(default=0.05, gt=0)
    grid_size: int = Field(default=16, ge=8)
    A: float = Field(default=2.0, gt=1)
    r1: float = Field(default=0.005, gt=0)
    r2: float = Field(default=0.02, gt=0)
    required_gap: float = 0.0
    shifts: list[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_ranges(self):
        if not self.r_lo < self.r_hi:
            raise ValueError("constraint scales.r_lo < scales.r_hi violated")
        if not self.r1 < self.r2:
            raise ValueError("constraint scales.r1 < scales.r2 violated")
        return self


class WalkBlock(StrictModel):
    a: float = Field(default=2.0, ge=1)
    S: float | None = Field(default=None, gt=0)
    S_margin: float = Field(default=1.1, gt=1)
    epsilon: float = Field(default=0.1, gt=0)
    ldp_epsilon: float = Field(default=0.2, gt=0)
    n_grid: list[int] | None = None
    r_floor: float = Field(default=1e-6, gt=0)
    entropy_horizon: int | None = Field(default=None, ge=1)


class ExperimentConfig(StrictModel):
    model: ModelBlock = Field(default_factory=ModelBlock)
    measure: MeasureBlock = Field(default_factory=MeasureBlock)
    kernel: KernelBlock = Field(default_factory=KernelBlock)
    mc: McBlock = Field(default_factory=McBlock)
    tolerances: TolerancesBlock = Field(default_factory=TolerancesBlock)
    constants: ConstantsBlock = Field(default_factory=ConstantsBlock)
    separation: SeparationBlock = Field(default_factory=SeparationBlock)
    stopping: StoppingBlock = Field(default_factory=StoppingBlock)
    scales: ScalesBlock = Field(default_factory=ScalesBlock)
    walk: WalkBlock = Field(default_factory=WalkBlock)

    @model_validator(mode="after")
    def validate_chart_constraints(self):
        chart = self.model.create().chart_radius
        a = self.kernel.a

        for r in self.kernel.scales:
            if a * r >= chart:
                raise ValueError(
                    f"constraint a*r < chart_radius violated: a*r = {a * r!r}, "
                    f"chart_radius = {chart!r}"
                )

        if 2 * a * self.scales.r_hi >= chart:
            raise ValueError(
                f"constraint 2*a*r_hi < chart_radius violated: {2 * a * self.scales.r_hi!r}"
            )

        if 4 * a * self.scales.r2 >= chart:
            raise ValueError(
                f"constraint 4*a*r2 < chart_radius violated: {4 * a * self.scales.r2!r}"
            )

        return self

    @model_validator(mode="after")
    def validate_renewal_costs(self):
        if self.stopping.kind is not StoppingKind.renewal:
            return self

        expected = set(range(len(self.measure.generators)))
        if self.stopping.costs is None or set(self.stopping.costs) != expected:
            raise ValueError(
                "constraint stopping.costs keyed by generator index "
                f"0..{len(expected) - 1} violated"
            )
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


class RunManifest(BaseModel):
    command: str
    config_hash: str
    seed: int
    threads: int
    artifact_version: str = ARTIFACT_VERSION
    started_at: datetime
    duration_seconds: float
    outputs: list[str]

    @field_validator("started_at")
    def validate_timezone(cls, v):
        if v.tzinfo is None:
            raise ValueError("Timestamps must be timezone aware.")
        return v


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        logger.info("No config given, using the default experiment")
        return ExperimentConfig()

    try:
        with open(path) as config_file:
            data = json.load(config_file)
    except (OSError, json.JSONDecodeError) as exc:
        logger.error(f"Could not read config {path!r}")
        raise ConfigError(f"{path}: {exc}") from exc

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        logger.error(f"Config {path!r} rejected at {location!r}")
        raise ConfigError(f"{location}: {first['msg']}") from exc


def build_model(config: ExperimentConfig) -> LieGroupModel:
    return config.model.create()


def build_generators(config: ExperimentConfig) -> FinSuppMeasure:
    model = build_model(config)
    elements = [element(model, entries) for entries in config.measure.generators]
    if config.measure.weights is None:
        return FinSuppMeasure.uniform(elements)
    return FinSuppMeasure.from_pairs(
        model,
        list(zip(elements, config.measure.weights, strict=True)),
        dedup_tol=config.tolerances.dedup_tol,
    )


def generator_atom_indices(config: ExperimentConfig, step: FinSuppMeasure) -> list[int]:
    """Atom of the step measure that each configured generator ended up in, in config order."""
    atoms = step.elements
    indices = []
    for entries in config.measure.generators:
        generator = element(step.model, entries)
        if generator in atoms:
            indices.append(atoms.index(generator))
            continue
        # merged into a nearby atom within dedup_tol
        values, far = pair_distances([generator] * len(atoms), atoms)
        indices.append(int(np.argmin(np.where(far, np.inf, values))))
    return indices


def build_stopping(config: ExperimentConfig, step: FinSuppMeasure) -> StoppingTimeSpec:
    """The stopping spec with renewal costs moved from generator indices to atom indices."""
    block = config.stopping
    if block.kind is StoppingKind.deterministic:
        return StoppingTimeSpec(kind=block.kind, schedule=block.schedule, cap=block.cap)

    costs: dict[int, Scalar] = {}
    for generator_index, atom_index in enumerate(generator_atom_indices(config, step)):
        cost = block.costs[generator_index]
        if costs.setdefault(atom_index, cost) != cost:
            logger.error(f"Generators merged into atom {atom_index} carry different costs")
            raise ConfigError(
                f"stopping.costs: generator {generator_index} merges with another generator "
                "of a different cost"
            )
    return StoppingTimeSpec(
        kind=StoppingKind.renewal, schedule=block.schedule, costs=costs, cap=block.cap
    )


def build_measure(config: ExperimentConfig) -> FinSuppMeasure:
    """The step measure raised to the configured convolution power."""
    step = build_generators(config)
    if config.measure.power == 1:
        return step
    return convolution_power(step, config.measure.power, config.separation.support_cap)


def build_kernels(config: ExperimentConfig) -> list[SmoothingKernel]:
    model = build_model(config)
    return [SmoothingKernel(model=model, a=config.kernel.a, r=r) for r in config.kernel.scales]


def build_rng(config: ExperimentConfig, seed: int | None = None) -> RngStream:
    return RngStream(seed=config.mc.seed if seed is None else seed)


def build_walk_exponent(config: ExperimentConfig, step: FinSuppMeasure) -> float:
    """The configured S, or S_margin times the largest S_n over the separation range."""
    if config.walk.S is not None:
        return config.walk.S
    separation = config.separation
    profile = separation_profile(step, separation.n_max, separation.support_cap)
    return config.walk.S_margin * profile.S_mu_estimate


def build_entropy_horizon(config: ExperimentConfig) -> int:
    """Convolution powers used for the h_mu estimate; defaults to the separation range."""
    return config.walk.entropy_horizon or config.separation.n_max
