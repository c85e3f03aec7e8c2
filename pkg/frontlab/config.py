"""frontlab configuration: defaults, the run-config schema and its loader."""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from frontlab.errors import ConfigurationError
from frontlab.models import GasParameters, State, StateBox

# ---------------------------------------------------------------------------
# Schema version
# ---------------------------------------------------------------------------

CONFIG_SCHEMA_VERSION: int = 1
OUTPUT_SCHEMA_VERSION: int = 1

# ---------------------------------------------------------------------------
# Gas & box defaults (diatomic gas around the state (1, 0, 2.5))
# ---------------------------------------------------------------------------

DEFAULT_GAMMA: float = 1.4
DEFAULT_R_BAR: float = 1.0
DEFAULT_K_BAR: float = 1.0

DEFAULT_BOX_LOWER: tuple[float, float, float] = (0.7, -0.3, 2.0)
DEFAULT_BOX_UPPER: tuple[float, float, float] = (1.4, 0.3, 3.2)
DEFAULT_REFERENCE: tuple[float, float, float] = (1.0, 0.0, 2.5)
DEFAULT_EPSILON: float = 0.05
DEFAULT_SOLVABILITY_THRESHOLD: float = 0.5

# ---------------------------------------------------------------------------
# Scheme defaults
# ---------------------------------------------------------------------------

DEFAULT_NU: float = 0.01
DEFAULT_KAPPA: float = 4.0
DEFAULT_T_FINAL: float = 1.0
DEFAULT_MAX_INTERACTIONS: int = 20_000
#: lambda_hat defaults to this multiple of the largest sound speed in the box.
DEFAULT_LAMBDA_HAT_FACTOR: float = 2.5

DEFAULT_C1: float = 1.0
DEFAULT_KAPPA1: float = 1.0
DEFAULT_KAPPA2: float = 1.0

# ---------------------------------------------------------------------------
# Experiment defaults
# ---------------------------------------------------------------------------

DEFAULT_CHECKS: tuple[str, ...] = (
    "riemann",
    "glimm",
    "weights",
    "phi",
    "contact",
    "shock",
    "ledger",
    "rarefaction",
)
DEFAULT_NU_LADDER: tuple[float, ...] = (1e-2, 5e-3, 2.5e-3)
DEFAULT_PERTURBATION_LADDER: tuple[float, ...] = (0.0, 1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2)
DEFAULT_OFFSETS: tuple[float, ...] = (0.01, 0.02, 0.05)
DEFAULT_SEED: int = 0
DEFAULT_DATE: str = "undated"


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GasSection(_Section):
    gamma: float = Field(DEFAULT_GAMMA, gt=1.0)
    R_bar: float = Field(DEFAULT_R_BAR, gt=0.0)
    K_bar: float = Field(DEFAULT_K_BAR, gt=0.0)
    c_v: float | None = Field(None, gt=0.0)


class BoxSection(_Section):
    lower: tuple[float, float, float] = DEFAULT_BOX_LOWER
    upper: tuple[float, float, float] = DEFAULT_BOX_UPPER
    reference: tuple[float, float, float] = DEFAULT_REFERENCE
    epsilon: float = Field(DEFAULT_EPSILON, gt=0.0)
    solvability_threshold: float = Field(DEFAULT_SOLVABILITY_THRESHOLD, gt=0.0)


class SchemeSection(_Section):
    nu: float = Field(DEFAULT_NU, gt=0.0)
    lambda_hat: float | None = Field(None, gt=0.0)
    kappa: float = Field(DEFAULT_KAPPA, ge=0.0)
    np_threshold: float | None = Field(None, gt=0.0)
    speed_jitter: float | None = Field(None, ge=0.0)
    alpha: float | None = Field(None, gt=0.0)
    max_interactions: int = Field(DEFAULT_MAX_INTERACTIONS, gt=0)
    t_final: float = Field(DEFAULT_T_FINAL, gt=0.0)

    @model_validator(mode="after")
    def _jitter_within_nu(self) -> SchemeSection:
        if self.speed_jitter is not None and self.speed_jitter > self.nu:
            raise ValueError("speed_jitter must not exceed nu")
        return self


class WeightSection(_Section):
    C1: float = Field(DEFAULT_C1, gt=0.0)


class BlySection(_Section):
    kappa1: float = Field(DEFAULT_KAPPA1, gt=0.0)
    kappa2: float = Field(DEFAULT_KAPPA2, gt=0.0)


class DataSection(_Section):
    """Initial data family and its parameters."""

    kind: Literal["constant", "riemann", "steps", "bump", "random_steps"] = "random_steps"
    interval: tuple[float, float] = (-1.0, 1.0)
    left: tuple[float, float, float] | None = None
    right: tuple[float, float, float] | None = None
    jumps: list[float] = Field(default_factory=list)
    values: list[tuple[float, float, float]] = Field(default_factory=list)
    n_jumps: int = Field(6, ge=0)
    amplitude: float = Field(0.01, ge=0.0)
    component: int = Field(1, ge=0, le=2)
    samples: int = Field(2001, ge=3)

    @model_validator(mode="after")
    def _interval_ordered(self) -> DataSection:
        if self.interval[0] >= self.interval[1]:
            raise ValueError("data interval must be increasing")
        if self.jumps and len(self.values) != len(self.jumps) + 1:
            raise ValueError("steps data need one more value than jumps")
        return self


class ShiftSection(_Section):
    policy: Literal["none", "constant_offset", "trace_driven"] = "none"
    offset: float = 0.0
    refresh_dt: float | None = Field(None, gt=0.0)


class ExperimentSection(_Section):
    checks: list[str] = Field(default_factory=lambda: list(DEFAULT_CHECKS))
    n_runs: int = Field(4, gt=0)
    nu_ladder: list[float] = Field(default_factory=lambda: list(DEFAULT_NU_LADDER), min_length=1)
    perturbation_ladder: list[float] = Field(
        default_factory=lambda: list(DEFAULT_PERTURBATION_LADDER), min_length=1
    )
    offsets: list[float] = Field(default_factory=lambda: list(DEFAULT_OFFSETS), min_length=1)
    nu_fine: float = Field(2.5e-3, gt=0.0)
    R: float = Field(0.5, gt=0.0)
    tau: float = Field(0.25, gt=0.0)
    grid_n: int = Field(9, ge=2)
    sample_dt: float = Field(1e-3, gt=0.0)
    n_samples: int = Field(1000, gt=0)
    profile_times: list[float] = Field(default_factory=list)
    reference: Literal["front_tracking", "none"] = "front_tracking"

    @model_validator(mode="after")
    def _ladders_positive(self) -> ExperimentSection:
        if any(nu <= 0.0 for nu in self.nu_ladder):
            raise ValueError("nu_ladder entries must be positive")
        if any(eps < 0.0 for eps in self.perturbation_ladder):
            raise ValueError("perturbation_ladder entries must be non-negative")
        unknown = set(self.checks) - set(DEFAULT_CHECKS)
        if unknown:
            raise ValueError(f"unknown checks: {sorted(unknown)}")
        return self


class RiemannSection(_Section):
    left: tuple[float, float, float] = DEFAULT_REFERENCE
    right: tuple[float, float, float] = DEFAULT_REFERENCE
    curve_samples: int = Field(21, ge=2)


class RunConfig(_Section):
    """Validated run configuration.

    Unknown keys are rejected at every level. The model is frozen; derived
    runs are produced with :meth:`model_copy`.
    """

    schema_version: int = CONFIG_SCHEMA_VERSION
    seed: int = DEFAULT_SEED
    date: str = DEFAULT_DATE
    gas: GasSection = Field(default_factory=GasSection)
    box: BoxSection = Field(default_factory=BoxSection)
    scheme: SchemeSection = Field(default_factory=SchemeSection)
    weight: WeightSection = Field(default_factory=WeightSection)
    bly: BlySection = Field(default_factory=BlySection)
    data: DataSection = Field(default_factory=DataSection)
    shift: ShiftSection = Field(default_factory=ShiftSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    riemann: RiemannSection = Field(default_factory=RiemannSection)

    @model_validator(mode="after")
    def _schema_version(self) -> RunConfig:
        if self.schema_version != CONFIG_SCHEMA_VERSION:
            raise ValueError(
                f"schema_version {self.schema_version} is not supported "
                f"(expected {CONFIG_SCHEMA_VERSION})"
            )
        return self

    # --- builders ---

    def gas_parameters(self) -> GasParameters:
        return GasParameters(
            gamma=self.gas.gamma,
            r_bar=self.gas.R_bar,
            k_bar=self.gas.K_bar,
            c_v=self.gas.c_v,
        )

    def state_box(self) -> StateBox:
        return StateBox(
            lower=self.box.lower,
            upper=self.box.upper,
            reference=State(*self.box.reference),
            epsilon=self.box.epsilon,
            solvability_threshold=self.box.solvability_threshold,
        )

    def canonical(self) -> dict:
        """Plain-JSON dump used for hashing and provenance."""
        return self.model_dump(mode="json")


# ---------------------------------------------------------------------------
# Loader
# ---------------------------------------------------------------------------


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        location = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"{location}: {err['msg']}")
    return "; ".join(lines)


def parse_config(payload: dict) -> RunConfig:
    """Validate a raw mapping into a :class:`RunConfig`.

    Raises:
        ConfigurationError: On unknown keys, wrong types or failed checks.
    """
    try:
        config = RunConfig.model_validate(payload)
        # Building the gas and box runs the value-type checks too.
        config.gas_parameters()
        config.state_box()
    except ValidationError as exc:
        raise ConfigurationError(f"invalid configuration: {_format_validation_error(exc)}") from exc
    except ValueError as exc:
        raise ConfigurationError(f"invalid configuration: {exc}") from exc
    return config


def load_config(path: Path | str | None) -> RunConfig:
    """Load and validate a TOML run configuration.

    Args:
        path: Path to the TOML file, or ``None`` for the built-in defaults.

    Raises:
        ConfigurationError: If the file is missing, unreadable or invalid.
    """
    if path is None:
        return parse_config({})

    resolved = Path(path).resolve()
    if not resolved.is_file():
        raise ConfigurationError(f"config file does not exist: {resolved}")
    try:
        with open(resolved, "rb") as fh:
            payload = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {resolved}: {exc}") from exc
    return parse_config(payload)
