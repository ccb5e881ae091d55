"""Run configuration documents for the robust loss lab."""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass
from fractions import Fraction
import json
import math
from pathlib import Path
from typing import Any

import voluptuous as vol  # type: ignore[import-untyped]

from .const import (
    CONF_INTERP,
    CONF_LOSS_TABLE,
    CONF_TOYFIT,
    DEFAULT_ALPHA_GRID,
    DEFAULT_DELTA,
    DEFAULT_FIT_DEGREE_COUNT,
    DEFAULT_ITERATIONS,
    DEFAULT_LOSS_TABLE_ALPHAS,
    DEFAULT_LOSS_TABLE_POINTS,
    DEFAULT_LOSS_TABLE_X_MAX,
    DEFAULT_LOSS_TABLE_X_MIN,
    DEFAULT_LR_GRID,
    DEFAULT_N_SAMPLES,
    DEFAULT_NOISE_SCALES,
    DEFAULT_REPEATS,
    DEFAULT_SEED,
    DEFAULT_THETA_STAR,
    DEFAULT_WORKERS,
    _LOGGER,
)
from .distributions import NoiseFamily, NoiseSpec
from .exceptions import ConfigValidationError, InvalidParameterError
from .interp import (
    COORDINATE_ORDER,
    BoxRegressionConfig,
    CoordinateLossSpec,
    LossScaling,
    parse_rational,
)
from .losses import BoundSide, LossForm
from .presets import PRESETS
from .toyfit import PolyModel, ToyConfig

CONF_ALPHAS = "alphas"
CONF_X_MIN = "x_min"
CONF_X_MAX = "x_max"
CONF_N_POINTS = "n_points"

CONF_THETA_STAR = "theta_star"
CONF_FIT_DEGREE_COUNT = "fit_degree_count"
CONF_N_SAMPLES = "n_samples"
CONF_DELTA = "delta"
CONF_NOISE = "noise"
CONF_NOISE_SCALES = "noise_scales"
CONF_SEED = "seed"
CONF_ALPHA_GRID = "alpha_grid"
CONF_LR_GRID = "lr_grid"
CONF_ITERATIONS = "iterations"
CONF_REPEATS = "repeats"
CONF_LOSS_FORM = "loss_form"
CONF_WORKERS = "workers"

CONF_CONFIGS = "configs"
CONF_PRESET = "preset"
CONF_BOUND = "bound"
CONF_NAME = "name"
CONF_SCALING = "scaling"
CONF_COORDINATES = "coordinates"
CONF_LAMBDA = "lambda"
CONF_ALPHA = "alpha"
CONF_SIGMA = "sigma"
CONF_MU = "mu"


def _not_bool(value: Any) -> Any:
    if isinstance(value, bool):
        raise vol.Invalid(f"expected a number, got {value}")
    return value


def _finite(value: float) -> float:
    if not math.isfinite(value):
        raise vol.Invalid(f"expected a finite number, got {value}")
    return value


def _number(min_value: float | None = None, min_included: bool = True) -> Callable:
    return vol.All(
        _not_bool,
        vol.Coerce(float),
        _finite,
        vol.Range(min=min_value, min_included=min_included),
    )


def _counter(min_value: int, max_value: int | None = None) -> Callable:
    return vol.All(_not_bool, int, vol.Range(min=min_value, max=max_value))


def _rational(value: Any) -> Fraction:
    try:
        return parse_rational(value)
    except InvalidParameterError as err:
        raise vol.Invalid(str(err)) from err


def _positive_rational(value: Any) -> Fraction:
    parsed = _rational(value)
    if parsed <= 0:
        raise vol.Invalid(f"expected a positive rational, got {value}")
    return parsed


_POSITIVE = _number(0.0, min_included=False)
_NON_NEGATIVE = _number(0.0)

LOSS_TABLE_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_ALPHAS, default=list(DEFAULT_LOSS_TABLE_ALPHAS)): vol.All(
            [_POSITIVE], vol.Length(min=1)
        ),
        vol.Optional(CONF_X_MIN, default=DEFAULT_LOSS_TABLE_X_MIN): _number(),
        vol.Optional(CONF_X_MAX, default=DEFAULT_LOSS_TABLE_X_MAX): _number(),
        vol.Optional(CONF_N_POINTS, default=DEFAULT_LOSS_TABLE_POINTS): _counter(2),
    }
)

TOYFIT_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_THETA_STAR, default=list(DEFAULT_THETA_STAR)): vol.All(
            [_number()], vol.Length(min=1)
        ),
        vol.Optional(CONF_FIT_DEGREE_COUNT, default=DEFAULT_FIT_DEGREE_COUNT): _counter(1),
        vol.Optional(CONF_N_SAMPLES, default=DEFAULT_N_SAMPLES): _counter(1),
        vol.Optional(CONF_DELTA, default=DEFAULT_DELTA): _POSITIVE,
        vol.Optional(CONF_NOISE, default=NoiseFamily.LAPLACE.value): vol.In(
            [family.value for family in NoiseFamily]
        ),
        vol.Optional(CONF_NOISE_SCALES, default=list(DEFAULT_NOISE_SCALES)): vol.All(
            [_NON_NEGATIVE], vol.Length(min=1)
        ),
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): _counter(0, 2**64 - 1),
        vol.Optional(CONF_ALPHA_GRID, default=list(DEFAULT_ALPHA_GRID)): vol.All(
            [_POSITIVE], vol.Length(min=1)
        ),
        vol.Optional(CONF_LR_GRID, default=list(DEFAULT_LR_GRID)): vol.All(
            [_POSITIVE], vol.Length(min=1)
        ),
        vol.Optional(CONF_ITERATIONS, default=DEFAULT_ITERATIONS): _counter(1),
        vol.Optional(CONF_REPEATS, default=DEFAULT_REPEATS): _counter(1),
        vol.Optional(CONF_LOSS_FORM, default=LossForm.HUBER.value): vol.In(
            [form.value for form in LossForm]
        ),
        vol.Optional(CONF_WORKERS, default=DEFAULT_WORKERS): _counter(1),
    }
)

COORDINATE_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_LAMBDA): _positive_rational,
        vol.Required(CONF_ALPHA): _positive_rational,
        vol.Required(CONF_SIGMA): _positive_rational,
        vol.Optional(CONF_MU, default=0): _rational,
    }
)

BOX_CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_NAME): vol.All(str, vol.Length(min=1)),
        vol.Optional(CONF_SCALING, default=LossScaling.RAW.value): vol.In(
            [scaling.value for scaling in LossScaling]
        ),
        vol.Required(CONF_COORDINATES): {
            vol.Required(coordinate.value): COORDINATE_SCHEMA
            for coordinate in COORDINATE_ORDER
        },
    }
)

INTERP_SCHEMA = vol.Schema(
    {
        vol.Exclusive(CONF_PRESET, "source"): vol.In(sorted(PRESETS)),
        vol.Exclusive(CONF_CONFIGS, "source"): vol.All(
            [BOX_CONFIG_SCHEMA], vol.Length(min=1)
        ),
        vol.Optional(CONF_BOUND, default=BoundSide.LOWER.value): vol.In(
            [side.value for side in BoundSide]
        ),
    }
)

RUN_CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_LOSS_TABLE, default={}): LOSS_TABLE_SCHEMA,
        vol.Optional(CONF_TOYFIT, default={}): TOYFIT_SCHEMA,
        vol.Optional(CONF_INTERP, default={}): INTERP_SCHEMA,
    },
    extra=vol.PREVENT_EXTRA,
)


@dataclass(frozen=True, slots=True)
class LossTableRun:
    """Validated loss-table settings."""

    alphas: tuple[float, ...]
    x_min: float
    x_max: float
    n_points: int


@dataclass(frozen=True, slots=True)
class ToyfitRun:
    """Validated toy-problem sweep settings."""

    base: ToyConfig
    noise_scales: tuple[float, ...]
    alpha_grid: tuple[float, ...]
    lr_grid: tuple[float, ...]
    iterations: int
    repeats: int
    loss_form: LossForm
    workers: int


@dataclass(frozen=True, slots=True)
class InterpRun:
    """Validated interpretation settings."""

    configs: tuple[BoxRegressionConfig, ...]
    bound: BoundSide


def validate_run_config(document: Mapping[str, Any]) -> dict[str, Any]:
    """Validate a RunConfig document and fill in defaults.

    Args:
        document: Parsed JSON document

    Returns:
        The normalised document with every section present

    Raises:
        ConfigValidationError: With the dotted path of the first offending field
    """
    try:
        validated: dict[str, Any] = RUN_CONFIG_SCHEMA(dict(document))
    except vol.MultipleInvalid as err:
        path = ".".join(str(part) for part in err.path)
        _LOGGER.error("Invalid run configuration at %s: %s", path or "<root>", err.msg)
        raise ConfigValidationError(err.msg, path) from err
    return validated


def load_run_config(path: Path | str | None) -> dict[str, Any]:
    """Read and validate a RunConfig file; None yields the all-defaults document.

    Raises:
        ConfigValidationError: If the file cannot be read, is not JSON or fails validation
    """
    if path is None:
        return validate_run_config({})
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as err:
        _LOGGER.error("Cannot read config %s: %s", path, err)
        raise ConfigValidationError(f"cannot read {path}: {err.strerror}") from err
    except json.JSONDecodeError as err:
        _LOGGER.error("Config %s is not valid JSON: %s", path, err)
        raise ConfigValidationError(f"invalid JSON: {err.msg} (line {err.lineno})") from err
    if not isinstance(document, dict):
        raise ConfigValidationError("top level must be a JSON object")
    return validate_run_config(document)


def build_loss_table_run(config: Mapping[str, Any]) -> LossTableRun:
    """Loss-table settings of a validated document."""
    section = config[CONF_LOSS_TABLE]
    return LossTableRun(
        tuple(section[CONF_ALPHAS]),
        section[CONF_X_MIN],
        section[CONF_X_MAX],
        section[CONF_N_POINTS],
    )


def build_toyfit_run(config: Mapping[str, Any], seed: int | None = None) -> ToyfitRun:
    """Toy-problem settings of a validated document.

    Args:
        config: Validated RunConfig
        seed: Overrides the document's master seed

    Returns:
        The sweep settings

    Raises:
        ConfigValidationError: If the fields are individually valid but
            inconsistent, such as fewer samples than coefficients
    """
    section = config[CONF_TOYFIT]
    try:
        base = ToyConfig(
            theta_star=PolyModel(tuple(section[CONF_THETA_STAR])),
            fit_degree_count=section[CONF_FIT_DEGREE_COUNT],
            n_samples=section[CONF_N_SAMPLES],
            delta=section[CONF_DELTA],
            noise=NoiseSpec(NoiseFamily(section[CONF_NOISE]), 1.0),
            seed=section[CONF_SEED] if seed is None else seed,
        )
    except InvalidParameterError as err:
        _LOGGER.error("Inconsistent toyfit section: %s", err)
        raise ConfigValidationError(str(err), CONF_TOYFIT) from err
    return ToyfitRun(
        base=base,
        noise_scales=tuple(section[CONF_NOISE_SCALES]),
        alpha_grid=tuple(section[CONF_ALPHA_GRID]),
        lr_grid=tuple(section[CONF_LR_GRID]),
        iterations=section[CONF_ITERATIONS],
        repeats=section[CONF_REPEATS],
        loss_form=LossForm(section[CONF_LOSS_FORM]),
        workers=section[CONF_WORKERS],
    )


def _box_config(entry: Mapping[str, Any]) -> BoxRegressionConfig:
    scaling = LossScaling(entry[CONF_SCALING])
    specs = []
    for coordinate in COORDINATE_ORDER:
        values = entry[CONF_COORDINATES][coordinate.value]
        specs.append(
            CoordinateLossSpec(
                coordinate,
                values[CONF_LAMBDA],
                values[CONF_ALPHA],
                values[CONF_SIGMA],
                values[CONF_MU],
                scaling,
            )
        )
    return BoxRegressionConfig(entry[CONF_NAME], tuple(specs))


def build_interp_run(config: Mapping[str, Any], preset: str | None = None) -> InterpRun:
    """Interpretation settings of a validated document.

    A preset given on the command line wins over the document's own source.

    Raises:
        ConfigValidationError: If neither a preset nor configs are available
    """
    section = config[CONF_INTERP]
    bound = BoundSide(section[CONF_BOUND])
    preset = preset or section.get(CONF_PRESET)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigValidationError(
                f"unknown preset {preset!r}, choose from {sorted(PRESETS)}",
                f"{CONF_INTERP}.{CONF_PRESET}",
            )
        return InterpRun(PRESETS[preset], bound)
    if CONF_CONFIGS not in section:
        raise ConfigValidationError(
            "either a preset or a list of configs is required", CONF_INTERP
        )
    return InterpRun(tuple(_box_config(entry) for entry in section[CONF_CONFIGS]), bound)
