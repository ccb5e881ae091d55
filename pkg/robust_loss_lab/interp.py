"""Interpretation of box-regression loss hyper-parameters as Laplace uncertainties.

A detector regresses anchor-relative targets

    t_x = ((x - x_a) / w_a - mu_x) / sigma_x
    t_w = (log(w / w_a) - mu_w) / sigma_w

and weights a Huber loss on their residual. Rewriting the residual as a box
displacement divided by sigma * anchor_dim, replacing the Huber loss by its
KL-Laplace lower bound and folding weight and scale into the loss parameters
turns each coordinate's loss into D(label, prediction) with both scales exact
multiples of the anchor width or height.

All arithmetic here is done on fractions.Fraction so published tables can be
compared cell by cell without tolerances.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import StrEnum
from fractions import Fraction
import math

import numpy as np

from .const import _LOGGER
from .exceptions import InvalidParameterError, InvalidRangeError
from .losses import BoundSide

type Rational = Fraction

LABEL_ROWS = ("x*", "y*", "w*", "h*")
PREDICTION_ROWS = ("x~", "y~", "w~", "h~")
TABLE_ROWS = LABEL_ROWS + PREDICTION_ROWS


class LossScaling(StrEnum):
    """How the configured weight multiplies the Huber loss."""

    RAW = "raw"
    ALPHA_SCALED = "alpha_scaled"


class AnchorDim(StrEnum):
    """Anchor dimension an uncertainty scale is expressed in."""

    WIDTH = "w_a"
    HEIGHT = "h_a"


class Coordinate(StrEnum):
    """Box coordinate regressed by a loss term."""

    CENTER_X = "x"
    CENTER_Y = "y"
    WIDTH = "w"
    HEIGHT = "h"

    @property
    def anchor_dim(self) -> AnchorDim:
        """Anchor dimension the coordinate is normalised by."""
        if self in (Coordinate.CENTER_X, Coordinate.WIDTH):
            return AnchorDim.WIDTH
        return AnchorDim.HEIGHT

    @property
    def is_size(self) -> bool:
        """Whether the target is a log size ratio."""
        return self in (Coordinate.WIDTH, Coordinate.HEIGHT)


COORDINATE_ORDER = (
    Coordinate.CENTER_X,
    Coordinate.CENTER_Y,
    Coordinate.WIDTH,
    Coordinate.HEIGHT,
)


def parse_rational(value: object) -> Rational:
    """Convert an int, a decimal literal, "p/q" text or a Fraction to an exact Fraction.

    Floats go through their shortest repr, so 0.1 becomes 1/10 rather than its
    binary expansion.

    Raises:
        InvalidParameterError: If the value is not a finite rational
    """
    if isinstance(value, bool):
        raise InvalidParameterError(f"expected a rational number, got {value!r}")
    try:
        if isinstance(value, Fraction):
            return value
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(repr(value))
        if isinstance(value, str):
            return Fraction(value.strip())
    except (ValueError, ZeroDivisionError) as err:
        raise InvalidParameterError(f"expected a rational number, got {value!r}") from err
    raise InvalidParameterError(f"expected a rational number, got {value!r}")


def _require_positive_rational(name: str, value: Rational) -> None:
    if value <= 0:
        raise InvalidParameterError(f"{name} must be positive, got {value}")


@dataclass(frozen=True, slots=True)
class CoordinateLossSpec:
    """Loss hyper-parameters of one regressed coordinate."""

    coordinate: Coordinate
    lam: Rational
    alpha: Rational
    sigma: Rational
    mu: Rational = Fraction(0)
    loss_form: LossScaling = LossScaling.RAW

    def __post_init__(self) -> None:
        for name in ("lam", "alpha", "sigma", "mu"):
            object.__setattr__(self, name, parse_rational(getattr(self, name)))
        _require_positive_rational("lambda", self.lam)
        _require_positive_rational("alpha", self.alpha)
        _require_positive_rational("sigma", self.sigma)

    @property
    def effective_weight(self) -> Rational:
        """Total multiplier on the Huber loss."""
        if self.loss_form is LossScaling.ALPHA_SCALED:
            return self.lam / self.alpha
        return self.lam


@dataclass(frozen=True, slots=True)
class BoxRegressionConfig:
    """A named set of loss specs, one per box coordinate, stored in x, y, w, h order."""

    name: str
    specs: tuple[CoordinateLossSpec, ...]

    def __post_init__(self) -> None:
        by_coordinate = {spec.coordinate: spec for spec in self.specs}
        if len(self.specs) != 4 or set(by_coordinate) != set(COORDINATE_ORDER):
            raise InvalidParameterError(
                f"{self.name}: exactly one spec per coordinate x, y, w, h is required"
            )
        object.__setattr__(
            self, "specs", tuple(by_coordinate[c] for c in COORDINATE_ORDER)
        )

    @classmethod
    def uniform(
        cls,
        name: str,
        lam: object,
        alpha: object,
        sigma_center: object,
        sigma_size: object,
        loss_form: LossScaling,
    ) -> BoxRegressionConfig:
        """Build a config sharing weight and transition point across coordinates.

        Args:
            name: Column label
            lam: Loss weight
            alpha: Huber transition point
            sigma_center: Target scaling of x and y
            sigma_size: Target scaling of w and h
            loss_form: Raw or 1/alpha-scaled weighting

        Returns:
            The four-coordinate config
        """
        return cls(
            name,
            tuple(
                CoordinateLossSpec(
                    coordinate,
                    parse_rational(lam),
                    parse_rational(alpha),
                    parse_rational(sigma_size if coordinate.is_size else sigma_center),
                    loss_form=loss_form,
                )
                for coordinate in COORDINATE_ORDER
            ),
        )

    def spec(self, coordinate: Coordinate) -> CoordinateLossSpec:
        """Loss spec of a coordinate."""
        return self.specs[COORDINATE_ORDER.index(coordinate)]


@dataclass(frozen=True, slots=True)
class UncertaintyScale:
    """A Laplace scale expressed as a rational multiple of an anchor dimension."""

    coefficient: Rational
    anchor_dim: AnchorDim

    def __post_init__(self) -> None:
        _require_positive_rational("coefficient", self.coefficient)

    def render(self) -> str:
        """Format as 'w_a', 'w_a/9' or '2*w_a/5'."""
        head = self.anchor_dim.value
        if self.coefficient.numerator != 1:
            head = f"{self.coefficient.numerator}*{head}"
        if self.coefficient.denominator == 1:
            return head
        return f"{head}/{self.coefficient.denominator}"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True, slots=True)
class InterpretationTable:
    """Label and prediction scales of one config, rows in TABLE_ROWS order.

    log_domain holds, per size coordinate, the exact KL parameters acting on
    log(w~) - log(w*) before the first-order approximation is applied.
    """

    name: str
    rows: tuple[tuple[str, UncertaintyScale], ...]
    log_domain: tuple[tuple[str, Rational, Rational], ...] = ()

    def __iter__(self) -> Iterator[tuple[str, UncertaintyScale]]:
        return iter(self.rows)

    def __getitem__(self, row: str) -> UncertaintyScale:
        for label, scale in self.rows:
            if label == row:
                return scale
        raise KeyError(row)

    def rendered(self) -> list[str]:
        """Rendered cells in row order."""
        return [scale.render() for _, scale in self.rows]


def residual_gamma(spec: CoordinateLossSpec) -> Rational:
    """Coefficient c with target residual = c * displacement / anchor_dim.

    Centers are exact, t_x - t~_x = (x~ - x*) / (sigma * w_a); sizes hold under
    log(w / w_a) ~ w / w_a - 1. Either way c = 1 / sigma.
    """
    return 1 / spec.sigma


def interpret_coordinate(
    spec: CoordinateLossSpec, bound: BoundSide = BoundSide.LOWER
) -> tuple[UncertaintyScale, UncertaintyScale]:
    """Label and prediction uncertainty of one coordinate's loss.

    The weighted Huber loss w_eff * H_alpha(gamma * d) is replaced by the chosen
    KL bound, then weight and gamma are folded into its parameters.

    Args:
        spec: Loss hyper-parameters
        bound: LOWER uses D(alpha, 1/alpha), UPPER uses D(alpha/2, 1/alpha)

    Returns:
        (label, prediction) scales in anchor units
    """
    w_eff = spec.effective_weight
    dim = spec.coordinate.anchor_dim
    # gamma = 1 / (sigma * anchor_dim); rescaling divides alpha by gamma
    label = spec.alpha * spec.sigma
    if bound is BoundSide.UPPER:
        label /= 2
    prediction = spec.sigma / (spec.alpha * w_eff)
    return UncertaintyScale(label, dim), UncertaintyScale(prediction, dim)


def log_domain_params(
    spec: CoordinateLossSpec, bound: BoundSide = BoundSide.LOWER
) -> tuple[Rational, Rational]:
    """Exact KL parameters of a size coordinate acting on log(w~) - log(w*).

    Returns:
        (alpha * sigma, sigma / (alpha * w_eff)), the first halved for UPPER

    Raises:
        InvalidParameterError: For center coordinates, which have no log form
    """
    if not spec.coordinate.is_size:
        raise InvalidParameterError(
            f"coordinate {spec.coordinate} is not a size; no log-domain form"
        )
    label = spec.alpha * spec.sigma
    if bound is BoundSide.UPPER:
        label /= 2
    return label, spec.sigma / (spec.alpha * spec.effective_weight)


def interpret_config(
    cfg: BoxRegressionConfig, bound: BoundSide = BoundSide.LOWER
) -> InterpretationTable:
    """Interpret every coordinate of a config.

    Args:
        cfg: Four-coordinate loss config
        bound: KL bound standing in for the Huber loss

    Returns:
        Eight rows x*, y*, w*, h*, x~, y~, w~, h~
    """
    pairs = [interpret_coordinate(spec, bound) for spec in cfg.specs]
    labels = [(row, label) for row, (label, _) in zip(LABEL_ROWS, pairs)]
    predictions = [(row, pred) for row, (_, pred) in zip(PREDICTION_ROWS, pairs)]
    log_domain = tuple(
        (spec.coordinate.value, *log_domain_params(spec, bound))
        for spec in cfg.specs
        if spec.coordinate.is_size
    )
    _LOGGER.debug("Interpreted %s with the %s bound", cfg.name, bound)
    return InterpretationTable(cfg.name, tuple(labels + predictions), log_domain)


def encode_center_target(
    gt_center: float, anchor_center: float, anchor_dim: float, spec: CoordinateLossSpec
) -> float:
    """Normalised center target ((x - x_a) / w_a - mu) / sigma."""
    if anchor_dim <= 0:
        raise InvalidParameterError(f"anchor_dim must be positive, got {anchor_dim}")
    offset = (gt_center - anchor_center) / anchor_dim
    return (offset - float(spec.mu)) / float(spec.sigma)


def decode_center_target(
    target: float, anchor_center: float, anchor_dim: float, spec: CoordinateLossSpec
) -> float:
    """Box center (t * sigma + mu) * w_a + x_a of a center target."""
    return (target * float(spec.sigma) + float(spec.mu)) * anchor_dim + anchor_center


def encode_size_target(
    gt_size: float, anchor_size: float, spec: CoordinateLossSpec, approximate: bool = False
) -> float:
    """Normalised size target (log(w / w_a) - mu) / sigma.

    Args:
        gt_size: Ground-truth width or height
        anchor_size: Anchor width or height
        spec: Loss spec carrying sigma and mu
        approximate: Use w / w_a - 1 in place of the logarithm

    Returns:
        The regression target
    """
    if gt_size <= 0 or anchor_size <= 0:
        raise InvalidParameterError(
            f"sizes must be positive, got {gt_size} and {anchor_size}"
        )
    ratio = gt_size / anchor_size
    base = ratio - 1.0 if approximate else math.log(ratio)
    return (base - float(spec.mu)) / float(spec.sigma)


def decode_size_target(target: float, anchor_size: float, spec: CoordinateLossSpec) -> float:
    """Box size w_a * exp(t * sigma + mu) of a size target."""
    return anchor_size * math.exp(target * float(spec.sigma) + float(spec.mu))


def _check_ratio_range(ratio_lo: float, ratio_hi: float) -> None:
    if not (ratio_lo > 0 and math.isfinite(ratio_hi)):
        raise InvalidParameterError(
            f"ratios must be finite and positive, got [{ratio_lo}, {ratio_hi}]"
        )
    if ratio_lo > ratio_hi:
        raise InvalidRangeError(f"reversed ratio range [{ratio_lo}, {ratio_hi}]")


def log_target_approx_error(ratio_lo: float, ratio_hi: float, n_grid: int) -> float:
    """Largest |log r - (r - 1)| over an evenly spaced grid of ratios.

    Args:
        ratio_lo: Smallest size ratio w / w_a
        ratio_hi: Largest size ratio
        n_grid: Grid points, endpoints included

    Returns:
        Maximum absolute error of the first-order log approximation
    """
    _check_ratio_range(ratio_lo, ratio_hi)
    if n_grid < 1:
        raise InvalidParameterError(f"n_grid must be at least 1, got {n_grid}")
    ratios = np.linspace(ratio_lo, ratio_hi, n_grid)
    return float(np.max(np.abs(np.log(ratios) - (ratios - 1.0))))


def log_target_approx_bound(ratio_lo: float, ratio_hi: float) -> float:
    """Analytic maximum of |log r - (r - 1)| on [ratio_lo, ratio_hi].

    The error r - 1 - log r is convex with its zero at r = 1, so the maximum
    sits on an endpoint.
    """
    _check_ratio_range(ratio_lo, ratio_hi)
    return max(abs(math.log(r) - (r - 1.0)) for r in (ratio_lo, ratio_hi))


def interpret_all(
    configs: Sequence[BoxRegressionConfig], bound: BoundSide = BoundSide.LOWER
) -> list[InterpretationTable]:
    """Interpret several configs, one table per config in order."""
    return [interpret_config(cfg, bound) for cfg in configs]
