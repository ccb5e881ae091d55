"""Closed-form robust losses, their derivatives and the parameter scaling calculus.

The KL-Laplace loss

    D(x; alpha, beta) = (alpha * exp(-|x| / alpha) + |x| - alpha) / beta

is the KL divergence between two Laplace distributions (label scale alpha,
prediction scale beta) with its constant terms removed, so that its minimum is
zero at x = 0. It behaves like x**2 / (2 * alpha * beta) near the origin and
like (|x| - alpha) / beta in the tails, which is what ties it to the Huber loss.

Every function accepts a Python float or a numpy array. Scalars come back as
``numpy.float64`` (a ``float`` subclass), arrays come back as arrays.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import InvalidParameterError

type FloatOrArray = np.float64 | NDArray[np.float64]
type LossFunction = Callable[[ArrayLike], FloatOrArray]


class BoundSide(StrEnum):
    """Which side of the Huber loss a KL configuration bounds."""

    LOWER = "lower"
    UPPER = "upper"


class LossForm(StrEnum):
    """Objective minimised by a fit."""

    HUBER = "huber"
    KL_UPPER = "kl_upper"
    KL_LOWER = "kl_lower"


def require_positive(name: str, value: float) -> None:
    """Reject non-finite and non-positive parameters.

    Args:
        name: Parameter name used in the error message
        value: Value to check

    Raises:
        InvalidParameterError: If value is not a finite positive number
    """
    try:
        finite = math.isfinite(value)
    except TypeError as err:
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}") from err
    if not finite or value <= 0:
        raise InvalidParameterError(f"{name} must be finite and positive, got {value!r}")


@dataclass(frozen=True, slots=True)
class HuberParams:
    """Transition point of the Huber loss."""

    alpha: float

    def __post_init__(self) -> None:
        require_positive("alpha", self.alpha)


@dataclass(frozen=True, slots=True)
class KlLossParams:
    """Label-noise scale (alpha) and prediction-noise scale (beta)."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        require_positive("alpha", self.alpha)
        require_positive("beta", self.beta)


def _as_float_array(x: ArrayLike) -> NDArray[np.float64]:
    return np.asarray(x, dtype=np.float64)


def _finish(value: NDArray[np.float64]) -> FloatOrArray:
    # 0-d arrays collapse to numpy.float64, anything else is returned as is
    return value[()]


def l1(x: ArrayLike) -> FloatOrArray:
    """Return |x|."""
    return _finish(np.abs(_as_float_array(x)))


def l1_grad(x: ArrayLike) -> FloatOrArray:
    """Return sign(x), 0 at the origin."""
    return _finish(np.sign(_as_float_array(x)))


def l2(x: ArrayLike) -> FloatOrArray:
    """Return x**2 / 2."""
    xa = _as_float_array(x)
    return _finish(0.5 * xa * xa)


def l2_grad(x: ArrayLike) -> FloatOrArray:
    """Return x."""
    return _finish(np.array(_as_float_array(x), copy=True))


def huber(x: ArrayLike, p: HuberParams) -> FloatOrArray:
    """Evaluate the Huber loss.

    Args:
        x: Residual(s)
        p: Transition point

    Returns:
        x**2 / 2 where |x| <= alpha, alpha * (|x| - alpha / 2) elsewhere
    """
    xa = _as_float_array(x)
    ax = np.abs(xa)
    return _finish(np.where(ax <= p.alpha, 0.5 * xa * xa, p.alpha * (ax - 0.5 * p.alpha)))


def huber_grad(x: ArrayLike, p: HuberParams) -> FloatOrArray:
    """Evaluate the Huber derivative, x inside the transition and alpha*sign(x) outside.

    Both branches share the value x at |x| = alpha, so no subgradient is needed.
    """
    xa = _as_float_array(x)
    return _finish(np.where(np.abs(xa) <= p.alpha, xa, p.alpha * np.sign(xa)))


def huber_hess(x: ArrayLike, p: HuberParams) -> FloatOrArray:
    """Evaluate the Huber second derivative (1 on the quadratic branch, 0 beyond)."""
    xa = _as_float_array(x)
    return _finish(np.where(np.abs(xa) <= p.alpha, 1.0, 0.0))


def kl_loss(x: ArrayLike, p: KlLossParams) -> FloatOrArray:
    """Evaluate the KL-Laplace loss.

    The exponential term is folded with the -alpha constant through expm1, so
    small residuals keep their accuracy; the result is clipped at zero for
    residuals below the rounding floor.

    Args:
        x: Difference between the two Laplace locations
        p: Label and prediction scales

    Returns:
        (alpha * exp(-|x| / alpha) + |x| - alpha) / beta
    """
    ax = np.abs(_as_float_array(x))
    return _finish(np.maximum(p.alpha * np.expm1(-ax / p.alpha) + ax, 0.0) / p.beta)


def kl_loss_grad(x: ArrayLike, p: KlLossParams) -> FloatOrArray:
    """Evaluate sign(x) * (1 - exp(-|x| / alpha)) / beta, exactly 0 at x = 0.

    Args:
        x: Residual(s)
        p: Loss parameters

    Returns:
        First derivative of the KL-Laplace loss
    """
    xa = _as_float_array(x)
    return _finish(np.sign(xa) * -np.expm1(-np.abs(xa) / p.alpha) / p.beta)


def kl_loss_hess(x: ArrayLike, p: KlLossParams) -> FloatOrArray:
    """Evaluate exp(-|x| / alpha) / (alpha * beta); 1 / (alpha * beta) at the origin."""
    xa = _as_float_array(x)
    return _finish(np.exp(-np.abs(xa) / p.alpha) / (p.alpha * p.beta))


def kl_loss_piecewise_approx(x: ArrayLike, p: KlLossParams) -> FloatOrArray:
    """Quadratic/linear approximation of the KL-Laplace loss.

    Args:
        x: Residual(s)
        p: Loss parameters

    Returns:
        x**2 / (2 * alpha * beta) where |x| <= alpha, (|x| - alpha) / beta elsewhere
    """
    xa = _as_float_array(x)
    ax = np.abs(xa)
    return _finish(
        np.where(
            ax <= p.alpha,
            xa * xa / (2.0 * p.alpha * p.beta),
            (ax - p.alpha) / p.beta,
        )
    )


def lower_bound_params(alpha: float) -> KlLossParams:
    """Return (alpha, 1/alpha), the tight KL configuration below the Huber loss."""
    require_positive("alpha", alpha)
    return KlLossParams(alpha, 1.0 / alpha)


def upper_bound_params(alpha: float) -> KlLossParams:
    """Return (alpha/2, 1/alpha), the tight KL configuration above the Huber loss."""
    require_positive("alpha", alpha)
    return KlLossParams(alpha / 2.0, 1.0 / alpha)


def bound_params(alpha: float, side: BoundSide) -> KlLossParams:
    """Dispatch to the lower or upper bound configuration."""
    if side is BoundSide.UPPER:
        return upper_bound_params(alpha)
    return lower_bound_params(alpha)


def rescale_params(p: KlLossParams, gamma: float, lam: float) -> KlLossParams:
    """Fold an input scale and an output weight into the loss parameters.

    lam * kl_loss(gamma * x, p) == kl_loss(x, rescale_params(p, gamma, lam)).

    Args:
        p: Original parameters
        gamma: Positive scale applied to the residual
        lam: Positive weight applied to the loss

    Returns:
        (alpha / gamma, beta / (gamma * lam))

    Raises:
        InvalidParameterError: If gamma or lam is not positive
    """
    require_positive("gamma", gamma)
    require_positive("lambda", lam)
    return KlLossParams(p.alpha / gamma, p.beta / (gamma * lam))


def huber_equivalent_params(alpha: float, gamma: float, lam: float) -> KlLossParams:
    """KL parameters equivalent to lam * huber(gamma * x, alpha).

    The equivalence is approximate: it carries the lower-bound configuration
    (alpha, 1/alpha) through rescale_params, so the returned loss sits below
    the weighted Huber loss and is tight in the quadratic regime.

    Args:
        alpha: Huber transition point
        gamma: Positive scale applied to the residual
        lam: Positive weight applied to the loss

    Returns:
        (alpha / gamma, 1 / (alpha * gamma * lam))
    """
    require_positive("alpha", alpha)
    require_positive("gamma", gamma)
    require_positive("lambda", lam)
    return KlLossParams(alpha / gamma, 1.0 / (alpha * gamma * lam))


def tail_gap_limit(kl: KlLossParams, alpha: float) -> float:
    """Limit of kl_loss(x, kl) - huber(x, alpha) as x goes to infinity.

    beta is compared with 1/alpha up to a relative 1e-12, so the bound
    configurations built from a float alpha land on the finite branch.

    Args:
        kl: KL configuration
        alpha: Huber transition point

    Returns:
        +inf if beta < 1/alpha, alpha * (alpha/2 - kl.alpha) if beta == 1/alpha,
        -inf if beta > 1/alpha
    """
    require_positive("alpha", alpha)
    target = 1.0 / alpha
    if math.isclose(kl.beta, target, rel_tol=1e-12, abs_tol=0.0):
        return alpha * (0.5 * alpha - kl.alpha)
    return math.inf if kl.beta < target else -math.inf


def bound_violation(
    kl: KlLossParams, alpha: float, side: BoundSide, xs: ArrayLike
) -> float:
    """Largest normalised violation of a bound over a grid.

    A lower bound requires kl_loss <= huber, an upper bound huber <= kl_loss.
    Violations are divided by max(1, huber) so the result is comparable across
    the quadratic and linear regimes.

    Args:
        kl: Candidate KL configuration
        alpha: Huber transition point
        side: Which bound kl is supposed to be
        xs: Evaluation grid

    Returns:
        0.0 when the bound holds everywhere on the grid, the largest
        normalised violation otherwise
    """
    h = np.asarray(huber(xs, HuberParams(alpha)), dtype=np.float64)
    d = np.asarray(kl_loss(xs, kl), dtype=np.float64)
    gap = d - h if side is BoundSide.LOWER else h - d
    worst = float(np.max(gap / np.maximum(1.0, h), initial=0.0))
    return max(worst, 0.0)


def resolve_loss(form: LossForm, alpha: float) -> tuple[LossFunction, LossFunction]:
    """Return (loss, derivative) callables for an objective and its transition point.

    Args:
        form: Huber or one of the KL substitutes
        alpha: Huber transition point the objective is built around

    Returns:
        Pair of callables taking residuals
    """
    if form is LossForm.HUBER:
        hp = HuberParams(alpha)
        return (lambda r: huber(r, hp)), (lambda r: huber_grad(r, hp))
    kp = upper_bound_params(alpha) if form is LossForm.KL_UPPER else lower_bound_params(alpha)
    return (lambda r: kl_loss(r, kp)), (lambda r: kl_loss_grad(r, kp))
