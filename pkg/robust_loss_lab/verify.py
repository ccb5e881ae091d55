"""Numerical verification suite for the loss and divergence closed forms."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
import math
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .const import GOLDEN_SEED, PROFILE_DEFAULT, PROFILE_QUICK, _LOGGER
from .distributions import RngState
from .divergence import (
    LaplaceDist,
    QuadratureSpec,
    kl_numeric,
    laplace_cross_entropy,
    laplace_entropy,
    laplace_kl,
)
from .exceptions import InvalidParameterError, VerificationError
from .losses import (
    BoundSide,
    HuberParams,
    KlLossParams,
    bound_violation,
    huber,
    huber_grad,
    kl_loss,
    kl_loss_grad,
    kl_loss_hess,
    kl_loss_piecewise_approx,
    lower_bound_params,
    rescale_params,
    tail_gap_limit,
    upper_bound_params,
)

type BoundFactory = Callable[[float], KlLossParams]

# Transition points of the default loss-table curves
CHECK_ALPHAS = (0.1, 1.0, 10.0)

_STREAM_RESCALE = 0
_STREAM_KL = 1


@dataclass(frozen=True, slots=True)
class VerificationProfile:
    """Grid sizes and sample counts of a verification run."""

    name: str
    grid_points: int
    kl_cases: int
    samples: int
    quadrature: QuadratureSpec


PROFILES: dict[str, VerificationProfile] = {
    PROFILE_DEFAULT: VerificationProfile(PROFILE_DEFAULT, 100_000, 100, 1000, QuadratureSpec()),
    PROFILE_QUICK: VerificationProfile(
        PROFILE_QUICK, 10_000, 20, 200, QuadratureSpec(n_points=20001)
    ),
}


@dataclass(frozen=True, slots=True)
class CheckResult:
    """Measured value of one check against its tolerance."""

    name: str
    value: float
    tolerance: float
    details: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """Whether the value is within tolerance."""
        return self.value <= self.tolerance


@dataclass(frozen=True, slots=True)
class VerificationReport:
    """Results of a verification run in execution order."""

    profile: str
    results: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        """Whether every check passed."""
        return all(result.passed for result in self.results)

    @property
    def first_failure(self) -> CheckResult | None:
        """Earliest failing check, if any."""
        return next((result for result in self.results if not result.passed), None)

    def raise_for_failure(self) -> None:
        """Raise VerificationError naming the first failing check."""
        failure = self.first_failure
        if failure is not None:
            raise VerificationError(failure.name, failure.value)

    def as_dict(self) -> dict[str, Any]:
        """Report as a JSON-friendly dictionary."""
        return {
            "profile": self.profile,
            "passed": self.passed,
            "checks": [
                {
                    "name": result.name,
                    "value": result.value,
                    "tolerance": result.tolerance,
                    "passed": result.passed,
                    "details": dict(result.details),
                }
                for result in self.results
            ],
        }


def _grid(alpha: float, span: float, n_points: int) -> NDArray[np.float64]:
    return np.linspace(-span * alpha, span * alpha, n_points)


def _log_uniform(rng: RngState, lo: float, hi: float, size: int) -> NDArray[np.float64]:
    u = np.asarray(rng.open_uniform(size))
    return np.exp(math.log(lo) + (math.log(hi) - math.log(lo)) * u)


def _fd_step(x: NDArray[np.float64]) -> NDArray[np.float64]:
    return 1e-6 * np.maximum(1.0, np.abs(x))


def _check_sandwich(
    name: str, side: BoundSide, factory: BoundFactory, n_points: int
) -> CheckResult:
    details = {}
    for alpha in CHECK_ALPHAS:
        xs = _grid(alpha, 100.0, n_points)
        details[f"alpha={alpha:g}"] = bound_violation(factory(alpha), alpha, side, xs)
    return CheckResult(name, max(details.values()), 1e-12, details)


def _check_tightness(lower_bound: BoundFactory) -> list[CheckResult]:
    upper_details: dict[str, float] = {}
    lower_details: dict[str, float] = {}
    for alpha in CHECK_ALPHAS:
        x = 50.0 * alpha
        scale = max(1.0, alpha * alpha)
        h = float(huber(x, HuberParams(alpha)))
        upper = upper_bound_params(alpha)
        lower = lower_bound(alpha)
        upper_gap = float(kl_loss(x, upper)) - h
        lower_gap = float(kl_loss(x, lower)) - h
        upper_details[f"alpha={alpha:g}"] = abs(upper_gap - tail_gap_limit(upper, alpha)) / scale
        lower_details[f"alpha={alpha:g}"] = abs(lower_gap - tail_gap_limit(lower, alpha)) / scale
    return [
        CheckResult("tightness_upper", max(upper_details.values()), 1e-10, upper_details),
        CheckResult("tightness_lower", max(lower_details.values()), 1e-10, lower_details),
    ]


def _bound_configs(lower_bound: BoundFactory) -> list[tuple[float, KlLossParams]]:
    return [
        (alpha, params)
        for alpha in CHECK_ALPHAS
        for params in (lower_bound(alpha), upper_bound_params(alpha))
    ]


def _check_symmetry(lower_bound: BoundFactory, n_points: int) -> CheckResult:
    worst = 0.0
    for alpha, params in _bound_configs(lower_bound):
        xs = _grid(alpha, 100.0, n_points)
        d = np.asarray(kl_loss(xs, params))
        h = np.asarray(huber(xs, HuberParams(alpha)))
        worst = max(
            worst,
            float(np.max(-d)),
            float(np.max(-h)),
            float(np.max(np.abs(d - np.asarray(kl_loss(-xs, params))))),
            float(np.max(np.abs(h - np.asarray(huber(-xs, HuberParams(alpha)))))),
        )
    return CheckResult("nonnegative_even", worst, 0.0)


def _check_gradient(lower_bound: BoundFactory, n_points: int) -> list[CheckResult]:
    fd_details: dict[str, float] = {}
    origin = 0.0
    for alpha, params in _bound_configs(lower_bound):
        xs = _grid(alpha, 10.0, n_points)
        h = _fd_step(xs)
        xs, h = xs[np.abs(xs) >= 10.0 * h], h[np.abs(xs) >= 10.0 * h]
        fd = (np.asarray(kl_loss(xs + h, params)) - np.asarray(kl_loss(xs - h, params))) / (2 * h)
        g = np.asarray(kl_loss_grad(xs, params))
        key = f"alpha={params.alpha:g},beta={params.beta:g}"
        fd_details[key] = float(np.max(np.abs(fd - g) / np.abs(g)))
        one_sided = float(kl_loss(1e-6, params)) / 1e-6
        origin = max(origin, abs(float(kl_loss_grad(0.0, params))), abs(one_sided))

    huber_worst = 0.0
    for alpha in CHECK_ALPHAS:
        hp = HuberParams(alpha)
        xs = _grid(alpha, 10.0, n_points)
        h = _fd_step(xs)
        keep = (np.abs(xs) >= 10.0 * h) & (np.abs(np.abs(xs) - alpha) >= 10.0 * h)
        xs, h = xs[keep], h[keep]
        fd = (np.asarray(huber(xs + h, hp)) - np.asarray(huber(xs - h, hp))) / (2 * h)
        g = np.asarray(huber_grad(xs, hp))
        huber_worst = max(huber_worst, float(np.max(np.abs(fd - g) / np.abs(g))))
    fd_details["huber"] = huber_worst

    return [
        CheckResult("gradient_finite_difference", max(fd_details.values()), 1e-5, fd_details),
        CheckResult("gradient_at_origin", origin, 1e-5),
    ]


def _check_hessian(lower_bound: BoundFactory, n_points: int) -> list[CheckResult]:
    fd_details: dict[str, float] = {}
    origin = 0.0
    for alpha, params in _bound_configs(lower_bound):
        # Central differences of the analytic gradient
        xs = _grid(alpha, 5.0, n_points)
        h = _fd_step(xs)
        xs, h = xs[np.abs(xs) >= 10.0 * h], h[np.abs(xs) >= 10.0 * h]
        fd = (
            np.asarray(kl_loss_grad(xs + h, params)) - np.asarray(kl_loss_grad(xs - h, params))
        ) / (2 * h)
        hess = np.asarray(kl_loss_hess(xs, params))
        key = f"alpha={params.alpha:g},beta={params.beta:g}"
        fd_details[key] = float(np.max(np.abs(fd - hess) / hess))
        peak = 1.0 / (params.alpha * params.beta)
        one_sided = float(kl_loss_grad(1e-6, params)) / 1e-6
        origin = max(
            origin,
            abs(float(kl_loss_hess(0.0, params)) - peak) / peak,
            abs(one_sided - peak) / peak,
        )
    return [
        CheckResult("hessian_finite_difference", max(fd_details.values()), 1e-4, fd_details),
        CheckResult("hessian_at_origin", origin, 1e-4),
    ]


def _check_approximations(n_points: int) -> list[CheckResult]:
    quadratic = 0.0
    piecewise = 0.0
    tail = 0.0
    for alpha in CHECK_ALPHAS:
        for params in (lower_bound_params(alpha), KlLossParams(alpha, 1.0)):
            xs = _grid(alpha, 0.1, n_points)
            xs = xs[(xs != 0.0) & (np.abs(xs) < alpha / 10.0)]
            quad = xs * xs / (2.0 * params.alpha * params.beta)
            quadratic = max(
                quadratic, float(np.max(np.abs(np.asarray(kl_loss(xs, params)) - quad) / quad))
            )
            xs = _grid(alpha, 100.0, n_points)
            gap = np.abs(
                np.asarray(kl_loss(xs, params)) - np.asarray(kl_loss_piecewise_approx(xs, params))
            )
            ceiling = params.alpha / params.beta
            piecewise = max(piecewise, float(np.max(gap)) / ceiling)
            far = 50.0 * params.alpha
            tail = max(
                tail,
                abs(float(kl_loss(far, params)) - float(kl_loss_piecewise_approx(far, params)))
                / ceiling,
            )
    return [
        CheckResult("second_order_approximation", quadratic, 0.1),
        CheckResult("piecewise_gap", piecewise, 1.0 + 1e-12),
        CheckResult("piecewise_tail", tail, 1e-12),
    ]


def _check_intermediate_scale(n_points: int) -> CheckResult:
    # A label scale strictly between alpha/2 and alpha with beta = 1/alpha
    # crosses above the Huber loss near the origin
    details = {}
    for alpha in CHECK_ALPHAS:
        xs = _grid(alpha, 100.0, n_points)
        params = KlLossParams(0.75 * alpha, 1.0 / alpha)
        violation = bound_violation(params, alpha, BoundSide.LOWER, xs)
        details[f"alpha={alpha:g}"] = violation / (alpha * alpha)
    # Negated so that a broken bound (positive violation) passes
    return CheckResult("intermediate_scale_not_lower", -min(details.values()), -1e-4, details)


def _check_rescale(rng: RngState, samples: int) -> CheckResult:
    alphas = _log_uniform(rng, 0.1, 10.0, samples)
    betas = _log_uniform(rng, 0.1, 10.0, samples)
    gammas = _log_uniform(rng, 0.1, 10.0, samples)
    lams = _log_uniform(rng, 0.1, 10.0, samples)
    # Scaled residuals gamma*|x|/alpha in [1e-2, 1e2], signs alternate
    ratios = _log_uniform(rng, 1e-2, 1e2, samples)
    signs = np.where(np.arange(samples) % 2 == 0, 1.0, -1.0)
    worst = 0.0
    for alpha, beta, gamma, lam, ratio, sign in zip(alphas, betas, gammas, lams, ratios, signs):
        params = KlLossParams(float(alpha), float(beta))
        x = float(sign * ratio * alpha / gamma)
        lhs = lam * float(kl_loss(gamma * x, params))
        rhs = float(kl_loss(x, rescale_params(params, float(gamma), float(lam))))
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return CheckResult("rescale_identity", worst, 1e-12)


def _sample_pairs(rng: RngState, cases: int) -> list[tuple[LaplaceDist, LaplaceDist]]:
    mus = -10.0 + 20.0 * np.asarray(rng.open_uniform(2 * cases)).reshape(cases, 2)
    scales = _log_uniform(rng, 0.05, 20.0, 2 * cases).reshape(cases, 2)
    pairs = []
    for index, ((mu1, mu2), (b1, b2)) in enumerate(zip(mus, scales)):
        # First half with mu1 >= mu2, second half with mu1 < mu2
        high, low = max(mu1, mu2), min(mu1, mu2)
        if index < cases // 2:
            mu1, mu2 = high, low
        else:
            mu1, mu2 = low, high
        pairs.append((LaplaceDist(float(mu1), float(b1)), LaplaceDist(float(mu2), float(b2))))
    return pairs


def _check_divergence(rng: RngState, profile: VerificationProfile) -> list[CheckResult]:
    oracle = identity = negative = linkage = symmetry = 0.0
    for p, q in _sample_pairs(rng, profile.kl_cases):
        closed = laplace_kl(p, q)
        numeric = kl_numeric(p, q, profile.quadrature)
        oracle = max(oracle, abs(closed - numeric) / max(1.0, closed))

        cross = laplace_cross_entropy(p, q)
        entropy = laplace_entropy(p)
        identity = max(
            identity, abs(closed - (cross - entropy)) / max(1.0, abs(cross), abs(entropy))
        )
        negative = max(negative, -closed, laplace_kl(p, p))

        shared = LaplaceDist(q.mu, p.b)
        loss = float(kl_loss(p.mu - q.mu, KlLossParams(p.b, p.b)))
        linkage = max(linkage, abs(laplace_kl(p, shared) - loss) / max(loss, 1e-300))

        mirrored = laplace_kl(LaplaceDist(q.mu, p.b), LaplaceDist(p.mu, q.b))
        symmetry = max(symmetry, abs(closed - mirrored))
    return [
        CheckResult("kl_quadrature_oracle", oracle, 1e-7),
        CheckResult("kl_entropy_identity", identity, 1e-14),
        CheckResult("kl_nonnegative", negative, 1e-14),
        CheckResult("kl_loss_linkage", linkage, 1e-14),
        CheckResult("kl_case_symmetry", symmetry, 0.0),
    ]


def _check_huber_continuity() -> CheckResult:
    worst = 0.0
    for alpha in CHECK_ALPHAS:
        hp = HuberParams(alpha)
        for edge in (alpha, -alpha):
            left = float(huber_grad(math.nextafter(edge, -math.inf), hp))
            right = float(huber_grad(math.nextafter(edge, math.inf), hp))
            worst = max(worst, abs(right - left) / alpha)
    return CheckResult("huber_grad_continuity", worst, 1e-15)


def run_checks(
    profile: str = PROFILE_DEFAULT, lower_bound: BoundFactory = lower_bound_params
) -> VerificationReport:
    """Run every loss and divergence check.

    Args:
        profile: Name of a VerificationProfile
        lower_bound: Factory of the lower-bound configuration under test

    Returns:
        Report with one result per check
    """
    try:
        settings = PROFILES[profile]
    except KeyError as err:
        raise InvalidParameterError(
            f"unknown profile {profile!r}, choose from {sorted(PROFILES)}"
        ) from err
    rng = RngState(GOLDEN_SEED)
    n_points = settings.grid_points

    results = [
        _check_sandwich("bound_sandwich_lower", BoundSide.LOWER, lower_bound, n_points),
        _check_sandwich("bound_sandwich_upper", BoundSide.UPPER, upper_bound_params, n_points),
        *_check_tightness(lower_bound),
        _check_symmetry(lower_bound, n_points),
        *_check_gradient(lower_bound, n_points),
        *_check_hessian(lower_bound, n_points),
        *_check_approximations(n_points),
        _check_intermediate_scale(n_points),
        _check_huber_continuity(),
        _check_rescale(rng.derive(_STREAM_RESCALE), settings.samples),
        *_check_divergence(rng.derive(_STREAM_KL), settings),
    ]
    for result in results:
        _LOGGER.debug(
            "Check %s: %.3e (tolerance %.3e)", result.name, result.value, result.tolerance
        )
    report = VerificationReport(settings.name, tuple(results))
    if not report.passed:
        _LOGGER.warning("Verification failed at %s", report.first_failure)
    return report
