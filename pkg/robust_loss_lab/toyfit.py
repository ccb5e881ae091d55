"""Polynomial-fitting experiment linking label-noise scale to the optimal Huber alpha.

A ground-truth polynomial is sampled on [-delta, delta], the training labels
are corrupted with heavy-tailed noise, and a higher-degree polynomial is fitted
by full-batch gradient descent on the summed loss. A grid search over (alpha,
learning rate) picks the cell with the lowest test RMSE on noiseless labels;
sweeping the noise scale traces how that optimal alpha moves with the noise.
"""

from __future__ import annotations

import asyncio
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from enum import IntEnum, StrEnum
from functools import partial
import math

import numpy as np
from numpy.polynomial import polynomial as npoly
from numpy.typing import ArrayLike, NDArray
from scipy.stats import spearmanr

from .const import (
    DEFAULT_FIT_DEGREE_COUNT,
    DEFAULT_ITERATIONS,
    DEFAULT_N_SAMPLES,
    DEFAULT_DELTA,
    DEFAULT_SEED,
    DEFAULT_THETA_STAR,
    DIVERGENCE_LOSS_RATIO,
    _LOGGER,
)
from .distributions import NoiseFamily, NoiseSpec, RngState, sample_noise, sample_uniform
from .exceptions import AllDivergedError, DivergenceError, InvalidParameterError
from .losses import FloatOrArray, HuberParams, LossForm, require_positive, resolve_loss

# Objective is re-checked for runaway growth every this many steps
_DIVERGENCE_CHECK_INTERVAL = 100

_STREAM_COVARIATES = 0
_STREAM_NOISE = 1


class Split(IntEnum):
    """Dataset split; the value is the stream index of its random substream."""

    TRAIN = 0
    TEST = 1


class Init(StrEnum):
    """Coefficient initialisation of a fit."""

    ZEROS = "zeros"


@dataclass(frozen=True, slots=True)
class PolyModel:
    """Polynomial with coeffs[k] multiplying x**k."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise InvalidParameterError("a polynomial needs at least one coefficient")
        if not all(math.isfinite(c) for c in coeffs):
            raise InvalidParameterError(f"coefficients must be finite, got {coeffs}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        """Degree of the polynomial."""
        return len(self.coeffs) - 1

    @classmethod
    def zeros(cls, count: int) -> PolyModel:
        """All-zero polynomial with count coefficients."""
        return cls((0.0,) * count)


_INITIALISERS: dict[Init, Callable[[int], PolyModel]] = {
    Init.ZEROS: PolyModel.zeros,
}


@dataclass(frozen=True, slots=True)
class ToyConfig:
    """Dataset synthesis settings."""

    theta_star: PolyModel = field(default_factory=lambda: PolyModel(DEFAULT_THETA_STAR))
    fit_degree_count: int = DEFAULT_FIT_DEGREE_COUNT
    n_samples: int = DEFAULT_N_SAMPLES
    delta: float = DEFAULT_DELTA
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(NoiseFamily.LAPLACE, 1.0))
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.fit_degree_count < 1:
            raise InvalidParameterError(
                f"fit_degree_count must be at least 1, got {self.fit_degree_count}"
            )
        if self.n_samples < self.fit_degree_count:
            raise InvalidParameterError(
                f"n_samples ({self.n_samples}) must be at least "
                f"fit_degree_count ({self.fit_degree_count})"
            )
        require_positive("delta", self.delta)


@dataclass(frozen=True, slots=True)
class FitSettings:
    """Gradient-descent settings for one fit."""

    loss: HuberParams
    learning_rate: float
    iterations: int = DEFAULT_ITERATIONS
    init: Init = Init.ZEROS
    loss_form: LossForm = LossForm.HUBER

    def __post_init__(self) -> None:
        require_positive("learning_rate", self.learning_rate)
        if self.iterations < 1:
            raise InvalidParameterError(f"iterations must be at least 1, got {self.iterations}")


@dataclass(frozen=True, slots=True, eq=False)
class Dataset:
    """Paired covariates and labels."""

    x: NDArray[np.float64]
    y: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise InvalidParameterError("x and y must be 1-d arrays of equal length")
        if self.x.size == 0:
            raise InvalidParameterError("a dataset needs at least one point")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> Dataset:
        """Build a dataset from (x, y) pairs."""
        arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
        return cls(arr[:, 0].copy(), arr[:, 1].copy())

    def __len__(self) -> int:
        return int(self.x.size)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return zip(self.x.tolist(), self.y.tolist())


@dataclass(frozen=True, slots=True)
class GridCell:
    """Outcome of one (alpha, learning rate) fit."""

    alpha: float
    lr: float
    rmse: float
    diverged_at: int | None = None

    @property
    def diverged(self) -> bool:
        """Whether the fit was abandoned."""
        return self.diverged_at is not None


@dataclass(frozen=True, slots=True)
class GridSearchResult:
    """Best cell of a grid search together with the full table."""

    best_alpha: float
    best_lr: float
    best_rmse: float
    table: tuple[GridCell, ...]


@dataclass(frozen=True, slots=True)
class SweepRun:
    """One repeat at one noise scale; result is None when every cell diverged."""

    scale: float
    repeat: int
    seed: int
    result: GridSearchResult | None

    @property
    def optimal_alpha(self) -> float:
        """Best alpha, NaN for an all-diverged gap."""
        return math.nan if self.result is None else self.result.best_alpha


@dataclass(frozen=True, slots=True)
class SweepPoint:
    """Aggregate over the repeats of one noise scale."""

    scale: float
    mean_alpha: float
    alphas: tuple[float, ...]
    runs: tuple[SweepRun, ...]


def poly_eval(m: PolyModel, x: ArrayLike) -> FloatOrArray:
    """Evaluate sum(coeffs[k] * x**k) by Horner's scheme."""
    return npoly.polyval(np.asarray(x, dtype=np.float64), m.coeffs)[()]


def make_dataset(
    cfg: ToyConfig, split: Split, covariate_split: Split | None = None
) -> Dataset:
    """Synthesise a split of the toy problem.

    Covariates are uniform on [-delta, delta]; training labels get one noise
    draw per point and test labels none. Each split reads its own substreams of
    the seed.

    Args:
        cfg: Dataset settings
        split: Which split to build
        covariate_split: Read covariates from this split's substream instead

    Returns:
        n_samples (x, y) pairs
    """
    rng = RngState(cfg.seed)
    x_split = split if covariate_split is None else covariate_split
    x = np.asarray(
        sample_uniform(
            -cfg.delta, cfg.delta, rng.derive(x_split, _STREAM_COVARIATES), cfg.n_samples
        )
    )
    y = np.asarray(poly_eval(cfg.theta_star, x))
    if split is Split.TRAIN:
        noise = sample_noise(cfg.noise, rng.derive(Split.TRAIN, _STREAM_NOISE), cfg.n_samples)
        y = y + np.asarray(noise)
    return Dataset(x, y)


def objective(
    data: Dataset, m: PolyModel, alpha: float, loss_form: LossForm = LossForm.HUBER
) -> float:
    """Summed training loss of a model."""
    loss_fn, _ = resolve_loss(loss_form, alpha)
    return float(np.sum(loss_fn(data.y - np.asarray(poly_eval(m, data.x)))))


def fit(train: Dataset, K: int, settings: FitSettings) -> PolyModel:  # pylint: disable=invalid-name
    """Fit K coefficients by full-batch gradient descent.

    Each step moves theta along V^T psi(y - V theta), psi being the derivative
    of the chosen loss and V the Vandermonde matrix of the covariates.

    Args:
        train: Training data
        K: Number of coefficients to fit
        settings: Loss, learning rate, iteration budget and initialisation

    Returns:
        The coefficients after the last step

    Raises:
        DivergenceError: If a coefficient becomes non-finite or the objective
            grows past DIVERGENCE_LOSS_RATIO times its initial value
    """
    if K < 1:
        raise InvalidParameterError(f"K must be at least 1, got {K}")
    vander = npoly.polyvander(train.x, K - 1)
    loss_fn, grad_fn = resolve_loss(settings.loss_form, settings.loss.alpha)
    lr = settings.learning_rate
    theta = np.asarray(_INITIALISERS[settings.init](K).coeffs)
    initial = float(np.sum(loss_fn(train.y - vander @ theta)))
    limit = DIVERGENCE_LOSS_RATIO * max(initial, 1.0)

    for iteration in range(1, settings.iterations + 1):
        residual = train.y - vander @ theta
        theta = theta + lr * (vander.T @ grad_fn(residual))
        if not np.all(np.isfinite(theta)):
            _LOGGER.debug("Non-finite coefficient at step %d (lr=%g)", iteration, lr)
            raise DivergenceError(
                f"coefficients became non-finite at iteration {iteration}", iteration
            )
        if iteration % _DIVERGENCE_CHECK_INTERVAL == 0 or iteration == settings.iterations:
            current = float(np.sum(loss_fn(train.y - vander @ theta)))
            if not math.isfinite(current) or current > limit:
                _LOGGER.debug("Runaway objective %g at step %d (lr=%g)", current, iteration, lr)
                raise DivergenceError(
                    f"objective ran away at iteration {iteration}", iteration
                )

    return PolyModel(tuple(theta.tolist()))


def least_squares(train: Dataset, K: int) -> PolyModel:  # pylint: disable=invalid-name
    """Exact least-squares solution of the Vandermonde system."""
    vander = npoly.polyvander(train.x, K - 1)
    solution, *_ = np.linalg.lstsq(vander, train.y, rcond=None)
    return PolyModel(tuple(solution.tolist()))


def rmse(m: PolyModel, test: Dataset) -> float:
    """Root mean square error of a model on a dataset."""
    err = test.y - np.asarray(poly_eval(m, test.x))
    return float(np.sqrt(np.mean(err * err)))


def _unique_grid(values: Sequence[float], name: str) -> tuple[float, ...]:
    if not values:
        raise InvalidParameterError(f"{name} must not be empty")
    for value in values:
        require_positive(name, value)
    return tuple(sorted({float(v) for v in values}))


def _score_cell(
    train: Dataset, test: Dataset, K: int, settings: FitSettings  # pylint: disable=invalid-name
) -> GridCell:
    alpha, lr = settings.loss.alpha, settings.learning_rate
    try:
        model = fit(train, K, settings)
    except DivergenceError as err:
        return GridCell(alpha, lr, math.inf, err.iteration)
    score = rmse(model, test)
    if not math.isfinite(score):
        return GridCell(alpha, lr, math.inf, settings.iterations)
    return GridCell(alpha, lr, score)


def grid_search(
    cfg: ToyConfig,
    alpha_grid: Sequence[float],
    lr_grid: Sequence[float],
    iterations: int = DEFAULT_ITERATIONS,
    loss_form: LossForm = LossForm.HUBER,
) -> GridSearchResult:
    """Fit every (alpha, lr) cell on the training split and score it on the test split.

    Grids are de-duplicated and sorted first; diverged cells score +inf. Ties
    on RMSE go to the smallest alpha, then the smallest learning rate.

    Args:
        cfg: Dataset settings
        alpha_grid: Candidate transition points
        lr_grid: Candidate learning rates
        iterations: Descent steps per cell
        loss_form: Objective to minimise

    Returns:
        The best cell and the full table in (alpha, lr) order

    Raises:
        AllDivergedError: If no cell produced a finite score
    """
    alphas = _unique_grid(alpha_grid, "alpha_grid")
    lrs = _unique_grid(lr_grid, "lr_grid")
    train = make_dataset(cfg, Split.TRAIN)
    test = make_dataset(cfg, Split.TEST)

    table = tuple(
        _score_cell(
            train,
            test,
            cfg.fit_degree_count,
            FitSettings(HuberParams(alpha), lr, iterations, loss_form=loss_form),
        )
        for alpha in alphas
        for lr in lrs
    )
    finite = [cell for cell in table if not cell.diverged]
    _LOGGER.debug(
        "Grid search at seed %d: %d of %d cells finite", cfg.seed, len(finite), len(table)
    )
    if not finite:
        _LOGGER.warning("Every grid cell diverged (seed %d, noise %s)", cfg.seed, cfg.noise)
        raise AllDivergedError(f"all {len(table)} grid cells diverged")

    best = min(finite, key=lambda cell: (cell.rmse, cell.alpha, cell.lr))
    return GridSearchResult(best.alpha, best.lr, best.rmse, table)


def repeat_seed(master_seed: int, repeat: int) -> int:
    """Derive the dataset seed of a sweep repeat.

    The seed depends on the repeat only, so all noise scales of one repeat see
    the same covariates and the same unit-scale noise draws.
    """
    state = np.random.SeedSequence([master_seed, repeat]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _run_repeat(
    base: ToyConfig,
    scale: float,
    repeat: int,
    alpha_grid: Sequence[float],
    lr_grid: Sequence[float],
    iterations: int,
    loss_form: LossForm,
) -> SweepRun:
    seed = repeat_seed(base.seed, repeat)
    cfg = replace(base, noise=base.noise.with_scale(scale), seed=seed)
    try:
        result: GridSearchResult | None = grid_search(
            cfg, alpha_grid, lr_grid, iterations, loss_form
        )
    except AllDivergedError:
        result = None
    return SweepRun(scale, repeat, seed, result)


def _validate_sweep(noise_scales: Sequence[float], repeats: int) -> None:
    if not noise_scales:
        raise InvalidParameterError("noise_scales must not be empty")
    if repeats < 1:
        raise InvalidParameterError(f"repeats must be at least 1, got {repeats}")


def _aggregate(
    noise_scales: Sequence[float], repeats: int, runs: Sequence[SweepRun]
) -> list[SweepPoint]:
    points = []
    for index, scale in enumerate(noise_scales):
        chunk = tuple(runs[index * repeats : (index + 1) * repeats])
        alphas = tuple(run.optimal_alpha for run in chunk)
        finite = [a for a in alphas if not math.isnan(a)]
        mean_alpha = float(np.mean(finite)) if finite else math.nan
        if len(finite) < len(alphas):
            _LOGGER.warning(
                "%d of %d repeats at noise scale %g had no finite cell",
                len(alphas) - len(finite),
                len(alphas),
                scale,
            )
        points.append(SweepPoint(float(scale), mean_alpha, alphas, chunk))
    return points


def noise_sweep(
    base: ToyConfig,
    noise_scales: Sequence[float],
    alpha_grid: Sequence[float],
    lr_grid: Sequence[float],
    iterations: int = DEFAULT_ITERATIONS,
    repeats: int = 1,
    loss_form: LossForm = LossForm.HUBER,
) -> list[SweepPoint]:
    """Run a grid search per (noise scale, repeat) and collect the optimal alphas.

    Args:
        base: Dataset settings; its noise family is kept and its scale replaced
        noise_scales: Scales to sweep
        alpha_grid: Candidate transition points
        lr_grid: Candidate learning rates
        iterations: Descent steps per cell
        repeats: Independent datasets per scale
        loss_form: Objective to minimise

    Returns:
        One point per scale, in the order given
    """
    _validate_sweep(noise_scales, repeats)
    runs = []
    for scale in noise_scales:
        for repeat in range(repeats):
            _LOGGER.debug("Sweeping noise scale %g, repeat %d", scale, repeat)
            runs.append(
                _run_repeat(base, scale, repeat, alpha_grid, lr_grid, iterations, loss_form)
            )
    return _aggregate(noise_scales, repeats, runs)


async def async_noise_sweep(
    base: ToyConfig,
    noise_scales: Sequence[float],
    alpha_grid: Sequence[float],
    lr_grid: Sequence[float],
    iterations: int = DEFAULT_ITERATIONS,
    repeats: int = 1,
    loss_form: LossForm = LossForm.HUBER,
    executor: Executor | None = None,
) -> list[SweepPoint]:
    """Executor-backed form of noise_sweep.

    Every (scale, repeat) grid search runs as its own executor job; results are
    gathered in submission order, so the output matches noise_sweep exactly
    whatever the scheduling.

    Args:
        base: Dataset settings
        noise_scales: Scales to sweep
        alpha_grid: Candidate transition points
        lr_grid: Candidate learning rates
        iterations: Descent steps per cell
        repeats: Independent datasets per scale
        loss_form: Objective to minimise
        executor: Pool to run on, the loop's default executor when None

    Returns:
        One point per scale, in the order given
    """
    _validate_sweep(noise_scales, repeats)
    loop = asyncio.get_running_loop()
    jobs = [
        loop.run_in_executor(
            executor,
            partial(
                _run_repeat, base, scale, repeat, alpha_grid, lr_grid, iterations, loss_form
            ),
        )
        for scale in noise_scales
        for repeat in range(repeats)
    ]
    runs = await asyncio.gather(*jobs)
    _LOGGER.info("Finished %d sweep jobs", len(runs))
    return _aggregate(noise_scales, repeats, runs)


def trend_correlation(curve: Sequence[SweepPoint]) -> float:
    """Spearman rank correlation between noise scale and mean optimal alpha.

    Scales whose repeats all diverged are left out.
    """
    pairs = [(p.scale, p.mean_alpha) for p in curve if not math.isnan(p.mean_alpha)]
    if len(pairs) < 2:
        return math.nan
    scales, alphas = zip(*pairs)
    rho, _ = spearmanr(scales, alphas)
    return float(rho)
