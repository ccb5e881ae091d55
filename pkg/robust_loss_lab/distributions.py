"""Seedable sampling from the label-noise families of the toy problem.

Random streams come from numpy's Philox4x64-10, a counter-based generator:
every draw is a keyed bijection of a 256-bit counter, so a stream is fully
described by its key. The key is derived with numpy's SeedSequence from the
integer path (seed, *indices), which gives independent child streams for
train/test splits, covariates/noise and sweep repeats without sharing state.

Noise draws are inverse-CDF transforms of one open-interval uniform each:

    Laplace   -sign(u - 1/2) * log(1 - 2|u - 1/2|)
    Logistic  log(u / (1 - u))
    Cauchy    tan(pi * (u - 1/2))
    Gaussian  Phi^-1(u)

scaled by the family's canonical scale (b, s, gamma, sigma).
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum
import math

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtri

from .const import GOLDEN_DRAWS, _LOGGER
from .exceptions import InvalidParameterError
from .losses import FloatOrArray

_MAX_SEED = 2**64


class NoiseFamily(StrEnum):
    """Label-noise distribution family."""

    LAPLACE = "laplace"
    LOGISTIC = "logistic"
    CAUCHY = "cauchy"
    GAUSSIAN = "gaussian"
    NONE = "none"


@dataclass(frozen=True, slots=True)
class NoiseSpec:
    """Noise family plus its canonical scale parameter."""

    family: NoiseFamily
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.scale) or self.scale < 0:
            raise InvalidParameterError(
                f"noise scale must be finite and non-negative, got {self.scale!r}"
            )

    def with_scale(self, scale: float) -> NoiseSpec:
        """Return the same family at another scale."""
        return NoiseSpec(self.family, scale)


class RngState:
    """A deterministic random stream identified by (seed, path).

    Owned by one execution context at a time; parallel work derives its own
    child with derive() instead of sharing an instance.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()) -> None:
        """Initialize the stream.

        Args:
            seed: 64-bit unsigned master seed
            path: Task indices identifying the child stream

        Raises:
            InvalidParameterError: If the seed or a path index is out of range
        """
        if not 0 <= seed < _MAX_SEED:
            raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if any(index < 0 for index in path):
            raise InvalidParameterError(f"stream path indices must be non-negative, got {path}")
        self.seed = seed
        self.path = path
        self._generator = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([seed, *path]))
        )

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, path={self.path})"

    def derive(self, *path: int) -> RngState:
        """Return a fresh child stream for a sub-task."""
        return RngState(self.seed, self.path + path)

    @property
    def counter(self) -> list[int]:
        """Current Philox counter words."""
        state = self._generator.bit_generator.state
        return [int(word) for word in state["state"]["counter"]]

    def open_uniform(self, size: int | None = None) -> FloatOrArray:
        """Draw uniforms from the open interval (0, 1).

        The underlying generator samples [0, 1); exact zeros are redrawn so the
        log and tan transforms never see an endpoint.

        Args:
            size: Number of draws, or None for a single scalar

        Returns:
            A numpy float64 scalar or an array of shape (size,)
        """
        u = np.atleast_1d(self._generator.random(size))
        zeros = u == 0.0
        while zeros.any():
            u[zeros] = self._generator.random(int(zeros.sum()))
            zeros = u == 0.0
        return u[0] if size is None else u


def _laplace_unit(u: NDArray[np.float64]) -> NDArray[np.float64]:
    centred = u - 0.5
    return -np.sign(centred) * np.log1p(-2.0 * np.abs(centred))


def _logistic_unit(u: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.log(u) - np.log1p(-u)


def _cauchy_unit(u: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.tan(np.pi * (u - 0.5))


_UNIT_INVERSE_CDF: dict[NoiseFamily, Callable[[NDArray[np.float64]], NDArray[np.float64]]] = {
    NoiseFamily.LAPLACE: _laplace_unit,
    NoiseFamily.LOGISTIC: _logistic_unit,
    NoiseFamily.CAUCHY: _cauchy_unit,
    NoiseFamily.GAUSSIAN: ndtri,
}


def sample_noise(spec: NoiseSpec, rng: RngState, size: int | None = None) -> FloatOrArray:
    """Draw zero-location noise.

    Args:
        spec: Family and scale
        rng: Stream to consume, left untouched for the NONE family
        size: Number of draws, or None for a single scalar

    Returns:
        scale times the unit-scale inverse-CDF draw; exactly 0 for NONE
    """
    if spec.family is NoiseFamily.NONE:
        return np.float64(0.0) if size is None else np.zeros(size)
    unit = _UNIT_INVERSE_CDF[spec.family](np.asarray(rng.open_uniform(size)))
    return (spec.scale * unit)[()]


def sample_uniform(
    lo: float, hi: float, rng: RngState, size: int | None = None
) -> FloatOrArray:
    """Draw uniformly from [lo, hi].

    Raises:
        InvalidParameterError: If lo > hi or a bound is not finite
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise InvalidParameterError(f"invalid uniform interval [{lo}, {hi}]")
    u = np.asarray(rng.open_uniform(size))
    return (lo + (hi - lo) * u)[()]


def first_draws(seed: int, n: int = GOLDEN_DRAWS) -> dict[str, list[float]]:
    """The first n unit-scale draws of every family at a seed.

    Each family gets a fresh stream keyed on the seed alone, so the values are
    what a ToyConfig noise stream would start with at scale 1.

    Args:
        seed: Master seed
        n: Number of draws per family

    Returns:
        Mapping of family name to draws, in NoiseFamily order
    """
    draws: dict[str, list[float]] = {}
    for family in NoiseFamily:
        values = sample_noise(NoiseSpec(family, 1.0), RngState(seed), n)
        draws[family.value] = [float(v) for v in np.atleast_1d(values)]
    _LOGGER.debug("Generated %d draws per family at seed %d", n, seed)
    return draws
