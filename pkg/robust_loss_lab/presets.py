"""Built-in box-regression loss configurations."""

from __future__ import annotations

from fractions import Fraction

from .const import PRESET_TABLE1, PRESET_TWO_STAGE_DETECTOR
from .exceptions import InvalidParameterError
from .interp import BoxRegressionConfig, LossScaling

_PROPOSAL = "Proposal"
_DETECTION = "Detection"


def _experiment(name: str, lam: Fraction) -> BoxRegressionConfig:
    return BoxRegressionConfig.uniform(
        name, lam, 1, Fraction(1, 20), Fraction(1, 10), LossScaling.ALPHA_SCALED
    )


# Two-stage detector settings: the published weights, the reference
# implementation and three re-weighted experiments, each for the proposal
# and the detection network.
TWO_STAGE_DETECTOR: tuple[BoxRegressionConfig, ...] = (
    BoxRegressionConfig.uniform(
        f"Publication {_PROPOSAL}", 10, 1, 1, 1, LossScaling.RAW
    ),
    BoxRegressionConfig.uniform(
        f"Publication {_DETECTION}", 10, 1, 1, 1, LossScaling.RAW
    ),
    BoxRegressionConfig.uniform(
        f"Implementation {_PROPOSAL}", 1, Fraction(1, 9), 1, 1, LossScaling.ALPHA_SCALED
    ),
    BoxRegressionConfig.uniform(
        f"Implementation {_DETECTION}",
        1,
        1,
        Fraction(1, 10),
        Fraction(1, 5),
        LossScaling.ALPHA_SCALED,
    ),
    _experiment(f"Experiment A {_PROPOSAL}", Fraction(1, 4)),
    _experiment(f"Experiment A {_DETECTION}", Fraction(1, 2)),
    _experiment(f"Experiment B {_PROPOSAL}", Fraction(1, 2)),
    _experiment(f"Experiment B {_DETECTION}", Fraction(1)),
    _experiment(f"Experiment C {_PROPOSAL}", Fraction(1, 4)),
    _experiment(f"Experiment C {_DETECTION}", Fraction(1)),
)

PRESETS: dict[str, tuple[BoxRegressionConfig, ...]] = {
    PRESET_TABLE1: TWO_STAGE_DETECTOR,
    PRESET_TWO_STAGE_DETECTOR: TWO_STAGE_DETECTOR,
}


def get_preset(name: str) -> tuple[BoxRegressionConfig, ...]:
    """Look up a preset by name.

    Raises:
        InvalidParameterError: If no preset has that name
    """
    try:
        return PRESETS[name]
    except KeyError as err:
        raise InvalidParameterError(
            f"unknown preset {name!r}, choose from {sorted(PRESETS)}"
        ) from err
