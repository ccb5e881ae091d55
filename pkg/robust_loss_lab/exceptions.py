"""Exceptions raised by the robust loss lab."""

from __future__ import annotations


class RobustLossLabError(Exception):
    """Base class for robust loss lab errors."""


class InvalidParameterError(RobustLossLabError, ValueError):
    """A loss, distribution, dataset or grid parameter was rejected."""


class InvalidRangeError(RobustLossLabError, ValueError):
    """An evaluation range is reversed or degenerate."""


class DivergenceError(RobustLossLabError):
    """Gradient descent left the finite, non-runaway regime."""

    def __init__(self, message: str, iteration: int) -> None:
        """Initialize the error.

        Args:
            message: Human readable description
            iteration: Index of the descent step that diverged
        """
        super().__init__(message)
        self.iteration = iteration


class AllDivergedError(RobustLossLabError):
    """Every cell of a grid search diverged."""


class ConfigValidationError(RobustLossLabError):
    """A run configuration document was rejected."""

    def __init__(self, message: str, path: str = "") -> None:
        """Initialize the error.

        Args:
            message: Validation message
            path: Dotted path of the offending field
        """
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class VerificationError(RobustLossLabError):
    """An invariant check of the verification suite failed."""

    def __init__(self, check: str, violation: float) -> None:
        """Initialize the error.

        Args:
            check: Name of the first failing check
            violation: Its maximum violation
        """
        super().__init__(f"Check {check} failed (max violation {violation:.3e})")
        self.check = check
        self.violation = violation
