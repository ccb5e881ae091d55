"""Robust regression losses: Huber, KL-Laplace and their interpretation."""

from .divergence import LaplaceDist, QuadratureSpec, kl_numeric, laplace_kl
from .exceptions import (
    AllDivergedError,
    ConfigValidationError,
    DivergenceError,
    InvalidParameterError,
    InvalidRangeError,
    RobustLossLabError,
    VerificationError,
)
from .losses import (
    BoundSide,
    HuberParams,
    KlLossParams,
    LossForm,
    huber,
    huber_equivalent_params,
    huber_grad,
    kl_loss,
    kl_loss_grad,
    kl_loss_hess,
    lower_bound_params,
    rescale_params,
    upper_bound_params,
)

__version__ = "1.0.0"

__all__ = [
    "AllDivergedError",
    "BoundSide",
    "ConfigValidationError",
    "DivergenceError",
    "HuberParams",
    "InvalidParameterError",
    "InvalidRangeError",
    "KlLossParams",
    "LaplaceDist",
    "LossForm",
    "QuadratureSpec",
    "RobustLossLabError",
    "VerificationError",
    "huber",
    "huber_equivalent_params",
    "huber_grad",
    "kl_loss",
    "kl_loss_grad",
    "kl_loss_hess",
    "kl_numeric",
    "laplace_kl",
    "lower_bound_params",
    "rescale_params",
    "upper_bound_params",
]
