"""Tests for the closed-form losses and the scaling calculus."""

import math

from hypothesis import assume, given, strategies as st
import numpy as np
import pytest

from robust_loss_lab.exceptions import InvalidParameterError
from robust_loss_lab.losses import (
    BoundSide,
    HuberParams,
    KlLossParams,
    LossForm,
    bound_params,
    bound_violation,
    huber,
    huber_equivalent_params,
    huber_grad,
    huber_hess,
    kl_loss,
    kl_loss_grad,
    kl_loss_hess,
    kl_loss_piecewise_approx,
    l1,
    l1_grad,
    l2,
    l2_grad,
    lower_bound_params,
    rescale_params,
    resolve_loss,
    tail_gap_limit,
    upper_bound_params,
)

CURVE_ALPHAS = (0.1, 1.0, 10.0)

residuals = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)
scales = st.floats(min_value=1e-2, max_value=1e2)


@pytest.mark.parametrize(("x", "expected"), [(0.0, 0.0), (-3.0, 3.0), (2.5, 2.5)])
def test_l1(x, expected):
    """Test the absolute loss."""
    assert l1(x) == expected


@pytest.mark.parametrize(("x", "expected"), [(0.0, 0.0), (2.0, 2.0), (-2.0, 2.0)])
def test_l2(x, expected):
    """Test the squared loss."""
    assert l2(x) == expected


def test_l1_l2_gradients():
    """Test the derivatives of the absolute and squared losses."""
    assert l1_grad(0.0) == 0.0
    assert l1_grad(-4.0) == -1.0
    assert l2_grad(-4.0) == -4.0


@pytest.mark.parametrize(("x", "expected"), [(0.0, 0.0), (1.0, 0.5), (3.0, 2.5)])
def test_huber_examples(x, expected):
    """Test both branches of the Huber loss at alpha = 1."""
    assert huber(x, HuberParams(1.0)) == expected


@pytest.mark.parametrize(
    ("x", "alpha", "expected"), [(0.0, 1.0, 0.0), (0.5, 1.0, 0.5), (-7.0, 2.0, -2.0)]
)
def test_huber_grad_examples(x, alpha, expected):
    """Test the Huber derivative."""
    assert huber_grad(x, HuberParams(alpha)) == expected


def test_huber_grad_continuous_at_transition():
    """Test that both branches of the derivative meet at |x| = alpha."""
    p = HuberParams(2.0)
    assert huber_grad(2.0, p) == 2.0
    assert huber_grad(math.nextafter(2.0, math.inf), p) == 2.0
    assert huber_grad(-2.0, p) == -2.0


def test_huber_hess():
    """Test the Huber second derivative."""
    p = HuberParams(1.0)
    xs = np.array([-2.0, -1.0, 0.0, 0.5, 3.0])
    np.testing.assert_array_equal(huber_hess(xs, p), [0, 1, 1, 1, 0])


def test_scalars_and_arrays():
    """Test that scalars give numpy floats and arrays give arrays."""
    p = KlLossParams(1.0, 1.0)
    scalar = kl_loss(2.0, p)
    assert isinstance(scalar, np.float64)
    values = kl_loss(np.array([0.0, 1.0, -1.0]), p)
    assert isinstance(values, np.ndarray)
    assert values.shape == (3,)
    assert values[1] == values[2]


def test_kl_loss_examples():
    """Test the KL-Laplace loss at the origin and in the tail."""
    assert kl_loss(0.0, KlLossParams(1.0, 1.0)) == 0.0
    assert kl_loss(10.0, KlLossParams(1.0, 1.0)) == pytest.approx(math.exp(-10) + 9, rel=1e-14)


@pytest.mark.parametrize("x", [1e-6, 1e-8, -1e-8])
def test_kl_loss_accurate_near_origin(x):
    """Test full relative accuracy of tiny residuals against x^2 / (2 alpha beta)."""
    assert kl_loss(x, KlLossParams(1.0, 1.0)) == pytest.approx(x * x / 2, rel=1e-6)
    assert kl_loss(1e-200, KlLossParams(1.0, 1.0)) == 0.0


def test_kl_loss_grad_examples():
    """Test the KL-Laplace derivative."""
    assert kl_loss_grad(0.0, KlLossParams(3.0, 0.5)) == 0.0
    assert kl_loss_grad(100.0, KlLossParams(1.0, 2.0)) == pytest.approx(0.5)
    assert kl_loss_grad(-1.0, KlLossParams(1.0, 1.0)) == pytest.approx(-(1 - math.exp(-1)))


def test_kl_loss_hess_examples():
    """Test the KL-Laplace second derivative."""
    assert kl_loss_hess(0.0, KlLossParams(2.0, 3.0)) == 1.0 / 6.0
    assert kl_loss_hess(1.0, KlLossParams(1.0, 1.0)) == pytest.approx(math.exp(-1))
    assert kl_loss_hess(1e3, KlLossParams(1.0, 1.0)) == pytest.approx(0.0, abs=1e-300)


@pytest.mark.parametrize(
    ("x", "alpha", "beta", "expected"),
    [(0.0, 1.0, 1.0, 0.0), (0.5, 1.0, 1.0, 0.125), (3.0, 1.0, 2.0, 1.0)],
)
def test_piecewise_approx_examples(x, alpha, beta, expected):
    """Test both branches of the piecewise approximation."""
    assert kl_loss_piecewise_approx(x, KlLossParams(alpha, beta)) == pytest.approx(expected)


@pytest.mark.parametrize(
    ("alpha", "lower", "upper"),
    [(1.0, (1.0, 1.0), (0.5, 1.0)), (10.0, (10.0, 0.1), (5.0, 0.1)), (2.0, (2.0, 0.5), (1.0, 0.5))],
)
def test_bound_params(alpha, lower, upper):
    """Test the lower and upper bound configurations."""
    assert lower_bound_params(alpha) == KlLossParams(*lower)
    assert upper_bound_params(alpha) == KlLossParams(*upper)
    assert bound_params(alpha, BoundSide.LOWER) == KlLossParams(*lower)
    assert bound_params(alpha, BoundSide.UPPER) == KlLossParams(*upper)
    assert lower_bound_params(0.1) == KlLossParams(0.1, 10.0)


def test_rescale_params_examples():
    """Test input scaling and output weighting of the loss parameters."""
    p = KlLossParams(1.0, 1.0)
    assert rescale_params(p, 2.0, 1.0) == KlLossParams(0.5, 0.5)
    assert rescale_params(p, 1.0, 4.0) == KlLossParams(1.0, 0.25)
    q = KlLossParams(3.0, 7.0)
    assert rescale_params(q, 1.0, 1.0) == q


def test_huber_equivalent_params_examples():
    """Test the weighted Huber to KL conversion on anchor-style arguments."""
    assert huber_equivalent_params(1.0, 1.0, 1.0) == KlLossParams(1.0, 1.0)
    anchor = 64.0
    published = huber_equivalent_params(1.0, 1.0 / anchor, 10.0)
    assert published.alpha == pytest.approx(anchor)
    assert published.beta == pytest.approx(anchor / 10)
    implementation = huber_equivalent_params(1.0 / 9.0, 1.0 / anchor, 9.0)
    assert implementation.alpha == pytest.approx(anchor / 9)
    assert implementation.beta == pytest.approx(anchor)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf, "1"])
def test_invalid_parameters(bad):
    """Test that non-positive and non-finite parameters are rejected."""
    with pytest.raises(InvalidParameterError):
        HuberParams(bad)
    with pytest.raises(InvalidParameterError):
        KlLossParams(1.0, bad)
    with pytest.raises(ValueError):
        lower_bound_params(bad)


def test_rescale_rejects_non_positive_factors():
    """Test that gamma and lambda must be positive."""
    with pytest.raises(InvalidParameterError):
        rescale_params(KlLossParams(1.0, 1.0), 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        huber_equivalent_params(1.0, 1.0, -2.0)


@given(x=residuals, alpha=scales, beta=scales)
def test_nonnegative_and_even(x, alpha, beta):
    """Test that both losses are non-negative and even."""
    p = KlLossParams(alpha, beta)
    assert kl_loss(x, p) >= 0.0
    assert kl_loss(x, p) == kl_loss(-x, p)
    assert huber(x, HuberParams(alpha)) >= 0.0
    assert huber(x, HuberParams(alpha)) == huber(-x, HuberParams(alpha))


@given(x=residuals, alpha=scales, beta=scales)
def test_positive_away_from_origin(x, alpha, beta):
    """Test that the minimum at zero is the only zero."""
    assume(abs(x) >= 1e-6 * alpha)
    assert kl_loss(x, KlLossParams(alpha, beta)) > 0.0
    assert huber(x, HuberParams(alpha)) > 0.0


@given(x=st.floats(min_value=-1e4, max_value=1e4, allow_nan=False), alpha=scales)
def test_bound_sandwich_property(x, alpha):
    """Test lower <= huber <= upper at arbitrary residuals."""
    h = float(huber(x, HuberParams(alpha)))
    slack = 1e-12 * max(1.0, h)
    assert float(kl_loss(x, lower_bound_params(alpha))) <= h + slack
    assert h <= float(kl_loss(x, upper_bound_params(alpha))) + slack


@pytest.mark.parametrize("alpha", CURVE_ALPHAS)
def test_bound_sandwich_dense_grid(alpha):
    """Test the sandwich on 1e5 points over [-100 alpha, 100 alpha]."""
    xs = np.linspace(-100 * alpha, 100 * alpha, 100_000)
    assert bound_violation(lower_bound_params(alpha), alpha, BoundSide.LOWER, xs) < 1e-12
    assert bound_violation(upper_bound_params(alpha), alpha, BoundSide.UPPER, xs) < 1e-12


@pytest.mark.parametrize("alpha", CURVE_ALPHAS)
def test_tightness_limits(alpha):
    """Test the tail gaps of both bounds at x = 50 alpha."""
    x = 50 * alpha
    h = float(huber(x, HuberParams(alpha)))
    scale = max(1.0, alpha * alpha)
    assert abs(float(kl_loss(x, upper_bound_params(alpha))) - h) < 1e-10 * scale
    assert abs(h - float(kl_loss(x, lower_bound_params(alpha))) - alpha**2 / 2) < 1e-10 * scale


def test_tail_gap_limit():
    """Test the classification of the tail gap."""
    assert tail_gap_limit(upper_bound_params(3.0), 3.0) == 0.0
    assert tail_gap_limit(lower_bound_params(3.0), 3.0) == pytest.approx(-4.5)
    assert tail_gap_limit(KlLossParams(1.0, 0.5), 1.0) == math.inf
    assert tail_gap_limit(KlLossParams(1.0, 2.0), 1.0) == -math.inf


@pytest.mark.parametrize("alpha", CURVE_ALPHAS)
def test_intermediate_label_scale_is_not_a_lower_bound(alpha):
    """Test that a label scale between alpha/2 and alpha crosses the Huber loss."""
    xs = np.linspace(-10 * alpha, 10 * alpha, 10_001)
    assert bound_violation(KlLossParams(0.75 * alpha, 1 / alpha), alpha, BoundSide.LOWER, xs) > 0


@pytest.mark.parametrize("alpha", CURVE_ALPHAS)
@pytest.mark.parametrize("beta_factor", [1.0, 0.5, 3.0])
def test_gradient_matches_finite_differences(alpha, beta_factor):
    """Test the analytic gradient against central differences away from zero."""
    p = KlLossParams(alpha, beta_factor / alpha)
    xs = np.linspace(-10 * alpha, 10 * alpha, 4001)
    h = 1e-6 * np.maximum(1.0, np.abs(xs))
    keep = np.abs(xs) >= 10 * h
    xs, h = xs[keep], h[keep]
    fd = (kl_loss(xs + h, p) - kl_loss(xs - h, p)) / (2 * h)
    grad = kl_loss_grad(xs, p)
    assert np.max(np.abs(fd - grad) / np.abs(grad)) < 1e-5


@pytest.mark.parametrize("alpha", CURVE_ALPHAS)
def test_hessian_matches_finite_differences(alpha):
    """Test the analytic Hessian against differences of the gradient."""
    p = lower_bound_params(alpha)
    xs = np.linspace(-5 * alpha, 5 * alpha, 2001)
    h = 1e-6 * np.maximum(1.0, np.abs(xs))
    keep = np.abs(xs) >= 10 * h
    xs, h = xs[keep], h[keep]
    fd = (kl_loss_grad(xs + h, p) - kl_loss_grad(xs - h, p)) / (2 * h)
    hess = kl_loss_hess(xs, p)
    assert np.max(np.abs(fd - hess) / hess) < 1e-4


@pytest.mark.parametrize("alpha", CURVE_ALPHAS)
def test_derivatives_at_origin(alpha):
    """Test one-sided difference quotients at zero."""
    p = upper_bound_params(alpha)
    h = 1e-6
    assert kl_loss_grad(0.0, p) == 0.0
    assert abs(float(kl_loss(h, p)) / h) < 1e-5
    peak = 1 / (p.alpha * p.beta)
    assert kl_loss_hess(0.0, p) == peak
    assert abs(float(kl_loss_grad(h, p)) / h - peak) / peak < 1e-4


@given(alpha=scales, beta=scales, ratio=st.floats(min_value=1e-4, max_value=0.1))
def test_second_order_approximation(alpha, beta, ratio):
    """Test the quadratic approximation near the origin."""
    x = ratio * alpha * 0.999
    quad = x * x / (2 * alpha * beta)
    assert abs(float(kl_loss(x, KlLossParams(alpha, beta))) - quad) / quad < 0.1


@given(x=residuals, alpha=scales, beta=scales)
def test_piecewise_gap_bounded(x, alpha, beta):
    """Test that the piecewise approximation never drifts by more than alpha/beta."""
    p = KlLossParams(alpha, beta)
    gap = abs(float(kl_loss(x, p)) - float(kl_loss_piecewise_approx(x, p)))
    assert gap <= alpha / beta * (1 + 1e-12)


def test_piecewise_gap_vanishes_in_tail():
    """Test that the dropped exponential term vanishes far from the origin."""
    p = KlLossParams(2.0, 0.5)
    assert kl_loss(100.0, p) == pytest.approx(kl_loss_piecewise_approx(100.0, p), abs=1e-12)


@given(
    ratio=st.floats(min_value=1e-2, max_value=1e2),
    negative=st.booleans(),
    alpha=scales,
    beta=scales,
    gamma=st.floats(min_value=0.1, max_value=10.0),
    lam=st.floats(min_value=0.1, max_value=10.0),
)
def test_rescale_identity(ratio, negative, alpha, beta, gamma, lam):
    """Test lam * D(gamma x) == D'(x) with the rescaled parameters."""
    x = ratio * alpha / gamma * (-1.0 if negative else 1.0)
    p = KlLossParams(alpha, beta)
    lhs = lam * float(kl_loss(gamma * x, p))
    rhs = float(kl_loss(x, rescale_params(p, gamma, lam)))
    assert rhs == pytest.approx(lhs, rel=1e-12)


@pytest.mark.parametrize("form", list(LossForm))
def test_resolve_loss(form):
    """Test that every objective resolves to a matching loss and derivative."""
    loss, grad = resolve_loss(form, 2.0)
    xs = np.array([-5.0, 0.0, 0.5, 5.0])
    expected = {
        LossForm.HUBER: huber(xs, HuberParams(2.0)),
        LossForm.KL_UPPER: kl_loss(xs, upper_bound_params(2.0)),
        LossForm.KL_LOWER: kl_loss(xs, lower_bound_params(2.0)),
    }[form]
    np.testing.assert_array_equal(loss(xs), expected)
    assert grad(0.0) == 0.0
