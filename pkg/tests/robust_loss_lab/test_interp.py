"""Tests for the hyper-parameter interpretation calculus."""

from fractions import Fraction
import math

import numpy as np
import pytest

from robust_loss_lab.exceptions import InvalidParameterError, InvalidRangeError
from robust_loss_lab.interp import (
    TABLE_ROWS,
    AnchorDim,
    BoxRegressionConfig,
    Coordinate,
    CoordinateLossSpec,
    LossScaling,
    UncertaintyScale,
    decode_center_target,
    decode_size_target,
    encode_center_target,
    encode_size_target,
    interpret_all,
    interpret_config,
    interpret_coordinate,
    log_domain_params,
    log_target_approx_bound,
    log_target_approx_error,
    parse_rational,
    residual_gamma,
)
from robust_loss_lab.losses import BoundSide, HuberParams, KlLossParams, huber, kl_loss
from robust_loss_lab.presets import TWO_STAGE_DETECTOR, get_preset


def _cell_coefficient(cell: str) -> Fraction:
    """Coefficient of a rendered cell such as 'w_a', 'h_a/9' or '2*w_a/5'."""
    numerator, _, rest = cell.rpartition("*")
    _, _, denominator = rest.partition("/")
    return Fraction(int(numerator or 1), int(denominator or 1))


def _spec(coordinate=Coordinate.CENTER_X, lam=1, alpha=1, sigma=1, mu=0, form=LossScaling.RAW):
    return CoordinateLossSpec(coordinate, lam, alpha, sigma, mu, form)


@pytest.mark.parametrize(
    ("coordinate", "sigma", "expected"),
    [
        (Coordinate.CENTER_X, 1, Fraction(1)),
        (Coordinate.CENTER_X, Fraction(1, 10), Fraction(10)),
        (Coordinate.WIDTH, Fraction(1, 5), Fraction(5)),
    ],
)
def test_residual_gamma(coordinate, sigma, expected):
    """Test the residual coefficient per anchor dimension."""
    assert residual_gamma(_spec(coordinate, sigma=sigma)) == expected


@pytest.mark.parametrize(
    ("spec", "label", "prediction"),
    [
        (
            _spec(sigma=Fraction(1, 10), form=LossScaling.ALPHA_SCALED),
            UncertaintyScale(Fraction(1, 10), AnchorDim.WIDTH),
            UncertaintyScale(Fraction(1, 10), AnchorDim.WIDTH),
        ),
        (
            _spec(lam=10),
            UncertaintyScale(Fraction(1), AnchorDim.WIDTH),
            UncertaintyScale(Fraction(1, 10), AnchorDim.WIDTH),
        ),
        (
            _spec(
                Coordinate.WIDTH,
                lam=Fraction(1, 4),
                sigma=Fraction(1, 10),
                form=LossScaling.ALPHA_SCALED,
            ),
            UncertaintyScale(Fraction(1, 10), AnchorDim.WIDTH),
            UncertaintyScale(Fraction(2, 5), AnchorDim.WIDTH),
        ),
    ],
)
def test_interpret_coordinate_examples(spec, label, prediction):
    """Test single-coordinate interpretations against published cells."""
    assert interpret_coordinate(spec) == (label, prediction)


def test_height_coordinates_use_anchor_height():
    """Test the anchor dimension of y and h."""
    label, prediction = interpret_coordinate(_spec(Coordinate.HEIGHT))
    assert label.anchor_dim is prediction.anchor_dim is AnchorDim.HEIGHT
    assert interpret_coordinate(_spec(Coordinate.CENTER_Y))[0].render() == "h_a"


def test_upper_bound_halves_the_label():
    """Test that the upper bound only changes the label scale."""
    spec = _spec(lam=10, sigma=Fraction(1, 10))
    lower_label, lower_pred = interpret_coordinate(spec, BoundSide.LOWER)
    upper_label, upper_pred = interpret_coordinate(spec, BoundSide.UPPER)
    assert upper_label.coefficient == lower_label.coefficient / 2
    assert upper_pred == lower_pred


def test_detector_table_reproduced_exactly(detector_golden):
    """Test all 80 published cells, both as rendered text and as exact fractions."""
    tables = interpret_all(TWO_STAGE_DETECTOR)
    assert [table.name for table in tables] == list(detector_golden)
    for table in tables:
        golden = detector_golden[table.name]
        assert [label for label, _ in table] == list(TABLE_ROWS)
        assert table.rendered() == [golden[row] for row in TABLE_ROWS]
        for row in TABLE_ROWS:
            assert table[row].coefficient == _cell_coefficient(golden[row])


def test_implementation_proposal_column():
    """Test the column where label and prediction trade places."""
    table = interpret_config(get_preset("two-stage-detector")[2])
    assert table.rendered() == ["w_a/9", "h_a/9", "w_a/9", "h_a/9", "w_a", "h_a", "w_a", "h_a"]


def test_trivial_config():
    """Test that unit weight, transition and scaling give full anchor scales."""
    cfg = BoxRegressionConfig.uniform("trivial", 1, 1, 1, 1, LossScaling.RAW)
    assert interpret_config(cfg).rendered() == ["w_a", "h_a", "w_a", "h_a"] * 2


def test_config_orders_specs_and_validates():
    """Test coordinate reordering and rejection of incomplete configs."""
    specs = tuple(_spec(c) for c in reversed(list(Coordinate)))
    cfg = BoxRegressionConfig("reordered", specs)
    assert [spec.coordinate for spec in cfg.specs] == list(Coordinate)
    assert cfg.spec(Coordinate.WIDTH).coordinate is Coordinate.WIDTH
    with pytest.raises(InvalidParameterError):
        BoxRegressionConfig("short", specs[:3])
    with pytest.raises(InvalidParameterError):
        BoxRegressionConfig("duplicate", specs[:3] + (specs[0],))


@pytest.mark.parametrize("field", ["lam", "alpha", "sigma"])
def test_non_positive_parameters_rejected(field):
    """Test the positivity of weight, transition point and scaling."""
    kwargs = {"lam": 1, "alpha": 1, "sigma": 1, field: 0}
    with pytest.raises(InvalidParameterError):
        _spec(**kwargs)


def test_scale_forms_are_equivalent():
    """Test raw weight lam * alpha against alpha-scaled weight lam * alpha**2."""
    lam, alpha, sigma = Fraction(3, 7), Fraction(2, 3), Fraction(1, 10)
    raw = _spec(lam=lam * alpha, alpha=alpha, sigma=sigma)
    scaled = _spec(lam=lam * alpha**2, alpha=alpha, sigma=sigma, form=LossScaling.ALPHA_SCALED)
    assert interpret_coordinate(raw) == interpret_coordinate(scaled)


def test_mu_does_not_change_scales():
    """Test that the target shift leaves both uncertainties untouched."""
    base = _spec(Coordinate.WIDTH, lam=2, sigma=Fraction(1, 5))
    shifted = _spec(Coordinate.WIDTH, lam=2, sigma=Fraction(1, 5), mu=Fraction(-3, 2))
    assert interpret_coordinate(base) == interpret_coordinate(shifted)


@pytest.mark.parametrize("cfg", TWO_STAGE_DETECTOR, ids=lambda cfg: cfg.name)
def test_interpretation_is_a_lower_bound(cfg):
    """Test w_eff * huber(gamma * x) >= kl_loss(x, label, prediction) in anchor units."""
    xs = np.linspace(-20.0, 20.0, 4001)
    for spec in cfg.specs:
        label, prediction = interpret_coordinate(spec)
        gamma = float(residual_gamma(spec))
        weighted = float(spec.effective_weight) * np.asarray(
            huber(gamma * xs, HuberParams(float(spec.alpha)))
        )
        kl = np.asarray(
            kl_loss(xs, KlLossParams(float(label.coefficient), float(prediction.coefficient)))
        )
        assert np.all(kl <= weighted * (1 + 1e-12) + 1e-15)


def test_log_domain_params():
    """Test the exact log-domain parameters of the size coordinates."""
    cfg = TWO_STAGE_DETECTOR[3]
    assert log_domain_params(cfg.spec(Coordinate.WIDTH)) == (Fraction(1, 5), Fraction(1, 5))
    assert log_domain_params(cfg.spec(Coordinate.HEIGHT), BoundSide.UPPER) == (
        Fraction(1, 10),
        Fraction(1, 5),
    )
    assert interpret_config(cfg).log_domain == (
        ("w", Fraction(1, 5), Fraction(1, 5)),
        ("h", Fraction(1, 5), Fraction(1, 5)),
    )
    with pytest.raises(InvalidParameterError):
        log_domain_params(cfg.spec(Coordinate.CENTER_X))


def test_uncertainty_scale_rendering():
    """Test the symbolic cell format."""
    assert UncertaintyScale(Fraction(1), AnchorDim.WIDTH).render() == "w_a"
    assert UncertaintyScale(Fraction(1, 9), AnchorDim.HEIGHT).render() == "h_a/9"
    assert str(UncertaintyScale(Fraction(2, 5), AnchorDim.WIDTH)) == "2*w_a/5"
    assert UncertaintyScale(Fraction(3), AnchorDim.WIDTH).render() == "3*w_a"
    with pytest.raises(InvalidParameterError):
        UncertaintyScale(Fraction(0), AnchorDim.WIDTH)


def test_table_lookup():
    """Test row lookup on an interpretation table."""
    table = interpret_config(TWO_STAGE_DETECTOR[0])
    assert table["x~"].render() == "w_a/10"
    with pytest.raises(KeyError):
        table["z*"]  # pylint: disable=pointless-statement


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        (3, Fraction(3)),
        ("1/9", Fraction(1, 9)),
        (" 2/10 ", Fraction(1, 5)),
        ("0.05", Fraction(1, 20)),
        (0.1, Fraction(1, 10)),
        (Fraction(2, 5), Fraction(2, 5)),
    ],
)
def test_parse_rational(value, expected):
    """Test exact parsing of configuration numbers."""
    assert parse_rational(value) == expected


@pytest.mark.parametrize("value", [True, None, "abc", "1/0", math.nan, math.inf, [1]])
def test_parse_rational_rejects(value):
    """Test rejection of non-rational inputs."""
    with pytest.raises(InvalidParameterError):
        parse_rational(value)


def test_center_target_round_trip():
    """Test encoding and decoding of an anchor-relative center."""
    spec = _spec(sigma=Fraction(1, 10), mu=Fraction(1, 20))
    target = encode_center_target(15.0, 10.0, 20.0, spec)
    assert target == pytest.approx((5.0 / 20.0 - 0.05) / 0.1)
    assert decode_center_target(target, 10.0, 20.0, spec) == pytest.approx(15.0)
    with pytest.raises(InvalidParameterError):
        encode_center_target(1.0, 0.0, 0.0, spec)


def test_size_target_forms():
    """Test the exact and linearised size targets."""
    spec = _spec(Coordinate.WIDTH, sigma=Fraction(1, 5))
    exact = encode_size_target(20.0, 10.0, spec)
    assert exact == pytest.approx(math.log(2.0) / 0.2)
    assert encode_size_target(20.0, 10.0, spec, approximate=True) == pytest.approx(5.0)
    assert decode_size_target(exact, 10.0, spec) == pytest.approx(20.0)
    assert encode_size_target(10.0, 10.0, spec) == 0.0
    with pytest.raises(InvalidParameterError):
        encode_size_target(-1.0, 10.0, spec)


@pytest.mark.parametrize(
    ("lo", "hi", "n_grid", "limit"),
    [(1.0, 1.0, 5, 0.0), (0.7, 1.4, 1001, 0.07), (0.99, 1.01, 101, 1e-4)],
)
def test_log_target_approx_error(lo, hi, n_grid, limit):
    """Test the first-order log approximation error on published ratio ranges."""
    error = log_target_approx_error(lo, hi, n_grid)
    assert error <= limit
    assert error == pytest.approx(log_target_approx_bound(lo, hi), rel=1e-9, abs=1e-15)


def test_log_target_approx_rejects_bad_ranges():
    """Test range validation."""
    with pytest.raises(InvalidRangeError):
        log_target_approx_error(1.4, 0.7, 11)
    with pytest.raises(InvalidParameterError):
        log_target_approx_error(0.0, 1.0, 11)
    with pytest.raises(InvalidParameterError):
        log_target_approx_error(0.5, 1.0, 0)
    with pytest.raises(InvalidRangeError):
        log_target_approx_bound(2.0, 1.0)


def test_unknown_preset():
    """Test preset lookup failure."""
    with pytest.raises(InvalidParameterError):
        get_preset("nope")
