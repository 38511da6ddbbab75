import logging
import math

import numpy as np
import pytest

from fidelity import (
    EmptyBoundsError,
    FidelityBounds,
    FidelityKind,
    FidelitySpec,
    UnsupportedSpecError,
    bias_distortion_bound,
    bound_family,
    bounds_for,
    bounds_from_alpha,
    bounds_from_delta,
)

logging.basicConfig(level=logging.INFO)


def test_delta_bounds_clip_to_unit_interval():
    b = bounds_from_delta([0.0, 0.5, 1.0], 0.9)
    np.testing.assert_allclose(b.x_min, [0.0, 0.4, 0.9])
    np.testing.assert_allclose(b.x_max, [0.1, 0.6, 1.0])
    np.testing.assert_allclose(b.y_min, [0.9, 0.4, 0.0])
    np.testing.assert_allclose(b.y_max, [1.0, 0.6, 0.1])


def test_delta_one_pins_the_true_rules():
    d = np.array([0.0, 0.3, 1.0])
    b = bounds_from_delta(d, 1.0)
    np.testing.assert_array_equal(b.x_min, d)
    np.testing.assert_array_equal(b.x_max, d)


def test_delta_zero_is_unconstrained():
    b = bounds_from_delta([0.0, 0.3, 1.0], 0.0)
    np.testing.assert_array_equal(b.x_min, [0.0, 0.0, 0.0])
    np.testing.assert_array_equal(b.x_max, [1.0, 1.0, 1.0])


def test_alpha_bounds_intersect_both_outcomes():
    b = bounds_from_alpha([0.5], 0.8)
    # positive: [0.4, 0.625]; negative: [1 - 0.5/0.8, 1 - 0.8*0.5] = [0.375, 0.6]
    assert b.x_min[0] == pytest.approx(0.4)
    assert b.x_max[0] == pytest.approx(0.6)


def test_alpha_pins_deterministic_rules():
    for alpha in (0.0, 0.3, 0.9, 1.0):
        b = bounds_from_alpha([0.0, 1.0], alpha)
        np.testing.assert_array_equal(b.x_min, [0.0, 1.0])
        np.testing.assert_array_equal(b.x_max, [0.0, 1.0])


def test_alpha_zero_frees_fractional_rules():
    b = bounds_from_alpha([0.2, 0.7], 0.0)
    np.testing.assert_array_equal(b.x_min, [0.0, 0.0])
    np.testing.assert_array_equal(b.x_max, [1.0, 1.0])


def test_alpha_one_pins_every_rule():
    d = np.array([0.2, 0.5, 0.7])
    b = bounds_from_alpha(d, 1.0)
    np.testing.assert_allclose(b.x_min, d)
    np.testing.assert_allclose(b.x_max, d)


@pytest.mark.parametrize("value", [-0.1, 1.5])
def test_out_of_range_values(value):
    with pytest.raises(ValueError):
        bounds_from_delta([0.5], value)
    with pytest.raises(ValueError):
        bounds_from_alpha([0.5], value)
    with pytest.raises(ValueError):
        FidelitySpec.delta(value)


def test_empty_explicit_interval():
    with pytest.raises(EmptyBoundsError):
        FidelityBounds(np.array([0.6]), np.array([0.4]))


def test_explicit_spec_length_must_match():
    spec = FidelitySpec.from_bounds([(0.0, 0.5)])
    with pytest.raises(EmptyBoundsError):
        bounds_for(spec, [0.1, 0.2])
    b = bounds_for(spec, [0.1])
    assert b.contains([0.3])
    assert not b.contains([0.7])


def test_spec_describe():
    assert FidelitySpec.delta(0.9).describe() == {"type": "delta", "value": 0.9}
    explicit = FidelitySpec.from_bounds([(0.1, 0.2)]).describe()
    assert explicit == {"type": "explicit", "bounds": [[0.1, 0.2]]}
    assert FidelitySpec.alpha(0.5).kind is FidelityKind.ALPHA


@pytest.mark.parametrize(
    "delta,bound",
    [(1.0, 0.0), (0.9, 0.2), (0.6, 0.8), (0.5, 1.0), (0.0, 1.0)],
)
def test_delta_distortion_bound(delta, bound):
    assert bias_distortion_bound(FidelitySpec.delta(delta)) == pytest.approx(bound)


def test_alpha_distortion_bound():
    assert bias_distortion_bound(FidelitySpec.alpha(1.0)) == 0.0
    assert bias_distortion_bound(FidelitySpec.alpha(0.9)) == pytest.approx(-2 * math.log(0.9))
    assert bias_distortion_bound(FidelitySpec.alpha(0.1)) == 1.0
    assert bias_distortion_bound(FidelitySpec.alpha(0.0)) == 1.0


def test_bound_families():
    assert bound_family(FidelitySpec.delta(0.9)) == "total-variation"
    assert bound_family(FidelitySpec.alpha(0.9)) == "relative-metric"
    explicit = FidelitySpec.from_bounds([(0.0, 1.0)])
    assert bound_family(explicit) is None
    with pytest.raises(UnsupportedSpecError):
        bias_distortion_bound(explicit)
