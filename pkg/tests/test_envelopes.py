from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import ProblemStructureError
from src.formulations.envelopes import McCormick, make_envelopes


@pytest.mark.parametrize("angle", [math.pi / 12, math.pi / 6, math.pi / 4, 5 * math.pi / 12])
def test_envelopes_contain_cos_and_sin(angle: float) -> None:
    env = make_envelopes(angle)
    theta = np.random.default_rng(7).uniform(-angle, angle, 1000)
    assert env.slack(theta).min() >= -1e-12


@pytest.mark.parametrize("angle", [math.pi / 6, math.pi / 2])
def test_envelopes_touch_at_endpoints_and_tangent(angle: float) -> None:
    env = make_envelopes(angle)
    ends = np.array([-angle, angle])
    np.testing.assert_allclose(env.cos_upper(ends), np.cos(ends), atol=1e-12)
    np.testing.assert_allclose(env.cos_lower(ends), np.cos(ends), atol=1e-12)
    assert env.cos_upper(0.0) == pytest.approx(1.0)
    half = angle / 2
    assert env.sin_upper(half) == pytest.approx(math.sin(half))
    assert env.sin_lower(-half) == pytest.approx(-math.sin(half))


def test_envelopes_reject_wide_angles() -> None:
    with pytest.raises(ProblemStructureError):
        make_envelopes(2.0)
    with pytest.raises(ProblemStructureError):
        make_envelopes(0.0)


def test_mccormick_contains_products() -> None:
    mc = McCormick(0.81, 1.21, -0.5, 0.5)
    rng = np.random.default_rng(3)
    x = rng.uniform(0.81, 1.21, 500)
    y = rng.uniform(-0.5, 0.5, 500)
    lower, upper = mc.bounds(x, y)
    assert np.all(lower <= x * y + 1e-12)
    assert np.all(x * y <= upper + 1e-12)


def test_mccormick_is_exact_on_degenerate_box() -> None:
    mc = McCormick(2.0, 2.0, -1.0, 3.0)
    y = np.linspace(-1.0, 3.0, 9)
    lower, upper = mc.bounds(2.0, y)
    np.testing.assert_allclose(lower, 2.0 * y)
    np.testing.assert_allclose(upper, 2.0 * y)


def test_product_envelopes_follow_magnitude_box() -> None:
    env = make_envelopes(math.pi / 6, (0.81, 1.21))
    assert env.products["wr"] == McCormick(0.81, 1.21, math.cos(math.pi / 6), 1.0)
    assert env.products["wi"].y_hi == pytest.approx(0.5)
