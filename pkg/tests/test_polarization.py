import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpaqkd.errors import ConfigError
from mpaqkd.polarization import (
    MAX_ORDER,
    channel_probability,
    check_channel,
    check_order,
    click_probability,
    normalize_angle,
    polarimeter_arm_probability,
)

angles = st.floats(-50.0, 50.0, allow_nan=False)
orders = st.integers(1, MAX_ORDER)


@given(angles)
def test_normalize_angle_range(angle):
    a = normalize_angle(angle)
    assert 0.0 <= a < 2.0 * math.pi


@given(angles, angles)
def test_channel_probabilities_sum_to_one(lam, theta):
    p0 = channel_probability(lam, theta, 0)
    p1 = channel_probability(lam, theta, 1)
    assert p0 >= 0.0 and p1 >= 0.0
    assert p0 + p1 == pytest.approx(1.0, abs=1e-12)


@given(orders, angles, angles)
def test_click_probability_bounds(order, lam, theta):
    p = click_probability(order, lam, theta)
    # cos^2n + sin^2n is largest on-axis and smallest on the diagonal
    assert 2.0 ** (1 - order) - 1e-12 <= p <= 1.0 + 1e-12


@given(orders)
def test_click_probability_extrema(order):
    assert click_probability(order, 0.0, 0.0) == pytest.approx(1.0)
    assert click_probability(order, math.pi / 4, 0.0) == pytest.approx(2.0 ** (1 - order))


@given(orders, angles, angles)
def test_click_probability_quarter_period(order, lam, theta):
    p = click_probability(order, lam, theta)
    q = click_probability(order, lam + math.pi / 2, theta)
    assert p == pytest.approx(q, abs=1e-9)


@given(angles, angles, angles)
def test_polarimeter_arms_partition_channel(lam, theta, phi):
    for channel in (0, 1):
        plus = polarimeter_arm_probability(lam, theta, phi, channel, "+")
        minus = polarimeter_arm_probability(lam, theta, phi, channel, "-")
        assert plus + minus == pytest.approx(
            channel_probability(lam, theta, channel), abs=1e-9
        )


def test_channel_probability_vectorizes():
    lam = np.linspace(0.0, 2.0 * math.pi, 7)
    p = channel_probability(lam, 0.3, 0)
    assert p.shape == lam.shape
    assert np.allclose(p, np.cos(lam + 0.3) ** 2)


def test_check_order_rejects_bad_values():
    with pytest.raises(ConfigError):
        check_order(0)
    with pytest.raises(ConfigError):
        check_order(MAX_ORDER + 1)
    with pytest.raises(ConfigError):
        check_order(2.5)
    assert check_order(3) == 3


def test_check_channel_rejects_bad_values():
    with pytest.raises(ConfigError):
        check_channel(2)
    assert check_channel(1) == 1
