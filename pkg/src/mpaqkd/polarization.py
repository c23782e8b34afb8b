"""Trigonometric kernel for polarization routing and multi-photon clicks.

Only linear polarization matters here, so states live on a circle and a
polarizing beamsplitter at angle theta splits a pulse polarized at lambda
with Malus weights cos^2(lambda + theta) / sin^2(lambda + theta).  A
detector that fires only via an order-n absorption needs all n photons of
the pulse in its channel, hence the cos^2n + sin^2n click probability.

All probabilities are pi-periodic in both lambda and theta.  Functions
accept scalars or numpy arrays.
"""

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi

CHANNELS = (0, 1)
ARMS = ("+", "-")

# Highest absorption order accepted by configuration.  The formulas work for
# any order; the cap just keeps configs inside the regime studied here.
MAX_ORDER = 8


def normalize_angle(angle):
    """Map an angle (radians) to the canonical interval [0, 2*pi)."""
    folded = np.mod(angle, TWO_PI)
    # np.mod rounds up to the period itself for tiny negative inputs
    return np.where(folded < TWO_PI, folded, 0.0)[()]


def check_order(order, maximum=MAX_ORDER):
    """Validate an absorption order and return it as an int."""
    if not float(order).is_integer():
        raise ConfigError(f"absorption order must be an integer, got {order!r}")
    order = int(order)
    if not 1 <= order <= maximum:
        raise ConfigError(f"absorption order must be in [1, {maximum}], got {order}")
    return order


def check_channel(channel):
    if channel not in CHANNELS:
        raise ConfigError(f"channel must be 0 or 1, got {channel!r}")
    return channel


def channel_probability(lam, theta, channel):
    """Probability that one photon polarized at lam exits PBS channel 0 or 1.

    Channel 0 carries cos^2(lam + theta), channel 1 the complement.
    """
    check_channel(channel)
    c = np.cos(lam + theta) ** 2
    return c if channel == 0 else 1.0 - c


def click_probability(order, lam, theta):
    """Probability that an order-n pulse fires either detector behind the PBS.

    All n photons must share a channel: cos^2n(lam + theta) + sin^2n(lam + theta).
    Equals 1 only for order 1; the minimum 2^(1-n) sits at lam + theta = pi/4
    (mod pi/2) and the maximum 1 at lam + theta = 0 (mod pi/2).
    """
    x = lam + theta
    return np.cos(x) ** (2 * order) + np.sin(x) ** (2 * order)


def polarimeter_arm_probability(lam, theta, phi, channel, arm):
    """Single-photon probability of one polarimeter arm behind a PBS channel.

    After the measurement PBS at theta, the photon's polarization collapses
    onto the channel axis, so the analyzer PBS at phi splits by theta - phi
    alone: the "+" arm weight is cos^2(theta - phi), "-" is sin^2.
    """
    if arm not in ARMS:
        raise ConfigError(f"arm must be '+' or '-', got {arm!r}")
    p_channel = channel_probability(lam, theta, channel)
    split = np.cos(theta - phi) ** 2
    return p_channel * (split if arm == "+" else 1.0 - split)
