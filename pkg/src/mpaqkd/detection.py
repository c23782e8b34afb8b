"""Detector models: PBS routing, threshold clicks, polarimeters, and the
intensity-threshold (blinded) detector used by faked-state analysis.

Photon routing is binomial: each of the ``count`` photons independently
takes channel 0 with probability cos^2(lam + theta).  A detector driven by
an order-n absorption clicks when its channel holds at least n photons, so
double clicks require count >= 2 * order.  Detector quantum efficiency for a
satisfied absorption defaults to 1; the sub-unit hook thins clicks.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .polarization import check_order

# Outcome codes for one two-detector side.
NO_CLICK, CLICK_0, CLICK_1, DOUBLE_CLICK = 0, 1, 2, 3
OUTCOME_LABELS = ("no_click", "click_0", "click_1", "double_click")

# Detector labels of a polarimeter pair: (channel, arm).
DETECTORS = ("0+", "0-", "1+", "1-")


def route_photons(count, lam, theta, generator):
    """Split ``count`` photons between the PBS channels; returns (c0, c1)."""
    p0 = float(np.cos(lam + theta) ** 2)
    c0 = int(generator.binomial(count, p0)) if count else 0
    return c0, count - c0


def route_photons_array(counts, lam, theta, generator):
    """Vectorized routing; counts and lam are equal-length arrays."""
    p0 = np.cos(lam + theta) ** 2
    c0 = generator.binomial(counts, p0)
    return c0, counts - c0


def absorb(count0, count1, order):
    """Click outcome for photon counts in the two channels.

    A channel clicks iff it holds >= order photons; both clicking is a
    double click, neither a no-click.
    """
    order = check_order(order)
    if count0 < 0 or count1 < 0:
        raise ConfigError("photon counts must be non-negative")
    hit0 = count0 >= order
    hit1 = count1 >= order
    if hit0 and hit1:
        return DOUBLE_CLICK
    if hit0:
        return CLICK_0
    if hit1:
        return CLICK_1
    return NO_CLICK


def classify_outcomes(c0, c1, order, efficiency=1.0, generator=None):
    """Vectorized ``absorb`` over count arrays; ``order`` may be an array.

    With efficiency < 1 each satisfied absorption fires only with that
    probability (independent thinning; requires a generator).
    """
    hit0 = c0 >= order
    hit1 = c1 >= order
    if efficiency < 1.0:
        if generator is None:
            raise ConfigError("sub-unit efficiency requires a generator")
        hit0 &= generator.random(np.shape(hit0)) < efficiency
        hit1 &= generator.random(np.shape(hit1)) < efficiency
    return np.where(
        hit0 & hit1, DOUBLE_CLICK, np.where(hit0, CLICK_0, np.where(hit1, CLICK_1, NO_CLICK))
    ).astype(np.int64)


def detect(count, order, lam, theta, generator, efficiency=1.0):
    """Route one pulse and classify the click outcome (scalar path)."""
    c0, c1 = route_photons(count, lam, theta, generator)
    code = absorb(c0, c1, order)
    if efficiency < 1.0 and code != NO_CLICK:
        if code == DOUBLE_CLICK:
            keep0 = generator.random() < efficiency
            keep1 = generator.random() < efficiency
            if keep0 and keep1:
                return DOUBLE_CLICK
            if keep0:
                return CLICK_0
            if keep1:
                return CLICK_1
            return NO_CLICK
        if generator.random() >= efficiency:
            return NO_CLICK
    return code


def polarimeter_route(count, lam, theta, phi0, phi1, generator):
    """Photon counts in the four polarimeter detectors (0+, 0-, 1+, 1-).

    The measurement PBS splits by cos^2(lam + theta); each channel's
    analyzer then splits by theta - phi for its polarimeter, since the first
    projection collapsed the polarization onto the channel axis.
    """
    c0, c1 = route_photons(count, lam, theta, generator)
    c0p = int(generator.binomial(c0, float(np.cos(theta - phi0) ** 2))) if c0 else 0
    c1p = int(generator.binomial(c1, float(np.cos(theta - phi1) ** 2))) if c1 else 0
    return (c0p, c0 - c0p, c1p, c1 - c1p)


def polarimeter_detect(count, order, lam, theta, phi0, phi1, generator):
    """Indices of clicked polarimeter detectors for one pulse."""
    bins = polarimeter_route(count, lam, theta, phi0, phi1, generator)
    order = check_order(order)
    return tuple(i for i, b in enumerate(bins) if b >= order)


@dataclass(frozen=True)
class FakedPulse:
    """Bright classical pulse of a blinded-detector faked state."""

    polarization: float
    intensity: float


def blinded_detect(pulse, pbs_angle, threshold, phi0=None, phi1=None):
    """Deterministic click pattern of intensity-threshold detectors.

    Intensity splits by Malus cos^2/sin^2 across both PBS stages and a
    detector fires iff its share reaches the threshold.  Polarimeter angles
    default to the measurement angle (aligned analyzers).  Returns the tuple
    of clicked detector indices, ordered as DETECTORS.
    """
    if threshold <= 0:
        raise ConfigError(f"threshold must be positive, got {threshold!r}")
    phi0 = pbs_angle if phi0 is None else phi0
    phi1 = pbs_angle if phi1 is None else phi1
    rel = pulse.polarization - pbs_angle
    i0 = pulse.intensity * float(np.cos(rel) ** 2)
    i1 = pulse.intensity - i0
    s0 = float(np.cos(pbs_angle - phi0) ** 2)
    s1 = float(np.cos(pbs_angle - phi1) ** 2)
    shares = (i0 * s0, i0 * (1.0 - s0), i1 * s1, i1 * (1.0 - s1))
    return tuple(i for i, s in enumerate(shares) if s >= threshold)
