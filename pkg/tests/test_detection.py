import math

import numpy as np
import pytest
from scipy import stats as sps

from mpaqkd import rng
from mpaqkd.detection import (
    CLICK_0,
    CLICK_1,
    DOUBLE_CLICK,
    NO_CLICK,
    FakedPulse,
    absorb,
    blinded_detect,
    classify_outcomes,
    detect,
    polarimeter_detect,
    polarimeter_route,
    route_photons_array,
)


def gen(block=0):
    return rng.stream(17, rng.MEASUREMENT_STREAM, block)


def test_absorb_threshold_cases():
    # a detector fires only when a full absorption set lands on it
    assert absorb(2, 0, 2) == CLICK_0
    assert absorb(0, 2, 2) == CLICK_1
    assert absorb(1, 1, 2) == NO_CLICK
    assert absorb(0, 0, 2) == NO_CLICK
    assert absorb(3, 1, 2) == CLICK_0
    assert absorb(2, 2, 2) == DOUBLE_CLICK
    assert absorb(5, 7, 4) == DOUBLE_CLICK
    assert absorb(1, 0, 1) == CLICK_0


def test_fixed_count_pulses_cannot_double_click():
    # with exactly `order` photons the two channels cannot both reach it
    g = gen()
    counts0 = g.integers(0, 4, size=10_000)
    outcomes = classify_outcomes(counts0, 3 - counts0, np.full(10_000, 3), 1.0, None)
    assert not np.any(outcomes == DOUBLE_CLICK)


def test_classify_outcomes_matches_absorb():
    g = gen(1)
    c0 = g.integers(0, 6, size=2000)
    c1 = g.integers(0, 6, size=2000)
    order = g.integers(1, 5, size=2000)
    vector = classify_outcomes(c0, c1, order, 1.0, None)
    for i in range(2000):
        assert vector[i] == absorb(int(c0[i]), int(c1[i]), int(order[i]))


def test_binomial_routing_rate():
    lam, theta = 0.4, 0.2
    counts = np.full(200_000, 1)
    c0, c1 = route_photons_array(counts, lam, theta, gen(2))
    assert np.array_equal(c0 + c1, counts)
    expected = math.cos(lam + theta) ** 2
    _, p = sps.chisquare(
        [c0.sum(), c1.sum()],
        [expected * c0.size, (1.0 - expected) * c0.size],
    )
    assert p > 0.01


def test_detect_click_rate_matches_analytic_minimum():
    # on the diagonal, a 2-photon pulse splits half the time and is lost
    g = gen(3)
    hits = sum(
        detect(2, 2, math.pi / 4, 0.0, g) != NO_CLICK for _ in range(20_000)
    )
    assert hits / 20_000 == pytest.approx(0.5, abs=4.0 * math.sqrt(0.25 / 20_000))


def test_detector_efficiency_thins_clicks():
    g = gen(4)
    n = 100_000
    outcomes = classify_outcomes(
        np.full(n, 2), np.zeros(n, dtype=int), np.full(n, 2), 0.7, g
    )
    rate = np.mean(outcomes == CLICK_0)
    # thinning acts per satisfied absorption, not per photon
    expected = 0.7
    assert rate == pytest.approx(expected, abs=4.0 * math.sqrt(expected * (1 - expected) / n))
    with pytest.raises(Exception):
        classify_outcomes(np.full(4, 2), np.zeros(4, dtype=int), np.full(4, 2), 0.7, None)


def test_polarimeter_route_conserves_photons():
    g = gen(5)
    for _ in range(200):
        bins = polarimeter_route(6, 0.9, 0.1, 0.0, 0.3, g)
        assert sum(bins) == 6


def test_polarimeter_aligned_rates():
    # aligned polarimeters reproduce the plain two-detector rates
    g = gen(6)
    n = 50_000
    hits = 0
    for _ in range(n):
        clicked = polarimeter_detect(2, 2, 0.0, 0.0, 0.0, 0.0, g)
        hits += bool(clicked)
    # lambda + theta = 0 keeps both photons in channel 0 arm +
    assert hits == n


def test_polarimeter_rates_match_modulation_curve():
    # clicks inside one polarimeter follow (3/32)(3 + cos 4x) for order 2,
    # where x is the analyzer-to-polarimeter offset
    g = gen(7)
    n = 200_000
    lam = g.random(n) * 2.0 * math.pi
    for phi, expected in ((0.0, 0.375), (-math.pi / 4, 0.1875)):
        hits = 0
        for i in range(n // 4):
            clicked = polarimeter_detect(2, 2, lam[i], 0.0, phi, phi, g)
            hits += any(d in (0, 1) for d in clicked)
        rate = hits / (n // 4)
        sigma = math.sqrt(expected * (1 - expected) / (n // 4))
        assert rate == pytest.approx(expected, abs=4.0 * sigma)


def test_blinded_detect_exact_cases():
    # intensity 1.0, threshold 0.75: all light in one detector when aligned
    aligned = blinded_detect(FakedPulse(0.0, 1.0), 0.0, 0.75)
    assert aligned == (0,)
    # polarization on the channel diagonal splits below threshold everywhere
    diagonal = blinded_detect(FakedPulse(math.pi / 4, 1.0), 0.0, 0.75)
    assert diagonal == ()
    # doubling the intensity turns the split into two simultaneous clicks
    bright = blinded_detect(FakedPulse(math.pi / 4, 2.0), 0.0, 0.75)
    assert bright == (0, 2)
    # below-threshold light never clicks
    weak = blinded_detect(FakedPulse(0.0, 0.5), 0.0, 0.75)
    assert weak == ()


def test_blinded_detect_polarimeter_offset():
    # aligned pulse, polarimeter rotated to the diagonal: the share per arm
    # is half the channel intensity, below a 0.75 threshold
    clicked = blinded_detect(
        FakedPulse(0.0, 1.0), 0.0, 0.75, phi0=-math.pi / 4, phi1=-math.pi / 4
    )
    assert clicked == ()
