import math

import numpy as np
import pytest
from scipy import stats as sps

from mpaqkd import rng
from mpaqkd.errors import ConfigError
from mpaqkd.polarization import TWO_PI
from mpaqkd.source import (
    DEFAULT_SEED,
    PulseSource,
    SourceConfig,
    alternating_config,
    draw_emission_block,
    emission_log,
    singlet_joint_outcome,
)

# Statistical checks run on fixed seeds; the alpha below would flag a broken
# generator, not an unlucky draw, because the draw never changes.
ALPHA = 0.01


def test_lambda_is_uniform():
    config = SourceConfig(order_alice=2, order_bob=2)
    log = emission_log(config, seed=11, count=200_000)
    _, p = sps.kstest(log.lam / TWO_PI, "uniform")
    assert p > ALPHA


def test_fixed_counts_equal_order():
    config = SourceConfig(order_alice=2, order_bob=3)
    log = emission_log(config, seed=3, count=1000)
    assert np.all(log.count_alice == 2)
    assert np.all(log.count_bob == 3)


def test_poisson_counts_match_distribution():
    mu = 2.7
    config = SourceConfig(count_model="poisson", mu=mu)
    log = emission_log(config, seed=5, count=200_000)
    for counts in (log.count_alice, log.count_bob):
        top = int(counts.max())
        observed = np.bincount(counts, minlength=top + 1).astype(float)
        expected = sps.poisson.pmf(np.arange(top + 1), mu) * counts.size
        # merge the sparse tail so every chi-square cell stays populated
        keep = expected >= 5.0
        observed = np.append(observed[keep], observed[~keep].sum())
        expected = np.append(expected[keep], expected[~keep].sum())
        _, p = sps.chisquare(observed, expected * observed.sum() / expected.sum())
        assert p > ALPHA


def test_emission_log_replays_identically():
    config = SourceConfig(order_alice=3, order_bob=2)
    first = emission_log(config, seed=DEFAULT_SEED, count=70_000)
    second = emission_log(config, seed=DEFAULT_SEED, count=70_000)
    assert np.array_equal(first.lam, second.lam)
    assert np.array_equal(first.count_alice, second.count_alice)
    assert np.array_equal(first.count_bob, second.count_bob)


def test_log_prefix_is_stable_across_lengths():
    # emissions are keyed by their index, so a longer run extends the log
    # without rewriting history
    config = SourceConfig()
    short = emission_log(config, seed=8, count=rng.BLOCK_SIZE + 100)
    long = emission_log(config, seed=8, count=2 * rng.BLOCK_SIZE)
    n = short.lam.size
    assert np.array_equal(short.lam, long.lam[:n])
    assert np.array_equal(short.count_alice, long.count_alice[:n])


def test_pulse_source_matches_log():
    config = SourceConfig(order_alice=2, order_bob=3)
    log = emission_log(config, seed=21, count=500)
    source = PulseSource(config, seed=21)
    for i in range(500):
        pulse = source.next_pair()
        assert pulse.emission_index == i
        assert pulse.lam == log.lam[i]
        assert pulse.count_alice == log.count_alice[i]
        assert pulse.count_bob == log.count_bob[i]


def test_alternating_orders_follow_emission_parity():
    config = SourceConfig(order_alice=2, order_bob=3, alternating=True)
    log = emission_log(config, seed=2, count=4000)
    even = (log.index % 2) == 0
    assert np.all(log.order_alice[even] == 1)
    assert np.all(log.order_bob[even] == 3)
    assert np.all(log.order_alice[~even] == 2)
    assert np.all(log.order_bob[~even] == 1)


def test_alternating_parity_is_global_not_per_block():
    config = SourceConfig(order_alice=2, order_bob=2, alternating=True)
    count = rng.BLOCK_SIZE + 50
    log = emission_log(config, seed=2, count=count)
    assert np.all(log.order_alice == np.where((np.arange(count) % 2) == 0, 1, 2))


def test_stepped_lambda_is_deterministic():
    config = SourceConfig(lambda_model="stepped", lambda_step=0.25)
    log = emission_log(config, seed=1, count=100)
    assert np.allclose(log.lam, np.mod(np.arange(100) * 0.25, TWO_PI))
    # seed only feeds the photon-count draws, so lambda ignores it
    other = emission_log(config, seed=999, count=100)
    assert np.array_equal(log.lam, other.lam)


def test_config_lists_every_violation():
    config = SourceConfig(mode="bogus", order_alice=0, count_model="poisson", mu=-1.0)
    problems = config.violations()
    assert len(problems) == 3
    with pytest.raises(ConfigError) as err:
        config.check()
    text = str(err.value)
    assert "mode" in text and "order_alice" in text and "mu" in text


def test_alternating_config_helper():
    config = alternating_config(SourceConfig(order_alice=2, order_bob=3))
    assert config.alternating is True
    assert config.order_alice == 2


def test_singlet_outcomes_anticorrelate_on_matched_axes():
    gen = rng.stream(4, rng.MEASUREMENT_STREAM, 0)
    for _ in range(200):
        k, l = singlet_joint_outcome(0.3, 0.3, gen)
        assert l == 1 - k


def test_singlet_outcomes_correlate_on_crossed_axes():
    gen = rng.stream(4, rng.MEASUREMENT_STREAM, 1)
    for _ in range(200):
        k, l = singlet_joint_outcome(0.0, math.pi / 2, gen)
        assert l == k
