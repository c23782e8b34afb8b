"""Emission-side models: the separable-pulse attack source and an honest
singlet reference.

The attack source replaces the entangled pair by two classical pulses with
orthogonal linear polarizations, lambda toward Alice and lambda + pi/2
toward Bob, with lambda drawn fresh per emission.  Photon numbers are either
fixed at the absorption orders or Poisson around a mean; an alternating mode
swaps which side receives a single-photon pulse on every other emission.

Emissions are generated block-wise from the counter-based streams in
``rng``; the log for emission i is a pure function of (seed, config, i), so
replaying the log is exact and independent of any consumer.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import rng
from .errors import ConfigError
from .polarization import MAX_ORDER, TWO_PI

# Default seed used by every command-line entry point.
DEFAULT_SEED = 0xA11CEB0B

# Step for the deterministic polarization scan: an irrational multiple of pi
# (golden-ratio conjugate), so the sequence equidistributes on the circle.
GOLDEN_STEP = math.pi * (math.sqrt(5.0) - 1.0) / 2.0

SOURCE_MODES = ("mpa", "singlet")
COUNT_MODELS = ("fixed", "poisson")
LAMBDA_MODELS = ("uniform", "stepped")


@dataclass(frozen=True)
class SourceConfig:
    """Emission model parameters.

    mode "mpa" is the separable-pulse attack; "singlet" emits faithful
    entangled pairs and ignores the photon-count fields.
    """

    mode: str = "mpa"
    order_alice: int = 2
    order_bob: int = 2
    count_model: str = "fixed"
    mu: float | None = None
    alternating: bool = False
    lambda_model: str = "uniform"
    lambda_step: float | None = None

    def violations(self):
        """Collect every constraint violation (empty list when valid)."""
        problems = []
        if self.mode not in SOURCE_MODES:
            problems.append(f"mode must be one of {SOURCE_MODES}, got {self.mode!r}")
        for name in ("order_alice", "order_bob"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                problems.append(f"{name} must be an integer, got {value!r}")
            elif not 1 <= value <= MAX_ORDER:
                problems.append(f"{name} must be in [1, {MAX_ORDER}], got {value}")
        if self.count_model not in COUNT_MODELS:
            problems.append(f"count_model must be one of {COUNT_MODELS}, got {self.count_model!r}")
        if self.count_model == "poisson":
            if self.mu is None or not self.mu > 0:
                problems.append(f"poisson count_model needs mu > 0, got {self.mu!r}")
        if self.lambda_model not in LAMBDA_MODELS:
            problems.append(
                f"lambda_model must be one of {LAMBDA_MODELS}, got {self.lambda_model!r}"
            )
        if self.lambda_step is not None and not self.lambda_step > 0:
            problems.append(f"lambda_step must be positive, got {self.lambda_step!r}")
        return problems

    def check(self):
        problems = self.violations()
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    @property
    def step(self):
        return GOLDEN_STEP if self.lambda_step is None else self.lambda_step


@dataclass(frozen=True)
class PulsePair:
    """One attack emission: polarization lambda to Alice, lambda + pi/2 to Bob."""

    emission_index: int
    lam: float
    count_alice: int
    count_bob: int
    order_alice: int
    order_bob: int


@dataclass
class EmissionBlock:
    """Vectorized slice of the emission log."""

    index: np.ndarray
    lam: np.ndarray
    count_alice: np.ndarray
    count_bob: np.ndarray
    order_alice: np.ndarray
    order_bob: np.ndarray

    def __len__(self):
        return self.index.size


def draw_emission_block(config, generator, start, size):
    """Draw emissions [start, start + size) from an EMISSION_STREAM generator.

    Draw order inside a block is fixed (lambda, then Alice counts, then Bob
    counts) and is part of the reproducibility contract.
    """
    index = start + np.arange(size, dtype=np.int64)
    if config.lambda_model == "uniform":
        lam = generator.random(size) * TWO_PI
    else:
        lam = np.mod(index * config.step, TWO_PI)

    if config.alternating:
        # Even emissions drive (1, m), odd emissions (n, 1).
        even = (index & 1) == 0
        order_a = np.where(even, 1, config.order_alice).astype(np.int64)
        order_b = np.where(even, config.order_bob, 1).astype(np.int64)
    else:
        order_a = np.full(size, config.order_alice, dtype=np.int64)
        order_b = np.full(size, config.order_bob, dtype=np.int64)

    if config.count_model == "poisson":
        count_a = generator.poisson(config.mu, size).astype(np.int64)
        count_b = generator.poisson(config.mu, size).astype(np.int64)
    else:
        count_a = order_a.copy()
        count_b = order_b.copy()
    return EmissionBlock(index, lam, count_a, count_b, order_a, order_b)


def emission_log(config, seed, count):
    """Materialize the first ``count`` emissions as one EmissionBlock."""
    config.check()
    parts = []
    for block, start, size in rng.block_ranges(count):
        generator = rng.stream(seed, rng.EMISSION_STREAM, block)
        parts.append(draw_emission_block(config, generator, start, size))
    if not parts:
        empty = np.empty(0, dtype=np.int64)
        return EmissionBlock(empty, empty.astype(float), empty, empty, empty, empty)
    return EmissionBlock(
        np.concatenate([p.index for p in parts]),
        np.concatenate([p.lam for p in parts]),
        np.concatenate([p.count_alice for p in parts]),
        np.concatenate([p.count_bob for p in parts]),
        np.concatenate([p.order_alice for p in parts]),
        np.concatenate([p.order_bob for p in parts]),
    )


class PulseSource:
    """Sequential view of the emission log.

    Two sources with equal (config, seed) produce byte-identical pulse
    sequences; the protocol engine consumes the very same log block-wise.
    """

    def __init__(self, config, seed=DEFAULT_SEED):
        if config.mode != "mpa":
            raise ConfigError("PulseSource models the attack source; use mode='mpa'")
        self.config = config.check()
        self.seed = seed
        self._cursor = 0
        self._block = None
        self._block_start = 0

    def next_pair(self):
        i = self._cursor
        block_index = i // rng.BLOCK_SIZE
        offset = i % rng.BLOCK_SIZE
        if self._block is None or self._block_start != block_index * rng.BLOCK_SIZE:
            generator = rng.stream(self.seed, rng.EMISSION_STREAM, block_index)
            self._block_start = block_index * rng.BLOCK_SIZE
            self._block = draw_emission_block(
                self.config, generator, self._block_start, rng.BLOCK_SIZE
            )
        b = self._block
        self._cursor += 1
        return PulsePair(
            emission_index=i,
            lam=float(b.lam[offset]),
            count_alice=int(b.count_alice[offset]),
            count_bob=int(b.count_bob[offset]),
            order_alice=int(b.order_alice[offset]),
            order_bob=int(b.order_bob[offset]),
        )

    def reset(self):
        self._cursor = 0
        self._block = None
        self._block_start = 0


def singlet_joint_outcome(theta_a, theta_b, generator):
    """Sample one coincidence (k, l) from a faithful singlet.

    Equal outcomes carry probability sin^2(delta)/2 each, unequal ones
    cos^2(delta)/2, with delta = theta_a - theta_b; marginals are uniform.
    """
    delta = theta_a - theta_b
    same = generator.random() < math.sin(delta) ** 2
    k = int(generator.random() < 0.5)
    return (k, k) if same else (k, 1 - k)


def alternating_config(config):
    """Convenience: the same attack with the single-photon alternating trick."""
    return replace(config, alternating=True)
