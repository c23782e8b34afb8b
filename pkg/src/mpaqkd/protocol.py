"""Session engine for entanglement-based key distribution.

Each trial draws independent analyzer settings for Alice and Bob, routes one
emission through both detection sides, and tallies the joint outcome per
setting pair.  Sifting keeps matched-basis trials where both sides produced
a single click; Bob flips his bit, so a faithful singlet yields an agreeing
key.  The CHSH estimate uses only the four canonical non-identical setting
pairs.

Trials are processed in fixed blocks whose randomness is keyed by
(seed, block), so per-block tallies are pure functions of the configuration
and integer merging makes results identical for any worker count.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import eve as eve_mod
from . import rng
from .detection import CLICK_0, CLICK_1, DOUBLE_CLICK, NO_CLICK, classify_outcomes
from .errors import ConfigError, EmptyKeyError, InsufficientStatisticsError
from .oracle import CHSH_ALICE, CHSH_BOB
from .source import DEFAULT_SEED, SourceConfig, draw_emission_block

EKERT_ALICE = (0.0, math.pi / 4, math.pi / 8)
EKERT_BOB = (0.0, -math.pi / 8, math.pi / 8)
BBM92_SETTINGS = (0.0, math.pi / 4)

PROTOCOLS = ("ekert", "bbm92")

# Minimum coincidences per canonical pair before a CHSH estimate is quoted.
CHSH_MIN_COINCIDENCES = 100

_AXIS_TOL = 1e-9


def default_settings(protocol):
    if protocol == "ekert":
        return EKERT_ALICE, EKERT_BOB
    if protocol == "bbm92":
        return BBM92_SETTINGS, BBM92_SETTINGS
    raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")


@dataclass(frozen=True)
class ProtocolConfig:
    """Session parameters; settings default per protocol."""

    protocol: str = "ekert"
    trials: int = 1_000_000
    seed: int = DEFAULT_SEED
    settings_alice: tuple = None
    settings_bob: tuple = None
    detector_efficiency: float = 1.0

    def __post_init__(self):
        if self.settings_alice is None or self.settings_bob is None:
            alice, bob = default_settings(self.protocol)
            object.__setattr__(self, "settings_alice", tuple(self.settings_alice or alice))
            object.__setattr__(self, "settings_bob", tuple(self.settings_bob or bob))
        else:
            object.__setattr__(self, "settings_alice", tuple(float(a) for a in self.settings_alice))
            object.__setattr__(self, "settings_bob", tuple(float(b) for b in self.settings_bob))

    def violations(self):
        problems = []
        if self.protocol not in PROTOCOLS:
            problems.append(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            problems.append(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0 or self.seed > (1 << 64) - 1:
            problems.append(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not self.settings_alice or not self.settings_bob:
            problems.append("both sides need at least one analyzer setting")
        if not 0.0 < self.detector_efficiency <= 1.0:
            problems.append(
                f"detector_efficiency must be in (0, 1], got {self.detector_efficiency!r}"
            )
        return problems

    def check(self):
        problems = self.violations()
        if problems:
            raise ConfigError("; ".join(problems))
        return self


def _same_axis(a, b):
    """Polarization axes are pi-periodic."""
    return abs((a - b + math.pi / 2) % math.pi - math.pi / 2) < _AXIS_TOL


def matched_pairs(pconfig):
    """Indices (ia, ib) whose settings share a measurement basis."""
    return [
        (ia, ib)
        for ia, a in enumerate(pconfig.settings_alice)
        for ib, b in enumerate(pconfig.settings_bob)
        if _same_axis(a, b)
    ]


@dataclass
class RecordedTrials:
    """Optional per-trial arrays for exhaustive checks and log export."""

    lam: np.ndarray
    setting_alice: np.ndarray
    setting_bob: np.ndarray
    count_alice: np.ndarray
    count_bob: np.ndarray
    order_alice: np.ndarray
    order_bob: np.ndarray
    outcome_alice: np.ndarray
    outcome_bob: np.ndarray


@dataclass
class SessionStats:
    """Joint outcome tallies of one finished session."""

    pconfig: ProtocolConfig
    sconfig: SourceConfig
    joint: np.ndarray  # shape (nA, nB, 4, 4), outcome codes on the last axes
    eve_tally: eve_mod.EveTally | None
    key_alice: np.ndarray
    key_bob: np.ndarray
    record: RecordedTrials | None = None

    @property
    def trials(self):
        return int(self.joint.sum())

    def pair_trials(self, ia, ib):
        return int(self.joint[ia, ib].sum())

    def coincidences(self, ia, ib):
        """2x2 single-click coincidence counts N_kl."""
        return self.joint[ia, ib, CLICK_0 : CLICK_1 + 1, CLICK_0 : CLICK_1 + 1]

    def singles_only(self, ia, ib):
        """Trials where exactly one side single-clicked, the other none."""
        j = self.joint[ia, ib]
        return int(
            j[CLICK_0:DOUBLE_CLICK, NO_CLICK].sum() + j[NO_CLICK, CLICK_0:DOUBLE_CLICK].sum()
        )

    def no_clicks(self, ia, ib):
        return int(self.joint[ia, ib, NO_CLICK, NO_CLICK])

    def doubles(self, ia, ib):
        """Trials where either side double-clicked."""
        j = self.joint[ia, ib]
        return int(j[DOUBLE_CLICK, :].sum() + j[:, DOUBLE_CLICK].sum() - j[DOUBLE_CLICK, DOUBLE_CLICK])

    def doubles_total(self):
        return sum(
            self.doubles(ia, ib)
            for ia in range(len(self.pconfig.settings_alice))
            for ib in range(len(self.pconfig.settings_bob))
        )

    def side_clicked(self, side):
        """Trials where the given side registered any click (single or double)."""
        axis = 3 if side == "alice" else 2
        clicked = self.joint.sum(axis=axis)  # (nA, nB, outcome of the side)
        return int(clicked[..., CLICK_0:].sum())


def _simulate_block(args):
    """Tally one block; pure function of (configs, block index)."""
    pconfig, sconfig, block, start, size = args
    th_a = np.asarray(pconfig.settings_alice)
    th_b = np.asarray(pconfig.settings_bob)
    n_a, n_b = th_a.size, th_b.size

    meas = rng.stream(pconfig.seed, rng.MEASUREMENT_STREAM, block)
    ia = meas.integers(0, n_a, size=size)
    ib = meas.integers(0, n_b, size=size)

    record = None
    if sconfig.mode == "singlet":
        delta = th_a[ia] - th_b[ib]
        same = meas.random(size) < np.sin(delta) ** 2
        k = (meas.random(size) < 0.5).astype(np.int64)
        l = np.where(same, k, 1 - k)
        out_a = CLICK_0 + k
        out_b = CLICK_0 + l
        lam = None
    else:
        emit = rng.stream(pconfig.seed, rng.EMISSION_STREAM, block)
        em = draw_emission_block(sconfig, emit, start, size)
        lam = em.lam
        p0a = np.cos(lam + th_a[ia]) ** 2
        p0b = np.cos(lam + math.pi / 2 + th_b[ib]) ** 2
        c0a = meas.binomial(em.count_alice, p0a)
        c0b = meas.binomial(em.count_bob, p0b)
        eff = pconfig.detector_efficiency
        out_a = classify_outcomes(c0a, em.count_alice - c0a, em.order_alice, eff, meas)
        out_b = classify_outcomes(c0b, em.count_bob - c0b, em.order_bob, eff, meas)
        if _RECORD_BLOCKS:
            record = RecordedTrials(
                lam=lam, setting_alice=ia, setting_bob=ib,
                count_alice=em.count_alice, count_bob=em.count_bob,
                order_alice=em.order_alice, order_bob=em.order_bob,
                outcome_alice=out_a, outcome_bob=out_b,
            )

    flat = ((ia * n_b + ib) * 4 + out_a) * 4 + out_b
    joint = np.bincount(flat, minlength=n_a * n_b * 16).reshape(n_a, n_b, 4, 4)

    matched_lookup = np.zeros((n_a, n_b), dtype=bool)
    for i, j in matched_pairs(pconfig):
        matched_lookup[i, j] = True
    matched = matched_lookup[ia, ib]

    tally = None
    if sconfig.mode == "mpa" and matched.any():
        tally = eve_mod.tally_block(
            lam[matched], th_a[ia[matched]], out_a[matched], out_b[matched]
        )
    elif sconfig.mode == "mpa":
        tally = eve_mod.EveTally()

    coinc = matched & (out_a >= CLICK_0) & (out_a <= CLICK_1) & (out_b >= CLICK_0) & (out_b <= CLICK_1)
    bits_a = (out_a[coinc] - CLICK_0).astype(np.uint8)
    bits_b = (CLICK_1 - out_b[coinc]).astype(np.uint8)  # Bob announces the flipped bit

    return block, joint, tally, bits_a, bits_b, record


# Toggled (per process) by run_session(record=True); plumbed as a global so
# the worker payload stays a small picklable tuple.
_RECORD_BLOCKS = False


def run_session(pconfig, sconfig, workers=1, record=False):
    """Run a full session and return its SessionStats.

    ``workers`` only changes scheduling: per-block streams are keyed by the
    block index, and tallies merge by integer addition in block order, so
    the result is bit-identical for any worker count.
    """
    global _RECORD_BLOCKS
    pconfig.check()
    sconfig.check()
    tasks = [
        (pconfig, sconfig, block, start, size)
        for block, start, size in rng.block_ranges(pconfig.trials)
    ]
    if record and workers != 1:
        workers = 1  # recorded runs stay in-process; arrays are large
    _RECORD_BLOCKS = record
    try:
        if workers == 1:
            results = [_simulate_block(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_simulate_block, tasks, chunksize=4))
    finally:
        _RECORD_BLOCKS = False

    results.sort(key=lambda r: r[0])
    n_a, n_b = len(pconfig.settings_alice), len(pconfig.settings_bob)
    joint = np.zeros((n_a, n_b, 4, 4), dtype=np.int64)
    tally = eve_mod.EveTally() if sconfig.mode == "mpa" else None
    bits_a, bits_b, records = [], [], []
    for _, j, t, ba, bb, rec in results:
        joint += j
        if tally is not None and t is not None:
            tally.merge(t)
        bits_a.append(ba)
        bits_b.append(bb)
        if rec is not None:
            records.append(rec)

    merged_record = None
    if record and records:
        merged_record = RecordedTrials(
            **{
                name: np.concatenate([getattr(r, name) for r in records])
                for name in RecordedTrials.__dataclass_fields__
            }
        )
    empty = np.empty(0, dtype=np.uint8)
    return SessionStats(
        pconfig=pconfig,
        sconfig=sconfig,
        joint=joint,
        eve_tally=tally,
        key_alice=np.concatenate(bits_a) if bits_a else empty,
        key_bob=np.concatenate(bits_b) if bits_b else empty,
        record=merged_record,
    )


@dataclass(frozen=True)
class SiftedKey:
    alice_bits: np.ndarray
    bob_bits: np.ndarray
    qber: float
    matched_pair_count: int


def sift(stats):
    """Sifted key of a session; raises EmptyKeyError when nothing matched."""
    a, b = stats.key_alice, stats.key_bob
    if a.size == 0:
        raise EmptyKeyError("no matched-basis coincidences; sifted key is empty")
    return SiftedKey(
        alice_bits=a,
        bob_bits=b,
        qber=float(np.mean(a != b)),
        matched_pair_count=len(matched_pairs(stats.pconfig)),
    )


@dataclass(frozen=True)
class PairCorrelation:
    theta_alice: float
    theta_bob: float
    value: float
    stderr: float
    coincidences: int
    detected_fraction: float


@dataclass(frozen=True)
class ChshResult:
    value: float
    stderr: float
    pairs: tuple


def pair_correlation(stats, ia, ib):
    """Correlation estimate for one setting pair from its coincidence table."""
    n = stats.coincidences(ia, ib).astype(float)
    total = n.sum()
    if total == 0:
        raise InsufficientStatisticsError(
            f"no coincidences at setting pair ({ia}, {ib})"
        )
    e = (n[0, 0] + n[1, 1] - n[0, 1] - n[1, 0]) / total
    stderr = math.sqrt(max(1.0 - e * e, 0.0) / total)
    trials = stats.pair_trials(ia, ib)
    return PairCorrelation(
        theta_alice=stats.pconfig.settings_alice[ia],
        theta_bob=stats.pconfig.settings_bob[ib],
        value=float(e),
        stderr=float(stderr),
        coincidences=int(total),
        detected_fraction=float(total / trials) if trials else 0.0,
    )


def _locate_setting(settings, angle, side):
    for i, s in enumerate(settings):
        if _same_axis(s, angle):
            return i
    raise InsufficientStatisticsError(
        f"{side} settings {tuple(settings)} lack the analyzer angle {angle:.6f}"
    )


def _chsh_pairs(stats, angles_alice, angles_bob):
    ia = [_locate_setting(stats.pconfig.settings_alice, a, "alice") for a in angles_alice]
    ib = [_locate_setting(stats.pconfig.settings_bob, b, "bob") for b in angles_bob]
    grid = [[pair_correlation(stats, ia[p], ib[q]) for q in (0, 1)] for p in (0, 1)]
    for row in grid:
        for pc in row:
            if pc.coincidences < CHSH_MIN_COINCIDENCES:
                raise InsufficientStatisticsError(
                    f"only {pc.coincidences} coincidences at "
                    f"({pc.theta_alice:.6f}, {pc.theta_bob:.6f}); "
                    f"need >= {CHSH_MIN_COINCIDENCES}"
                )
    return grid


def _chsh_from_grid(values, errors):
    best, best_var = 0.0, 0.0
    for neg in ((0, 0), (0, 1), (1, 0), (1, 1)):
        total = sum(
            -values[p][q] if (p, q) == neg else values[p][q] for p in (0, 1) for q in (0, 1)
        )
        if abs(total) > best:
            best = abs(total)
            best_var = sum(errors[p][q] ** 2 for p in (0, 1) for q in (0, 1))
    return best, math.sqrt(best_var)


def estimate_chsh(stats, angles_alice=CHSH_ALICE, angles_bob=CHSH_BOB):
    """CHSH estimate over detected coincidences at the canonical pairs."""
    grid = _chsh_pairs(stats, angles_alice, angles_bob)
    values = [[pc.value for pc in row] for row in grid]
    errors = [[pc.stderr for pc in row] for row in grid]
    s, stderr = _chsh_from_grid(values, errors)
    return ChshResult(value=s, stderr=stderr, pairs=tuple(pc for row in grid for pc in row))


def random_bit_padding_chsh(stats, angles_alice=CHSH_ALICE, angles_bob=CHSH_BOB):
    """CHSH with every non-coincidence trial padded by fair random bits.

    Random outcomes have zero expectation, so each pair correlation scales
    by its detected fraction.  For the separable-pulse source this drops S
    below the classical bound: discarding non-detections is the only thing
    that made the raw estimate look nonlocal.
    """
    grid = _chsh_pairs(stats, angles_alice, angles_bob)
    values = [[pc.value * pc.detected_fraction for pc in row] for row in grid]
    errors = [[pc.stderr * pc.detected_fraction for pc in row] for row in grid]
    s, stderr = _chsh_from_grid(values, errors)
    scaled = tuple(
        PairCorrelation(
            theta_alice=pc.theta_alice,
            theta_bob=pc.theta_bob,
            value=pc.value * pc.detected_fraction,
            stderr=pc.stderr * pc.detected_fraction,
            coincidences=pc.coincidences,
            detected_fraction=pc.detected_fraction,
        )
        for row in grid
        for pc in row
    )
    return ChshResult(value=s, stderr=stderr, pairs=scaled)
