"""Source-side eavesdropper knowledge.

Whoever runs the separable-pulse source knows every lambda and, once the
analyzer bases are announced, bets on the majority channel of each side:
Alice 0 / Bob 1 when cos^2(lam + theta) >= sin^2, the opposite otherwise.
The bet is wrong for a *shared* key bit exactly when both sides click the
channel opposite to it, which is what the tally below counts.
"""

from dataclasses import dataclass

import numpy as np

from .detection import CLICK_0, CLICK_1

CONFIDENCE_BINS = 10  # histogram of max(cos^2, sin^2) over [0.5, 1.0]


@dataclass(frozen=True)
class EveGuess:
    alice_bit: int
    bob_bit: int
    confidence: float
    emission_index: int | None = None


def guess_bits(lam, theta, emission_index=None):
    """Bet for one matched-basis emission.

    Ties at |lam + theta| = pi/4 (mod pi/2) resolve to (0, 1).
    """
    c2 = float(np.cos(lam + theta) ** 2)
    alice = 0 if c2 >= 0.5 else 1
    return EveGuess(
        alice_bit=alice,
        bob_bit=1 - alice,
        confidence=max(c2, 1.0 - c2),
        emission_index=emission_index,
    )


def guess_arrays(lam, theta):
    """Vectorized bets: (alice_bits, bob_bits, confidence)."""
    c2 = np.cos(lam + theta) ** 2
    alice = (c2 < 0.5).astype(np.int64)
    return alice, 1 - alice, np.maximum(c2, 1.0 - c2)


@dataclass
class EveTally:
    """Streaming counters over matched-basis emissions."""

    matched_emissions: int = 0
    both_wrong: int = 0
    confidence_hist: np.ndarray = None

    def __post_init__(self):
        if self.confidence_hist is None:
            self.confidence_hist = np.zeros(CONFIDENCE_BINS, dtype=np.int64)

    def merge(self, other):
        self.matched_emissions += other.matched_emissions
        self.both_wrong += other.both_wrong
        self.confidence_hist += other.confidence_hist
        return self


def tally_block(lam, theta, out_alice, out_bob):
    """Tally one block of matched-basis emissions.

    ``out_*`` are outcome codes; the wrong-bet event needs both sides to
    single-click the channel opposite the bet.
    """
    alice_bet, bob_bet, confidence = guess_arrays(lam, theta)
    wrong = (out_alice == CLICK_0 + (1 - alice_bet)) & (out_bob == CLICK_0 + (1 - bob_bet))
    hist, _ = np.histogram(confidence, bins=CONFIDENCE_BINS, range=(0.5, 1.0))
    return EveTally(
        matched_emissions=int(lam.size),
        both_wrong=int(np.count_nonzero(wrong)),
        confidence_hist=hist.astype(np.int64),
    )


@dataclass(frozen=True)
class EveReport:
    per_emitted: float
    per_sifted: float
    fraction_known: float
    matched_emissions: int
    both_wrong: int
    sifted_length: int
    confidence_hist: tuple


def eve_error_rates(stats):
    """Error rates of the source-side bets for a finished session.

    per_emitted divides by every matched-basis emission, detected or not;
    per_sifted divides by the sifted key length.  Raises if the session ran
    an honest source (nothing to bet on).
    """
    tally = stats.eve_tally
    if tally is None:
        raise ValueError("session carries no eavesdropper tally (honest source?)")
    sifted = int(stats.key_alice.size)
    per_emitted = tally.both_wrong / tally.matched_emissions if tally.matched_emissions else 0.0
    per_sifted = tally.both_wrong / sifted if sifted else 0.0
    return EveReport(
        per_emitted=per_emitted,
        per_sifted=per_sifted,
        fraction_known=1.0 - per_sifted,
        matched_emissions=tally.matched_emissions,
        both_wrong=tally.both_wrong,
        sifted_length=sifted,
        confidence_hist=tuple(int(x) for x in tally.confidence_hist),
    )


def report_dict(report):
    edges = np.linspace(0.5, 1.0, CONFIDENCE_BINS + 1)
    return {
        "per_emitted_error": report.per_emitted,
        "per_sifted_error": report.per_sifted,
        "fraction_of_key_known": report.fraction_known,
        "matched_emissions": report.matched_emissions,
        "both_bits_wrong": report.both_wrong,
        "sifted_length": report.sifted_length,
        "confidence_histogram": {
            "bin_edges": [float(e) for e in edges],
            "counts": list(report.confidence_hist),
        },
    }
