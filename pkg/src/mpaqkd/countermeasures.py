"""Receiver-side diagnostics against detection-loophole attacks.

Three layers, none of which aborts a session; they only report evidence:

* passive monitors over a finished session: per-channel singles balance,
  double-click rate, and the angle dependence of the coincidence sum, fitted
  as A + B*cos(4*delta) by weighted least squares;
* an active fair-sampling test that replaces one receiver's detectors with
  polarimeters and scans the analyzer-to-polarimeter offset, where any
  genuine single-photon signal produces a flat click rate of 1/2;
* a deterministic demonstration of how the same polarimeters expose bright
  faked states aimed at intensity-threshold detectors.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .detection import CLICK_0, CLICK_1, FakedPulse, blinded_detect, DETECTORS
from .errors import InsufficientStatisticsError
from .oracle import fs_click_probability
from .protocol import pair_correlation
from .source import DEFAULT_SEED, draw_emission_block

# Security reference points quoted in verdicts: QBER bounds for coherent
# attacks and for device-independent operation, and the detection efficiency
# needed to close the loophole without fair-sampling assumptions.
QBER_COHERENT_BOUND = 0.11
QBER_DI_BOUND = 0.071
LOOPHOLE_FREE_EFFICIENCY = 0.83

FS_BINS = 16
FS_MIN_PULSES_PER_BIN = 10_000
MODULATION_SIGMAS = 5.0
MARGINAL_SIGMAS = 4.0

_SIGMA_FLOOR = 1e-9


def cosine_quartic_fit(x, y, sigma):
    """Weighted least squares of y = A + B*x (x is typically cos(4*delta)).

    Returns (A, B, sigma_A, sigma_B).  Degenerate designs (fewer than two
    distinct x) return NaNs.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1.0 / np.maximum(np.asarray(sigma, dtype=float), _SIGMA_FLOOR) ** 2
    s00 = w.sum()
    s01 = (w * x).sum()
    s11 = (w * x * x).sum()
    det = s00 * s11 - s01 * s01
    if not np.isfinite(det) or det <= 0 or np.unique(x).size < 2:
        return math.nan, math.nan, math.nan, math.nan
    t0 = (w * y).sum()
    t1 = (w * x * y).sum()
    a = (s11 * t0 - s01 * t1) / det
    b = (s00 * t1 - s01 * t0) / det
    return float(a), float(b), math.sqrt(s11 / det), math.sqrt(s00 / det)


def _zscore(b, sigma_b):
    if b == 0.0:
        return 0.0
    if sigma_b == 0.0 or not np.isfinite(sigma_b):
        return math.inf
    return abs(b) / sigma_b


@dataclass
class MonitorVerdict:
    """Evidence summary; fields are None when the producing test did not run."""

    marginal_balance_pass: bool | None = None
    max_marginal_z: float | None = None
    double_count_rate: float | None = None
    sum_visibility_estimate: float | None = None
    sum_visibility_sigma: float | None = None
    sum_visibility_z: float | None = None
    fs_modulation_amplitude: float | None = None
    fs_modulation_sigma: float | None = None
    fs_modulation_ratio: float | None = None
    fs_z: float | None = None
    verdict: str = "consistent_with_fair_sampling"
    thresholds: dict | None = None

    def to_dict(self):
        return {
            "marginal_balance_pass": self.marginal_balance_pass,
            "max_marginal_z": self.max_marginal_z,
            "double_count_rate": self.double_count_rate,
            "sum_visibility": {
                "estimate": self.sum_visibility_estimate,
                "sigma": self.sum_visibility_sigma,
                "z": self.sum_visibility_z,
            },
            "fair_sampling_test": {
                "modulation_amplitude": self.fs_modulation_amplitude,
                "modulation_sigma": self.fs_modulation_sigma,
                "modulation_ratio": self.fs_modulation_ratio,
                "z": self.fs_z,
            },
            "verdict": self.verdict,
            "thresholds": self.thresholds,
        }


def _marginal_zscores(stats):
    """Singles balance z per (side, setting): (N0 - N1) / sqrt(N0 + N1)."""
    zs = []
    joint = stats.joint
    for side, axis in (("alice", 3), ("bob", 2)):
        per_setting = joint.sum(axis=axis)  # (nA, nB, code of this side)
        summed = per_setting.sum(axis=1 if side == "alice" else 0)
        for idx in range(summed.shape[0]):
            n0 = float(summed[idx, CLICK_0])
            n1 = float(summed[idx, CLICK_1])
            if n0 + n1 > 0:
                zs.append((side, idx, (n0 - n1) / math.sqrt(n0 + n1)))
    return zs


def analyze_monitors(stats):
    """Passive monitor verdict for a finished session."""
    zs = _marginal_zscores(stats)
    max_z = max((abs(z) for _, _, z in zs), default=0.0)

    trials = stats.trials
    doubles = stats.doubles_total()

    n_a = len(stats.pconfig.settings_alice)
    n_b = len(stats.pconfig.settings_bob)
    xs, ys, sigmas = [], [], []
    for ia in range(n_a):
        for ib in range(n_b):
            n_pair = stats.pair_trials(ia, ib)
            if n_pair == 0:
                continue
            coinc = float(stats.coincidences(ia, ib).sum())
            p = coinc / n_pair
            delta = stats.pconfig.settings_alice[ia] - stats.pconfig.settings_bob[ib]
            xs.append(math.cos(4.0 * delta))
            ys.append(p)
            sigmas.append(math.sqrt(max(p * (1.0 - p), _SIGMA_FLOOR) / n_pair))
    a, b, _, sigma_b = cosine_quartic_fit(xs, ys, sigmas)
    if math.isnan(b) or a == 0.0:
        estimate = sigma_est = z = None
    else:
        estimate = b / a
        sigma_est = sigma_b / abs(a)
        z = _zscore(b, sigma_b)

    qber = None
    if stats.key_alice.size:
        qber = float(np.mean(stats.key_alice != stats.key_bob))
    eff_a = stats.side_clicked("alice") / trials if trials else 0.0
    eff_b = stats.side_clicked("bob") / trials if trials else 0.0
    thresholds = {
        "qber": qber,
        "qber_coherent_attack_bound": QBER_COHERENT_BOUND,
        "qber_below_coherent_bound": None if qber is None else qber < QBER_COHERENT_BOUND,
        "qber_device_independent_bound": QBER_DI_BOUND,
        "qber_below_device_independent_bound": None if qber is None else qber < QBER_DI_BOUND,
        "detection_fraction_alice": eff_a,
        "detection_fraction_bob": eff_b,
        "loophole_free_efficiency": LOOPHOLE_FREE_EFFICIENCY,
        "meets_loophole_free_efficiency": min(eff_a, eff_b) >= LOOPHOLE_FREE_EFFICIENCY,
    }

    unfair = z is not None and z > MODULATION_SIGMAS
    return MonitorVerdict(
        marginal_balance_pass=max_z < MARGINAL_SIGMAS,
        max_marginal_z=max_z,
        double_count_rate=doubles / trials if trials else 0.0,
        sum_visibility_estimate=estimate,
        sum_visibility_sigma=sigma_est,
        sum_visibility_z=z,
        verdict="unfair_sampling_detected" if unfair else "consistent_with_fair_sampling",
        thresholds=thresholds,
    )


@dataclass
class FsTestStats:
    """Counts of the polarimeter fair-sampling scan (one receiver side)."""

    sconfig: object
    seed: int
    phi: tuple
    bin_centers: np.ndarray
    pulses: np.ndarray
    detector_clicks: np.ndarray  # (bins, 4)
    pol_clicks: np.ndarray  # (bins, 2)
    multi_clicks: np.ndarray

    @property
    def order(self):
        return self.sconfig.order_alice

    def rates(self, polarimeter):
        return self.pol_clicks[:, polarimeter] / self.pulses


def run_fs_test(sconfig, trials, seed=DEFAULT_SEED, phi=(0.0, 0.0), bins=FS_BINS):
    """Drive the source's Alice-side pulses into a polarimeter pair.

    The analyzer angle theta hops uniformly over the ``bins`` bin centers in
    [0, pi/2); both polarimeters sit at fixed angles ``phi``.  Emissions
    reuse the same counter-based log as a protocol session with this seed.
    """
    sconfig.check()
    phi0, phi1 = float(phi[0]), float(phi[1])
    centers = (np.arange(bins) + 0.5) * (math.pi / 2) / bins
    pulses = np.zeros(bins, dtype=np.int64)
    det_clicks = np.zeros((bins, 4), dtype=np.int64)
    pol_clicks = np.zeros((bins, 2), dtype=np.int64)
    multi = np.zeros(bins, dtype=np.int64)

    for block, start, size in rng.block_ranges(trials):
        emit = rng.stream(seed, rng.EMISSION_STREAM, block)
        em = draw_emission_block(sconfig, emit, start, size)
        fs = rng.stream(seed, rng.FS_STREAM, block)
        t_idx = fs.integers(0, bins, size=size)
        theta = centers[t_idx]
        c0 = fs.binomial(em.count_alice, np.cos(em.lam + theta) ** 2)
        c0p = fs.binomial(c0, np.cos(theta - phi0) ** 2)
        c1 = em.count_alice - c0
        c1p = fs.binomial(c1, np.cos(theta - phi1) ** 2)
        counts = np.stack([c0p, c0 - c0p, c1p, c1 - c1p], axis=1)
        hits = counts >= em.order_alice[:, None]

        pulses += np.bincount(t_idx, minlength=bins)
        for d in range(4):
            det_clicks[:, d] += np.bincount(t_idx, weights=hits[:, d], minlength=bins).astype(
                np.int64
            )
        pol0 = hits[:, 0] | hits[:, 1]
        pol1 = hits[:, 2] | hits[:, 3]
        pol_clicks[:, 0] += np.bincount(t_idx, weights=pol0, minlength=bins).astype(np.int64)
        pol_clicks[:, 1] += np.bincount(t_idx, weights=pol1, minlength=bins).astype(np.int64)
        multi += np.bincount(
            t_idx, weights=hits.sum(axis=1) >= 2, minlength=bins
        ).astype(np.int64)

    return FsTestStats(
        sconfig=sconfig,
        seed=seed,
        phi=(phi0, phi1),
        bin_centers=centers,
        pulses=pulses,
        detector_clicks=det_clicks,
        pol_clicks=pol_clicks,
        multi_clicks=multi,
    )


def fs_verdict(fs):
    """Fit A + B*cos(4*(theta - phi)) to each polarimeter's click rate.

    Declares unfair sampling when the modulation amplitude B of either
    polarimeter exceeds MODULATION_SIGMAS standard errors.
    """
    if fs.pulses.min() < FS_MIN_PULSES_PER_BIN:
        raise InsufficientStatisticsError(
            f"fair-sampling fit needs >= {FS_MIN_PULSES_PER_BIN} pulses per bin; "
            f"thinnest bin holds {int(fs.pulses.min())}"
        )
    best = None
    for c in (0, 1):
        y = fs.rates(c)
        x = np.cos(4.0 * (fs.bin_centers - fs.phi[c]))
        sigma = np.sqrt(np.maximum(y * (1.0 - y), _SIGMA_FLOOR) / fs.pulses)
        a, b, _, sigma_b = cosine_quartic_fit(x, y, sigma)
        z = _zscore(b, sigma_b)
        if best is None or z > best[3]:
            best = (a, b, sigma_b, z)
    a, b, sigma_b, z = best
    return MonitorVerdict(
        fs_modulation_amplitude=abs(b),
        fs_modulation_sigma=sigma_b,
        fs_modulation_ratio=b / a if a else math.nan,
        fs_z=z,
        verdict="unfair_sampling_detected" if z > MODULATION_SIGMAS else "consistent_with_fair_sampling",
    )


def fs_oracle_rate(order, offset):
    """Expected polarimeter click rate at analyzer offset theta - phi."""
    return fs_click_probability(order, offset)


def faked_state_fs_demo(intensity=1.0, threshold=0.75):
    """Deterministic polarimeter response to bright faked states.

    Sweeps the faked pulse's polarization relative to the measurement basis
    (0: bases matched, pi/4: diagonal) against the analyzer-to-polarimeter
    offset (0: aligned, pi/4: diagonal) and classifies each click pattern.
    A correctly dimensioned faked state produces exactly one click only in
    the fully aligned arrangement; polarimeters turn every escape route
    into a no-click or double-click anomaly.
    """
    rows = []
    anomalies = []
    for basis_offset in (0.0, math.pi / 4):
        for pol_offset in (0.0, math.pi / 4):
            pulse = FakedPulse(polarization=basis_offset, intensity=intensity)
            clicked = blinded_detect(
                pulse, pbs_angle=0.0, threshold=threshold,
                phi0=-pol_offset, phi1=-pol_offset,
            )
            if len(clicked) == 0:
                pattern = "no_click"
            elif len(clicked) == 1:
                pattern = "single_click"
            elif {d // 2 for d in clicked} == {0} or {d // 2 for d in clicked} == {1}:
                pattern = "double_click_within_polarimeter"
            else:
                pattern = "double_click_across_channels"
            row = {
                "basis_offset": basis_offset,
                "polarimeter_offset": pol_offset,
                "clicked_detectors": [DETECTORS[d] for d in clicked],
                "pattern": pattern,
            }
            rows.append(row)
            if pattern.startswith("double"):
                anomalies.append(row)
            elif pattern == "no_click" and basis_offset == 0.0:
                # A basis-matched pulse must click; it vanished in the polarimeter.
                anomalies.append(row)
    return {
        "intensity": intensity,
        "threshold": threshold,
        "rows": rows,
        "anomalies": anomalies,
    }


def pair_correlations_by_delta(stats):
    """(delta, PairCorrelation) for every setting pair with coincidences.

    Convenience for reports and figures; delta is theta_a - theta_b.
    """
    out = []
    for ia in range(len(stats.pconfig.settings_alice)):
        for ib in range(len(stats.pconfig.settings_bob)):
            if stats.coincidences(ia, ib).sum() == 0:
                continue
            delta = stats.pconfig.settings_alice[ia] - stats.pconfig.settings_bob[ib]
            out.append((delta, pair_correlation(stats, ia, ib)))
    return out
