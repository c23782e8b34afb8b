"""Acceptance suite.

One test per acceptance criterion, named criterion_1 .. criterion_9 so a
verbose pytest run shows exactly one pass/fail line for each.  Tolerances
are the ones the criteria state; Monte Carlo checks run on fixed seeds.

criterion_1 is expected to fail on a single cell: the reference table's
error probability for the (2,3) attack prints 0.17%, while the defining
integral evaluates to 0.338% (the symmetric table cells match that same
integral at printed precision, so the factor-two slip is in the reference
row, not in the implementation; test_oracle.py pins the integral's value).
"""

import json
import math
import time

import numpy as np
import pytest

from mpaqkd import oracle
from mpaqkd.countermeasures import analyze_monitors, faked_state_fs_demo, fs_verdict, run_fs_test
from mpaqkd.eve import eve_error_rates
from mpaqkd.polarization import click_probability
from mpaqkd.protocol import (
    ProtocolConfig,
    estimate_chsh,
    run_session,
    sift,
)
from mpaqkd.reports import jsonable, session_summary
from mpaqkd.source import DEFAULT_SEED, SourceConfig

pytestmark = pytest.mark.acceptance


def report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'}: {name}: {detail}")
    return ok


@pytest.fixture(scope="module")
def mc22():
    pconfig = ProtocolConfig(protocol="ekert", trials=10_000_000, seed=DEFAULT_SEED)
    sconfig = SourceConfig(mode="mpa", order_alice=2, order_bob=2)
    return run_session(pconfig, sconfig, workers=8)


@pytest.fixture(scope="module")
def mc_singlet():
    pconfig = ProtocolConfig(protocol="ekert", trials=10_000_000, seed=DEFAULT_SEED + 1)
    sconfig = SourceConfig(mode="singlet")
    return run_session(pconfig, sconfig, workers=8)


def test_criterion_1_reference_performance_table():
    """Analytic table matches the reference values at printed precision."""
    t0 = time.perf_counter()
    table = oracle.performance_table()
    elapsed = time.perf_counter() - t0

    # (value, half-unit-in-last-place) per printed reference cell; None
    # marks cells quoted as exact closed forms, compared at 1e-12
    reference = {
        (1, 1): dict(eta=(100.0, 0.5), S=(math.sqrt(2.0), None), V=(0.50, 0.005),
                     qber=(25.0, 0.5), perr=(5.67, 0.005)),
        (2, 2): dict(eta=(75.0, 0.5), S=(2.51, 0.005), V=(0.84, 0.005),
                     qber=(7.9, 0.05), perr=(0.82, 0.005)),
        (2, 3): dict(eta=(68.75, 0.005), S=(2.0 * math.sqrt(2.0), None), V=(0.91, 0.005),
                     qber=(4.5, 0.05), perr=(0.17, 0.005)),
        (3, 3): dict(eta=(62.5, 0.05), S=(3.17, 0.005), V=(0.96, 0.005),
                     qber=(2.1, 0.05), perr=(0.14, 0.005)),
    }
    failures = []
    for row in table:
        key = (row.attack.n, row.attack.m)
        got = dict(
            eta=100.0 * row.eta, S=row.chsh, V=row.visibility,
            qber=100.0 * row.qber, perr=100.0 * row.p_error_emitted,
        )
        for field, (expected, tol) in reference[key].items():
            tolerance = 1e-12 if tol is None else tol
            if abs(got[field] - expected) > tolerance:
                failures.append(
                    f"{field}{key}: table prints {expected}, computed {got[field]:.6g}"
                )
    ok = not failures and elapsed < 1.0
    report(
        "criterion 1 (reference table at printed precision, <1s)",
        ok,
        f"{20 - len(failures)}/20 cells match in {elapsed * 1e3:.0f} ms"
        + (f"; mismatches: {failures}" if failures else ""),
    )
    assert elapsed < 1.0
    assert not failures, (
        "reference-table mismatch: "
        + "; ".join(failures)
        + " [the (2,3) error-probability cell is a known factor-two slip in the "
        "reference row; the defining integral gives 0.338% and is pinned in "
        "test_oracle.py::test_eve_error_asymmetric_order]"
    )


def test_criterion_2_closed_form_equivalence():
    """Grid quadrature equals the analytic closed forms to 1e-10."""
    deltas = np.linspace(0.0, math.pi, 100)
    a22 = oracle.AttackOrder(2, 2)
    a23 = oracle.AttackOrder(2, 3)
    worst = 0.0
    for delta in deltas:
        e22 = -16.0 * math.cos(2 * delta) / (18.0 + math.cos(4 * delta))
        e23 = -10.0 * math.cos(2 * delta) / (10.0 + math.cos(4 * delta))
        sum22 = (18.0 + math.cos(4 * delta)) / 32.0
        p00 = sum22 * (1.0 + e22) / 4.0
        p01 = sum22 * (1.0 - e22) / 4.0
        worst = max(
            worst,
            abs(oracle.correlation(a22, delta) - e22),
            abs(oracle.correlation(a23, delta) - e23),
            abs(oracle.coincidence_sum(a22, delta) - sum22),
            abs(oracle.joint_probability(a22, 0.0, -delta, 0, 0) - p00),
            abs(oracle.joint_probability(a22, 0.0, -delta, 0, 1) - p01),
        )
    # single-pulse click probability: cos^2n + sin^2n with minimum 2^(1-n)
    for order in (1, 2, 3):
        for x in np.linspace(0.0, math.pi, 50):
            direct = math.cos(x) ** (2 * order) + math.sin(x) ** (2 * order)
            worst = max(worst, abs(click_probability(order, x, 0.0) - direct))
        worst = max(
            worst, abs(click_probability(order, math.pi / 4, 0.0) - 2.0 ** (1 - order))
        )
    ok = worst < 1e-10
    report("criterion 2 (closed-form equivalence, 100-point grid)", ok,
           f"max |quadrature - closed form| = {worst:.2e}")
    assert ok


def test_criterion_3_monte_carlo_vs_oracle(mc22, mc_singlet):
    """10^7-trial sessions reproduce S, QBER and the intercept error rate."""
    chsh_attack = estimate_chsh(mc22)
    key_attack = sift(mc22)
    eve = eve_error_rates(mc22)
    chsh_singlet = estimate_chsh(mc_singlet)
    key_singlet = sift(mc_singlet)

    checks = [
        ("attack S", chsh_attack.value, 2.514, 0.01),
        ("attack QBER", key_attack.qber, 0.079, 0.003),
        ("eve per-emitted", eve.per_emitted, 0.0082, 0.0005),
        ("singlet S", chsh_singlet.value, 2.828, 0.01),
        ("singlet QBER", key_singlet.qber, 0.0, 0.0),
    ]
    failures = [
        f"{name}: {got:.5f} vs {want} +- {tol}"
        for name, got, want, tol in checks
        if abs(got - want) > tol
    ]
    ok = not failures
    report(
        "criterion 3 (Monte Carlo vs oracle at 10^7 trials)", ok,
        f"S={chsh_attack.value:.4f}, QBER={key_attack.qber:.4f}, "
        f"eve={eve.per_emitted:.5f}, singlet S={chsh_singlet.value:.4f}, "
        f"singlet QBER={key_singlet.qber}"
        + (f"; failures: {failures}" if failures else ""),
    )
    assert not failures


def test_criterion_4_random_bit_padding_closes_the_loophole():
    """Padding non-detections with random bits keeps S below 2 for every attack."""
    worst_pair, worst = None, 0.0
    for n in range(1, 9):
        for m in range(1, 9):
            s = oracle.chsh_with_random_padding(oracle.AttackOrder(n, m))
            if s > worst:
                worst_pair, worst = (n, m), s
    ok = worst < 2.0
    report("criterion 4 (random-bit padding drives S below 2)", ok,
           f"max padded S = {worst:.4f} at orders {worst_pair} (all 64 pairs checked)")
    assert ok


def test_criterion_5_coincidence_sum_visibility(mc22, attack23_session):
    """Coincidence-sum modulation fits hit the analytic visibilities."""
    fit22 = analyze_monitors(mc22).sum_visibility_estimate
    fit23 = analyze_monitors(attack23_session).sum_visibility_estimate

    pconfig = ProtocolConfig(protocol="ekert", trials=2_000_000, seed=DEFAULT_SEED + 3)
    alt = run_session(
        pconfig, SourceConfig(order_alice=2, order_bob=3, alternating=True), workers=8
    )
    alt_verdict = analyze_monitors(alt)
    alt_fit = alt_verdict.sum_visibility_estimate
    alt_sigma = alt_verdict.sum_visibility_sigma

    ok = (
        abs(fit22 - 0.056) <= 0.01
        and abs(fit23 - 0.10) <= 0.01
        and abs(alt_fit) <= 3.0 * alt_sigma
    )
    report(
        "criterion 5 (coincidence-sum visibility fits)", ok,
        f"(2,2) fit {fit22:.4f} vs 0.056 +- 0.01; (2,3) fit {fit23:.4f} vs 0.10 "
        f"+- 0.01; alternating fit {alt_fit:.5f} within 3 sigma ({alt_sigma:.5f}) of 0",
    )
    assert ok


def test_criterion_6_fair_sampling_test():
    """Polarimeter scans: flat for single photons, modulated above, verdict flips."""
    trials = 16 * 100_000
    runs = {
        order: run_fs_test(
            SourceConfig(order_alice=order, order_bob=order), trials, seed=DEFAULT_SEED
        )
        for order in (1, 2, 3)
    }
    worst_z = 0.0
    for order, fs in runs.items():
        for pol in (0, 1):
            rate = fs.rates(pol)
            sigma = np.sqrt(rate * (1.0 - rate) / fs.pulses)
            expected = np.array(
                [oracle.fs_click_probability(order, c) for c in fs.bin_centers]
            )
            worst_z = max(worst_z, float(np.max(np.abs(rate - expected) / sigma)))
    verdicts = {order: fs_verdict(fs).verdict for order, fs in runs.items()}
    flips = (
        verdicts[1] == "consistent_with_fair_sampling"
        and verdicts[2] == "unfair_sampling_detected"
        and verdicts[3] == "unfair_sampling_detected"
    )
    ok = worst_z < 4.0 and flips
    report(
        "criterion 6 (fair-sampling scan at 1e5 pulses/bin)", ok,
        f"max bin deviation {worst_z:.2f} sigma (< 4); verdicts "
        f"order1={verdicts[1]}, order2={verdicts[2]}, order3={verdicts[3]}",
    )
    assert ok


def test_criterion_7_double_count_logic(mc22):
    """Fixed pulses never double-click; Poisson doubles need 2*order photons."""
    fixed_doubles = mc22.doubles_total()

    pconfig = ProtocolConfig(protocol="ekert", trials=400_000, seed=DEFAULT_SEED + 4)
    sconfig = SourceConfig(order_alice=2, order_bob=2, count_model="poisson", mu=0.8)
    recorded = run_session(pconfig, sconfig, record=True)
    rec = recorded.record
    doubles_alice = rec.outcome_alice == 3
    doubles_bob = rec.outcome_bob == 3
    n_doubles = int(doubles_alice.sum() + doubles_bob.sum())
    violators = int(
        np.sum(doubles_alice & (rec.count_alice < 2 * rec.order_alice))
        + np.sum(doubles_bob & (rec.count_bob < 2 * rec.order_bob))
    )
    ok = fixed_doubles == 0 and violators == 0 and n_doubles > 0
    report(
        "criterion 7 (double-count logic)", ok,
        f"fixed-count doubles over 10^7 trials: {fixed_doubles}; Poisson doubles: "
        f"{n_doubles}, all on pulses with >= 2*order photons ({violators} violations)",
    )
    assert ok


def test_criterion_8_worker_determinism():
    """Byte-identical statistics JSON for worker counts 1, 4 and 8."""
    pconfig = ProtocolConfig(protocol="ekert", trials=300_000, seed=DEFAULT_SEED)
    sconfig = SourceConfig(order_alice=2, order_bob=3)
    blobs = {
        w: json.dumps(
            jsonable(session_summary(run_session(pconfig, sconfig, workers=w))),
            sort_keys=True,
        ).encode()
        for w in (1, 4, 8)
    }
    ok = blobs[1] == blobs[4] == blobs[8]
    report("criterion 8 (worker-count determinism)", ok,
           f"summary JSON: {len(blobs[1])} bytes, identical across workers 1/4/8: {ok}")
    assert ok


def test_criterion_9_faked_state_demo():
    """Blinded-detector pulses betray themselves in polarimeters, exactly."""
    unit = faked_state_fs_demo(intensity=1.0, threshold=0.75)
    unit_patterns = {
        (r["basis_offset"], r["polarimeter_offset"]): r["pattern"] for r in unit["rows"]
    }
    bright = faked_state_fs_demo(intensity=2.0, threshold=0.75)
    bright_patterns = {
        (r["basis_offset"], r["polarimeter_offset"]): r["pattern"] for r in bright["rows"]
    }
    ok = (
        unit_patterns[(0.0, 0.0)] == "single_click"
        and unit_patterns[(0.0, math.pi / 4)] == "no_click"
        and bright_patterns[(0.0, math.pi / 4)] == "double_click_within_polarimeter"
        and bright_patterns[(math.pi / 4, 0.0)] == "double_click_across_channels"
    )
    report(
        "criterion 9 (faked-state demo, deterministic)", ok,
        f"intensity 1.0: aligned={unit_patterns[(0.0, 0.0)]}, "
        f"diagonal={unit_patterns[(0.0, math.pi / 4)]}; intensity 2.0: "
        f"within={bright_patterns[(0.0, math.pi / 4)]}, "
        f"across={bright_patterns[(math.pi / 4, 0.0)]}",
    )
    assert ok
