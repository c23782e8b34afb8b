"""Simulator and analytic oracle for multiple-photon-absorption attacks on
entanglement-based quantum key distribution.

The package models an adversarial photon source that replaces entangled
pairs with classically correlated multi-photon pulses, exploits threshold
detectors through the detection loophole, and evaluates the countermeasures
(random-bit padding, coincidence-sum monitoring, polarimeter fair-sampling
tests) that expose it.
"""

from .errors import (
    ConfigError,
    EmptyKeyError,
    InsufficientStatisticsError,
    MpaqkdError,
)
from .oracle import AttackOrder, OracleReport, performance_table
from .oracle import report as oracle_report
from .protocol import (
    ChshResult,
    PairCorrelation,
    ProtocolConfig,
    SessionStats,
    SiftedKey,
    estimate_chsh,
    random_bit_padding_chsh,
    run_session,
    sift,
)
from .source import DEFAULT_SEED, PulseSource, SourceConfig
from .countermeasures import (
    MonitorVerdict,
    analyze_monitors,
    faked_state_fs_demo,
    fs_verdict,
    run_fs_test,
)
from .eve import EveReport, eve_error_rates

__version__ = "0.1.0"

__all__ = [
    "AttackOrder",
    "ChshResult",
    "ConfigError",
    "DEFAULT_SEED",
    "EmptyKeyError",
    "EveReport",
    "InsufficientStatisticsError",
    "MonitorVerdict",
    "MpaqkdError",
    "OracleReport",
    "PairCorrelation",
    "ProtocolConfig",
    "PulseSource",
    "SessionStats",
    "SiftedKey",
    "SourceConfig",
    "analyze_monitors",
    "estimate_chsh",
    "eve_error_rates",
    "faked_state_fs_demo",
    "fs_verdict",
    "oracle_report",
    "performance_table",
    "random_bit_padding_chsh",
    "run_fs_test",
    "run_session",
    "sift",
    "__version__",
]
