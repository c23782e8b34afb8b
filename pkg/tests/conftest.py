import pytest

from mpaqkd import ProtocolConfig, SourceConfig, run_session
from mpaqkd.source import DEFAULT_SEED

# Moderate-size sessions shared across test modules.  Statistical checks
# against them use 4 sigma tolerances unless stated otherwise.


@pytest.fixture(scope="session")
def attack22_session():
    pconfig = ProtocolConfig(protocol="ekert", trials=2_000_000, seed=DEFAULT_SEED)
    sconfig = SourceConfig(mode="mpa", order_alice=2, order_bob=2)
    return run_session(pconfig, sconfig, workers=4)


@pytest.fixture(scope="session")
def attack23_session():
    pconfig = ProtocolConfig(protocol="ekert", trials=2_000_000, seed=DEFAULT_SEED + 1)
    sconfig = SourceConfig(mode="mpa", order_alice=2, order_bob=3)
    return run_session(pconfig, sconfig, workers=4)


@pytest.fixture(scope="session")
def singlet_session():
    pconfig = ProtocolConfig(protocol="ekert", trials=1_000_000, seed=DEFAULT_SEED + 2)
    sconfig = SourceConfig(mode="singlet")
    return run_session(pconfig, sconfig, workers=4)
