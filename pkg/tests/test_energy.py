"""
Tests for the per-node energy ledger.
"""

import pytest

from rtxp_sim.core.config import ConfigError, RadioParams
from rtxp_sim.radio.energy import EnergyConservationError, EnergyLedger, EnergyState


@pytest.fixture
def ledger():
    return EnergyLedger(3, RadioParams())


def test_sleep_fills_the_remainder(ledger):
    """Sleep is whatever the run left after tx, rx and listen."""
    ledger.account(0, EnergyState.TX, 1_600)
    ledger.account(0, EnergyState.LISTEN, 10_000)
    ledger.account(1, EnergyState.RX, 1_600)
    ledger.finalize(1_000_000)

    sleep = ledger.time_us[EnergyState.SLEEP]
    assert list(sleep) == [1_000_000 - 11_600, 1_000_000 - 1_600, 1_000_000]
    for v in range(3):
        total = sum(int(ledger.time_us[s][v]) for s in EnergyState)
        assert total == 1_000_000


def test_account_many_counts_repeated_nodes(ledger):
    """Each occurrence of a node adds the duration once more."""
    ledger.account_many([0, 2, 2], EnergyState.LISTEN, 200)
    ledger.account_many([], EnergyState.LISTEN, 200)
    assert list(ledger.time_us[EnergyState.LISTEN]) == [200, 0, 400]


def test_conservation_violation(ledger):
    """More active time than the run lasted is an error."""
    ledger.account(1, EnergyState.LISTEN, 2_000)
    with pytest.raises(EnergyConservationError):
        ledger.finalize(1_000)


def test_negative_duration(ledger):
    """Durations are non-negative."""
    with pytest.raises(ValueError):
        ledger.account(0, EnergyState.TX, -1)
    with pytest.raises(ValueError):
        ledger.account_many([0], EnergyState.TX, -1)


def test_energy_in_joules(ledger):
    """60 mW over one second of listening is 0.06 J, plus sleep power."""
    ledger.account(0, EnergyState.LISTEN, 1_000_000)
    ledger.finalize(2_000_000)
    energy = ledger.energy_j()
    assert energy[0] == pytest.approx(0.06 + 0.003e-3 * 1.0)
    assert energy[1] == pytest.approx(0.003e-3 * 2.0)


def test_radio_profile_validation():
    """Sleep power must sit below listen power and ranges are positive."""
    with pytest.raises(ConfigError):
        RadioParams(sleep_mw=60.0)
    with pytest.raises(ConfigError):
        RadioParams(radio_range=0)
