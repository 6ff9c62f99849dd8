from enum import Enum
from typing import Dict, Iterable

import numpy as np

from rtxp_sim.core.config import RadioParams


class EnergyState(str, Enum):
    TX = "tx"
    RX = "rx"
    LISTEN = "listen"
    SLEEP = "sleep"


class EnergyConservationError(RuntimeError):
    """A node spent more time active than the run lasted."""


class EnergyLedger:
    """Per-node time spent in each radio state, in integer microseconds."""

    def __init__(self, node_count: int, params: RadioParams):
        self.node_count = node_count
        self.params = params
        self.time_us: Dict[EnergyState, np.ndarray] = {
            state: np.zeros(node_count, dtype=np.int64) for state in EnergyState
        }
        self.horizon_us = None

    def account(self, node: int, state: EnergyState, duration: int) -> None:
        """Add time in a state to one node."""
        if duration < 0:
            raise ValueError(f"negative duration {duration} for node {node}")
        self.time_us[state][node] += int(duration)

    def account_many(self, nodes: Iterable[int], state: EnergyState, duration: int) -> None:
        """Add the same time in a state to several nodes."""
        if duration < 0:
            raise ValueError(f"negative duration {duration}")
        idx = np.fromiter(nodes, dtype=np.int64)
        if idx.size:
            np.add.at(self.time_us[state], idx, int(duration))

    def active_us(self) -> np.ndarray:
        return self.time_us[EnergyState.TX] + self.time_us[EnergyState.RX] + self.time_us[EnergyState.LISTEN]

    def finalize(self, horizon_us: int) -> None:
        """Fill the remainder of the run with sleep; sleep is never accounted directly."""
        remainder = horizon_us - self.active_us()
        if (remainder < 0).any():
            node = int(np.argmin(remainder))
            raise EnergyConservationError(
                f"node {node} active {int(self.active_us()[node])} us over a {horizon_us} us run"
            )
        self.time_us[EnergyState.SLEEP] = remainder
        self.horizon_us = horizon_us

    def power_mw(self, state: EnergyState) -> float:
        return {
            EnergyState.TX: self.params.tx_mw,
            EnergyState.RX: self.params.rx_mw,
            EnergyState.LISTEN: self.params.listen_mw,
            EnergyState.SLEEP: self.params.sleep_mw,
        }[state]

    def energy_j(self) -> np.ndarray:
        """Per-node energy in joules."""
        total = np.zeros(self.node_count, dtype=float)
        for state, t in self.time_us.items():
            total += self.power_mw(state) * 1e-3 * t * 1e-6
        return total

