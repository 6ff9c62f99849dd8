import math
from typing import Optional

import numpy as np

from rtxp_sim.core.config import RadioParams


class FreeSpaceModel:
    """Disk model: every frame sent within range is decodable."""

    name = "free-space"

    def __init__(self, radio_range: float):
        self.radio_range = radio_range

    def decodes(self, distance: float, rng: Optional[np.random.Generator] = None) -> bool:
        return distance <= self.radio_range


class LogNormalShadowing:
    """
    Log-distance path loss with a fresh Normal(0, sigma) shadowing term per
    (transmission, receiver) pair.

    The sensitivity sits at the mean received power at the radio range, so a
    receiver exactly R away decodes half of the time.
    """

    name = "log-normal"

    def __init__(
        self,
        radio_range: float,
        exponent: float = 2.0,
        sigma_db: float = 4.0,
        ref_distance: float = 1.0,
        tx_power_dbm: float = 0.0,
    ):
        self.radio_range = radio_range
        self.exponent = exponent
        self.sigma_db = sigma_db
        self.ref_distance = ref_distance
        self.tx_power_dbm = tx_power_dbm
        self.sensitivity_dbm = self.mean_rx_power(radio_range)

    def mean_rx_power(self, distance: float) -> float:
        if distance <= self.ref_distance:
            return self.tx_power_dbm
        return self.tx_power_dbm - 10 * self.exponent * math.log10(distance / self.ref_distance)

    def rx_power(self, distance: float, rng: np.random.Generator) -> float:
        return self.mean_rx_power(distance) + rng.normal(0.0, self.sigma_db)

    def decodes(self, distance: float, rng: Optional[np.random.Generator] = None) -> bool:
        if distance > self.radio_range:
            return False
        if rng is None:
            raise ValueError("log-normal reception needs a random stream")
        return self.rx_power(distance, rng) >= self.sensitivity_dbm


def create_propagation(name: str, params: RadioParams):
    """Build the propagation model for a channel name."""
    if name == FreeSpaceModel.name:
        return FreeSpaceModel(params.radio_range)
    if name == LogNormalShadowing.name:
        return LogNormalShadowing(
            radio_range=params.radio_range,
            exponent=params.path_loss_exponent,
            sigma_db=params.shadowing_sigma_db,
            ref_distance=params.reference_distance,
            tx_power_dbm=params.tx_power_dbm,
        )
    raise ValueError(f"unknown channel model: {name}")
