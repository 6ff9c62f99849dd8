from dataclasses import dataclass
from typing import List

import numpy as np

from rtxp_sim.core.topology import Topology


@dataclass(frozen=True)
class Alarm:
    time_us: int
    origin: int


def generate_traffic(period_us: int, count: int, topology: Topology, rng: np.random.Generator) -> List[Alarm]:
    """
    One alarm every period, at k * period for k = 1..count, each raised by
    a node picked uniformly among the non-sink nodes.
    """
    if period_us <= 0:
        raise ValueError(f"alarm period must be positive, got {period_us}")
    candidates = np.array([v for v in range(topology.count) if v != topology.sink], dtype=np.int64)
    origins = rng.choice(candidates, size=count)
    return [Alarm(time_us=(k + 1) * period_us, origin=int(o)) for k, o in enumerate(origins)]
