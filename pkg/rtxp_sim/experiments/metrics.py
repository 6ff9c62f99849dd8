"""
Per-run results and campaign-level tables.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from rtxp_sim.core.models import PacketRecord, PacketStatus


@dataclass
class RunResult:
    protocol: str
    channel: str
    node_count: int
    replication: int
    seed: int
    topology_attempt: int
    avg_neighbors: float
    nb_hop_max: int
    bound_us: int
    horizon_us: int
    packets: List[PacketRecord]
    energy_j: np.ndarray
    trace_digest: str
    duplicates: int = 0
    vcs_conflicts: Optional[int] = None
    frame_slots: Optional[int] = None
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def delivered(self) -> List[PacketRecord]:
        return [p for p in self.packets if p.status == PacketStatus.DELIVERED]

    @property
    def delivery_ratio(self) -> float:
        return len(self.delivered) / len(self.packets) if self.packets else 0.0

    @property
    def delays_us(self) -> List[int]:
        return [p.delay_us for p in self.delivered]

    @property
    def late_fraction(self) -> float:
        """Share of delivered packets that missed the deadline."""
        delays = self.delays_us
        if not delays:
            return 0.0
        return sum(1 for d in delays if d > self.bound_us) / len(delays)

    @property
    def max_energy_j(self) -> float:
        # the sink is mains powered
        sensors = np.delete(self.energy_j, 0)
        return float(sensors.max()) if sensors.size else 0.0

    def to_row(self) -> Dict[str, object]:
        return {
            "protocol": self.protocol,
            "channel": self.channel,
            "node_count": self.node_count,
            "replication": self.replication,
            "seed": self.seed,
            "topology_attempt": self.topology_attempt,
            "avg_neighbors": self.avg_neighbors,
            "nb_hop_max": self.nb_hop_max,
            "bound_us": self.bound_us,
            "horizon_us": self.horizon_us,
            "alarms": len(self.packets),
            "delivered": len(self.delivered),
            "dropped": sum(1 for p in self.packets if p.status == PacketStatus.DROPPED),
            "in_flight": sum(1 for p in self.packets if p.status == PacketStatus.IN_FLIGHT),
            "delivery": self.delivery_ratio,
            "late_fraction": self.late_fraction,
            "duplicates": self.duplicates,
            "max_energy_j": self.max_energy_j,
            "vcs_conflicts": self.vcs_conflicts,
            "frame_slots": self.frame_slots,
            "trace_digest": self.trace_digest,
        }


class MetricsReport:
    """Tables over a whole campaign, independent of the order runs finished in."""

    def __init__(self, spec, results: List[RunResult]):
        self.spec = spec
        self.results = sorted(results, key=lambda r: (r.node_count, r.replication))

    def runs(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_row() for r in self.results])

    def packets(self) -> pd.DataFrame:
        rows = []
        for r in self.results:
            for p in r.packets:
                row = {
                    "node_count": r.node_count,
                    "replication": r.replication,
                    "seed": r.seed,
                    "avg_neighbors": r.avg_neighbors,
                    **p.to_dict(),
                    "delay_us": p.delay_us,
                    "bound_us": r.bound_us,
                }
                row["late"] = p.delay_us is not None and p.delay_us > r.bound_us
                rows.append(row)
        frame = pd.DataFrame(rows)
        if not frame.empty:
            frame["delivery_us"] = frame["delivery_us"].astype("Int64")
            frame["delay_us"] = frame["delay_us"].astype("Int64")
        return frame

    def delivery(self) -> pd.DataFrame:
        """Min, mean and max delivery ratio per ensemble."""
        runs = self.runs()
        grouped = runs.groupby("node_count", sort=True)
        return pd.DataFrame(
            {
                "ensemble_size": grouped.size(),
                "avg_neighbors": grouped["avg_neighbors"].mean(),
                "min": grouped["delivery"].min(),
                "avg": grouped["delivery"].mean(),
                "max": grouped["delivery"].max(),
            }
        ).reset_index()

    def delay_plot(self) -> pd.DataFrame:
        """Every delivered packet plus one mean row per topology, with the bound."""
        rows = []
        for r in self.results:
            delays = r.delays_us
            for d in delays:
                rows.append((r.avg_neighbors, d / 1000, 0, r.bound_us / 1000))
            if delays:
                rows.append((r.avg_neighbors, float(np.mean(delays)) / 1000, 1, r.bound_us / 1000))
        return pd.DataFrame(rows, columns=["avg_neighbors", "delay_ms", "is_mean", "wctt_ms"])

    def delivery_plot(self) -> pd.DataFrame:
        table = self.delivery()
        return table[["ensemble_size", "min", "avg", "max"]]

    def energy_plot(self) -> pd.DataFrame:
        """Largest per-node energy seen in each ensemble."""
        runs = self.runs()
        grouped = runs.groupby("node_count", sort=True)
        return pd.DataFrame(
            {
                "ensemble_size": grouped.size(),
                "avg_neighbors": grouped["avg_neighbors"].mean(),
                "max_energy_j": grouped["max_energy_j"].max(),
            }
        ).reset_index(drop=True)

    def summary(self) -> Dict[str, float]:
        if not self.results:
            return {"runs": 0}
        delays = [d for r in self.results for d in r.delays_us]
        return {
            "runs": len(self.results),
            "delivery_min": min(r.delivery_ratio for r in self.results),
            "delivery_avg": float(np.mean([r.delivery_ratio for r in self.results])),
            "max_delay_us": max(delays) if delays else 0,
            "late_fraction": float(np.mean([r.late_fraction for r in self.results])),
        }
