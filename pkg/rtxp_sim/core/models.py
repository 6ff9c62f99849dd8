from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class TxKind(str, Enum):
    JAMMING = "jamming"
    DATA = "data"
    STROBE = "preamble-strobe"
    ACK = "ack"


class Reception(str, Enum):
    DELIVERED = "delivered"
    LOST = "lost"


class PacketStatus(str, Enum):
    DELIVERED = "delivered"
    DROPPED = "dropped"
    IN_FLIGHT = "in-flight"


@dataclass
class Transmission:
    """One emission on the shared channel."""

    sender: int
    start: int
    duration: int
    kind: TxKind
    payload: Any = None
    key: Optional[int] = None  # id of the data transmission a jamming code answers
    tx_id: Optional[int] = None  # assigned by the channel on register

    @property
    def end(self) -> int:
        return self.start + self.duration

    def overlaps(self, t1: int, t2: int) -> bool:
        """True if the emission intersects the half-open window [t1, t2)."""
        return self.start < t2 and t1 < self.end


@dataclass
class AlarmPacket:
    """A copy of an alarm travelling toward the sink."""

    id: int
    origin: int
    created_at: int
    holder: int
    hop_trace: List[int] = field(default_factory=list)
    retx_total: int = 0
    retx_count: int = 0  # per duty cycle
    retries_used: int = 0

    def __post_init__(self):
        if not self.hop_trace:
            self.hop_trace = [self.holder]

    def fork(self, holder: int) -> "AlarmPacket":
        """Copy of this packet handed to the next hop."""
        return AlarmPacket(
            id=self.id,
            origin=self.origin,
            created_at=self.created_at,
            holder=holder,
            hop_trace=self.hop_trace + [holder],
            retx_total=self.retx_total,
        )

    @property
    def hops(self) -> int:
        return len(self.hop_trace) - 1


@dataclass
class PacketRecord:
    """Final outcome of one alarm."""

    packet_id: int
    origin: int
    created_at: int
    status: PacketStatus = PacketStatus.IN_FLIGHT
    delivered_at: Optional[int] = None
    hops: int = 0
    retx_total: int = 0
    reason: str = ""

    @property
    def delay_us(self) -> Optional[int]:
        if self.delivered_at is None:
            return None
        return self.delivered_at - self.created_at

    def to_dict(self) -> Dict[str, Any]:
        return {
            "packet_id": self.packet_id,
            "origin": self.origin,
            "creation_us": self.created_at,
            "delivery_us": self.delivered_at,
            "hops": self.hops,
            "retx_total": self.retx_total,
            "status": self.status.value,
            "reason": self.reason,
        }
