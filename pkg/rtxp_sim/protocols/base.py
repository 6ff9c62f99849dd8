import logging
from collections import deque
from typing import Deque, Dict, List, Optional

from rtxp_sim.core.kernel import Simulator
from rtxp_sim.core.models import AlarmPacket, PacketRecord, PacketStatus
from rtxp_sim.core.topology import Network
from rtxp_sim.radio.channel import Channel
from rtxp_sim.radio.energy import EnergyLedger

logger = logging.getLogger(__name__)

PROTOCOLS = ("rtxp", "rtxp-no-retx", "pedamacs", "xmac-gradient")


class PacketTracker:
    """
    Follows every alarm and its copies until it is delivered, dropped or the
    run ends.

    A copy is added whenever a node takes a packet on; the alarm is dropped
    only when its last live copy goes away without a delivery.
    """

    def __init__(self):
        self.records: Dict[int, PacketRecord] = {}
        self.copies: Dict[int, int] = {}
        self.duplicates = 0
        self._next_id = 0

    def create(self, origin: int, created_at: int) -> AlarmPacket:
        packet = AlarmPacket(id=self._next_id, origin=origin, created_at=created_at, holder=origin)
        self._next_id += 1
        self.records[packet.id] = PacketRecord(packet_id=packet.id, origin=origin, created_at=created_at)
        self.copies[packet.id] = 1
        return packet

    def forward(self, packet: AlarmPacket, holder: int) -> AlarmPacket:
        """Copy of the packet for the next hop; the sender's copy stays live until released."""
        self.copies[packet.id] += 1
        return packet.fork(holder)

    def release(self, packet: AlarmPacket) -> None:
        """The holder handed the packet on and forgets its copy."""
        self.copies[packet.id] -= 1

    def deliver(self, packet: AlarmPacket, at: int) -> bool:
        """Record arrival at the sink; False for a duplicate."""
        self.copies[packet.id] -= 1
        record = self.records[packet.id]
        if record.status == PacketStatus.DELIVERED:
            self.duplicates += 1
            return False
        record.status = PacketStatus.DELIVERED
        record.delivered_at = at
        record.hops = packet.hops
        record.retx_total = packet.retx_total
        record.reason = ""
        return True

    def drop(self, packet: AlarmPacket, reason: str) -> None:
        self.copies[packet.id] -= 1
        record = self.records[packet.id]
        if self.copies[packet.id] <= 0 and record.status != PacketStatus.DELIVERED:
            record.status = PacketStatus.DROPPED
            record.reason = reason
            record.retx_total = packet.retx_total
            record.hops = packet.hops

    def results(self) -> List[PacketRecord]:
        return [self.records[k] for k in sorted(self.records)]

    @property
    def delivery_ratio(self) -> float:
        if not self.records:
            return 0.0
        delivered = sum(1 for r in self.records.values() if r.status == PacketStatus.DELIVERED)
        return delivered / len(self.records)


class MacProtocol:
    """Shared plumbing: queues, alarm injection and the packet tracker."""

    name = "mac"

    def __init__(
        self,
        sim: Simulator,
        network: Network,
        channel: Channel,
        ledger: EnergyLedger,
        tracker: Optional[PacketTracker] = None,
    ):
        self.sim = sim
        self.network = network
        self.channel = channel
        self.ledger = ledger
        self.tracker = tracker or PacketTracker()
        self.queues: Dict[int, Deque[AlarmPacket]] = {v: deque() for v in range(network.size)}

    @property
    def bound_us(self) -> int:
        """Analytical end-to-end delay bound used as the deadline."""
        raise NotImplementedError

    def install(self) -> None:
        """Schedule the protocol's periodic events."""
        raise NotImplementedError

    def inject(self, origin: int) -> AlarmPacket:
        """An alarm is sensed at origin now."""
        packet = self.tracker.create(origin, self.sim.now)
        self.enqueue(origin, packet)
        return packet

    def on_alarm(self, origin: int) -> None:
        self.inject(origin)

    def enqueue(self, node: int, packet: AlarmPacket) -> None:
        packet.holder = node
        self.queues[node].append(packet)

    def finalize(self, horizon_us: int) -> None:
        self.ledger.finalize(horizon_us)


def create_protocol(name: str, sim, network, channel, ledger, settings, rng=None, tracker=None) -> MacProtocol:
    """
    Build a protocol instance by name.

    Args:
        name: one of PROTOCOLS
        settings: ProtocolSettings with the rtxp, xmac and pedamacs configs
        rng: csma-backoff stream (xmac only)
    """
    from rtxp_sim.protocols.pedamacs import PedamacsProtocol
    from rtxp_sim.protocols.rtxp import RtxpProtocol
    from rtxp_sim.protocols.xmac import XmacProtocol

    if name == "rtxp":
        return RtxpProtocol(sim, network, channel, ledger, settings.rtxp, tracker=tracker)
    if name == "rtxp-no-retx":
        return RtxpProtocol(sim, network, channel, ledger, settings.rtxp, retransmissions=False, tracker=tracker)
    if name == "pedamacs":
        return PedamacsProtocol(sim, network, channel, ledger, settings.pedamacs, settings.radio, tracker=tracker)
    if name == "xmac-gradient":
        return XmacProtocol(sim, network, channel, ledger, settings.xmac, settings.rtxp, settings.radio, rng, tracker=tracker)
    raise ValueError(f"unknown protocol: {name}")
