"""
RTXP: synchronized duty cycle with hop-count classes.

Every cycle opens with an activity period made of three awake periods and a
closing L slot. Awake period k serves the senders of class (-k) mod 3, where
a node's class is its ring mod 3, so a packet can drop three rings within
one activity period:

    B_0 R_2 BF_2 | B_2 R_1 BF_1 | B_1 R_0 BF_0 | L

B is contention among senders (backoff from the virtual coordinate, jamming
on expiry), R carries the data of each winner, BF elects the best receiver
as forwarder and its jamming code doubles as the acknowledgment. Losers and
unacknowledged senders jam in L, which appends a secondary activity period
for everyone within two hops of them.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from rtxp_sim.core.config import RtxpConfig
from rtxp_sim.core.kernel import Simulator
from rtxp_sim.core.models import AlarmPacket, Reception, Transmission, TxKind
from rtxp_sim.core.topology import Network
from rtxp_sim.core.vcs import VirtualCoordinates, assign_backoffs, compute_coordinates
from rtxp_sim.protocols.base import MacProtocol, PacketTracker
from rtxp_sim.radio.channel import Channel
from rtxp_sim.radio.energy import EnergyLedger, EnergyState

logger = logging.getLogger(__name__)


def sender_class(sub_period: int) -> int:
    return (-sub_period) % 3


def receiver_class(sub_period: int) -> int:
    return (sender_class(sub_period) - 1) % 3


def send_sub_period(ring: int) -> int:
    return (-(ring % 3)) % 3


def receive_sub_period(ring: int) -> int:
    return (-(ring % 3) - 1) % 3


def phase_timetable(ring: int, cycle_start: int, cfg: RtxpConfig, ap_index: int = 0) -> List[Tuple[str, int, int]]:
    """
    Phases a node of the given ring takes part in during one activity period.

    Returns:
        (label, start, end) tuples in time order: send contention B_c, the
        transmit slot R_(c-1), the receive slot R_c, forward contention BF_c
        and the shared L slot, where c = ring mod 3.
    """
    if ring < 1:
        raise ValueError(f"ring must be >= 1, got {ring}")
    c = ring % 3
    ap_start = cycle_start + ap_index * cfg.d_activity

    send = ap_start + send_sub_period(ring) * cfg.sub_period
    recv = ap_start + receive_sub_period(ring) * cfg.sub_period
    l_start = ap_start + 3 * cfg.sub_period
    entries = [
        (f"B{c}", send, send + cfg.d_b),
        (f"R{(c - 1) % 3}", send + cfg.d_b, send + cfg.d_b + cfg.d_r),
        (f"R{c}", recv + cfg.d_b, recv + cfg.d_b + cfg.d_r),
        (f"BF{c}", recv + cfg.d_b + cfg.d_r, recv + cfg.sub_period),
        ("L", l_start, l_start + cfg.d_l),
    ]
    return sorted(entries, key=lambda e: e[1])


@dataclass
class ContentionResult:
    winners: List[int] = field(default_factory=list)
    losers: Dict[int, int] = field(default_factory=dict)  # loser -> winner it heard

    @property
    def winner(self) -> Optional[int]:
        return self.winners[0] if self.winners else None


def contend_b(
    contenders: Iterable[int],
    backoff: Mapping[int, int],
    two_hop: Mapping[int, FrozenSet[int]],
    offset: Optional[Mapping[int, float]] = None,
) -> ContentionResult:
    """
    Jamming-code contention.

    Contenders expire in backoff order; a node whose backoff expires after a
    jamming code started within two hops withdraws. Inside one backoff slot
    the code of the node with the smaller offset starts first. Without
    offsets, equal backoffs do not hear each other and both win.
    """
    def key(n: int) -> Tuple[int, float, int]:
        return backoff[n], offset[n] if offset is not None else 0.0, n

    result = ContentionResult()
    for v in sorted(contenders, key=key):
        heard = [w for w in result.winners if w in two_hop[v] and (offset is not None or backoff[w] < backoff[v])]
        if heard:
            result.losers[v] = min(heard, key=key)
        else:
            result.winners.append(v)
    return result


@dataclass
class NodePhaseState:
    phase: str = "sleep"
    awaiting_ack: bool = False
    lost_contention: bool = False
    wants_retx: bool = False


@dataclass
class _Sending:
    sender: int
    packet: AlarmPacket
    tx: Optional[Transmission] = None
    decoders: List[int] = field(default_factory=list)


class RtxpProtocol(MacProtocol):
    def __init__(
        self,
        sim: Simulator,
        network: Network,
        channel: Channel,
        ledger: EnergyLedger,
        config: RtxpConfig,
        retransmissions: bool = True,
        tracker: Optional[PacketTracker] = None,
        coordinates: Optional[VirtualCoordinates] = None,
    ):
        super().__init__(sim, network, channel, ledger, tracker)
        self.config = config
        self.retransmissions = retransmissions
        self.name = "rtxp" if retransmissions else "rtxp-no-retx"

        radio_range = network.topology.radio_range
        slot_count = config.max_backoff_us // config.backoff_slot_us
        self.vcs = coordinates or compute_coordinates(network.graph, network.hops, radio_range, slot_count)
        backoffs = assign_backoffs(self.vcs, config.backoff_slot_us, config.max_backoff_us, radio_range)
        self.b_backoff = backoffs.b_backoff
        self.bf_backoff = backoffs.bf_backoff
        self.offset = {v: c.offset for v, c in self.vcs.coordinates.items()}

        self.ring = network.hops.ring
        self.two_hop = network.graph.two_hop
        self.state = {v: NodePhaseState() for v in range(network.size)}
        self.by_class: Dict[int, List[int]] = {
            c: [v for v in sorted(self.ring) if self.ring[v] % 3 == c] for c in range(3)
        }
        self.holders: Set[int] = set()

        self.cycle_start = 0
        self.ap_index = 0
        self.ap_start = 0
        self.awake: Optional[FrozenSet[int]] = None  # None: every node
        self.eligible: Optional[FrozenSet[int]] = None  # None: every holder may contend
        self._sending: List[_Sending] = []
        self.stats = {"cycles": 0, "secondary_periods": 0, "ties": 0, "capacity_exhausted": 0}

    @property
    def bound_us(self) -> int:
        return self.config.wctt_us(self.network.hops.max_ring)

    def install(self) -> None:
        self.sim.schedule_at(self.sim.now, self._start_cycle)

    def enqueue(self, node: int, packet: AlarmPacket) -> None:
        super().enqueue(node, packet)
        self.holders.add(node)

    def _is_awake(self, v: int) -> bool:
        return self.awake is None or v in self.awake

    def _awake_of_class(self, c: int) -> List[int]:
        members = self.by_class[c]
        if self.awake is None:
            return members
        return [v for v in members if v in self.awake]

    def _awake_nodes(self) -> List[int]:
        if self.awake is None:
            return list(range(self.network.size))
        return sorted(self.awake)

    # cycle and activity periods

    def _start_cycle(self) -> None:
        self.cycle_start = self.sim.now
        self.stats["cycles"] += 1
        for v in self.holders:
            for packet in self.queues[v]:
                packet.retx_count = 0
        self._start_activity(0, None, None)

    def _start_activity(self, ap_index: int, awake: Optional[FrozenSet[int]], eligible: Optional[FrozenSet[int]]) -> None:
        self.ap_index = ap_index
        self.ap_start = self.sim.now
        self.awake = awake
        self.eligible = eligible
        cfg = self.config
        for k in range(3):
            base = self.ap_start + k * cfg.sub_period
            self.sim.schedule_at(base, self._phase_b, k)
            self.sim.schedule_at(base + cfg.d_b, self._phase_r, k)
            self.sim.schedule_at(base + cfg.d_b + cfg.d_r, self._phase_bf, k)
        self.sim.schedule_at(self.ap_start + 3 * cfg.sub_period, self.l_slot_and_secondary)

    # phase B

    def _phase_b(self, k: int) -> None:
        now = self.sim.now
        c = sender_class(k)
        contenders = [
            v for v in sorted(self.holders)
            if self.ring[v] % 3 == c and self.ring[v] > 0 and self._is_awake(v)
            and (self.eligible is None or v in self.eligible)
        ]
        self._sending = []
        if not contenders:
            return

        result = contend_b(contenders, self.b_backoff, self.two_hop, self.offset)
        jam = self.config.jamming_us
        for w in result.winners:
            b = self.b_backoff[w]
            self.channel.register(Transmission(w, now + b, jam, TxKind.JAMMING))
            self.ledger.account(w, EnergyState.LISTEN, b)
            self.ledger.account(w, EnergyState.TX, jam)
            state = self.state[w]
            state.phase = f"B{c}"
            if len(self.queues[w]) > 1:
                state.lost_contention = True
            self._sending.append(_Sending(sender=w, packet=self.queues[w][0]))
        for loser, heard in result.losers.items():
            self.ledger.account(loser, EnergyState.LISTEN, self.b_backoff[heard] + jam)
            self.state[loser].phase = f"B{c}"
            self.state[loser].lost_contention = True

        # same-slot codes settled by offset
        self.stats["ties"] += sum(
            1 for loser, heard in result.losers.items() if self.b_backoff[loser] == self.b_backoff[heard]
        )

    # phase R

    def _phase_r(self, k: int) -> None:
        now = self.sim.now
        d_r = self.config.d_r
        for s in self._sending:
            s.tx = self.channel.register(Transmission(s.sender, now, d_r, TxKind.DATA, payload=s.packet))
            self.ledger.account(s.sender, EnergyState.TX, d_r)
            self.state[s.sender].awaiting_ack = True

        decoded: Set[int] = set()
        for s in self._sending:
            candidates = [r for r in self.network.lower[s.sender] if self._is_awake(r)]
            for r in candidates:
                if self.channel.reception_outcome(s.tx, r) == Reception.DELIVERED:
                    s.decoders.append(r)
                    decoded.add(r)
            self.channel.trace(s.tx, candidates, f"{len(s.decoders)}/{len(candidates)}")

        listeners = self._awake_of_class(receiver_class(k))
        self.ledger.account_many((v for v in listeners if v not in decoded), EnergyState.LISTEN, d_r)
        self.ledger.account_many(sorted(decoded), EnergyState.RX, d_r)

    # phase BF

    def _phase_bf(self, k: int) -> None:
        for s in self._sending:
            self.data_and_forward(s)
        self._sending = []

    def data_and_forward(self, s: _Sending) -> Optional[int]:
        """
        Elect the forwarder among the receivers that decoded s.packet.

        Returns:
            The forwarder, or None when nobody decoded the data.
        """
        now = self.sim.now
        cfg = self.config
        sender, packet = s.sender, s.packet
        self.state[sender].awaiting_ack = False

        if not s.decoders:
            self.ledger.account(sender, EnergyState.LISTEN, cfg.d_bf)
            self._unacknowledged(sender, packet)
            return None

        forwarder = min(s.decoders, key=lambda r: (self.bf_backoff[r], self.offset[r], r))
        best = self.bf_backoff[forwarder]
        self.channel.register(Transmission(forwarder, now + best, cfg.jamming_us, TxKind.JAMMING, key=s.tx.tx_id))
        self.ledger.account(forwarder, EnergyState.LISTEN, best)
        self.ledger.account(forwarder, EnergyState.TX, cfg.jamming_us)
        heard_until = best + cfg.jamming_us
        for r in s.decoders:
            if r != forwarder:
                self.ledger.account(r, EnergyState.LISTEN, heard_until)
                if self.bf_backoff[r] == best:
                    self.stats["ties"] += 1
            self.state[r].phase = "BF"

        acked = self.channel.carrier_sense(sender, now, now + cfg.d_bf, key=s.tx.tx_id)
        self.ledger.account(sender, EnergyState.LISTEN, heard_until if acked else cfg.d_bf)

        copy = self.tracker.forward(packet, forwarder)
        if forwarder == self.network.sink:
            self.tracker.deliver(copy, now)
        else:
            self.enqueue(forwarder, copy)

        if acked:
            self.queues[sender].popleft()
            self.tracker.release(packet)
            if not self.queues[sender]:
                self.holders.discard(sender)
        else:
            self._unacknowledged(sender, packet)
        return forwarder

    def _unacknowledged(self, sender: int, packet: AlarmPacket) -> None:
        if not self.retransmissions:
            self.queues[sender].popleft()
            self.tracker.drop(packet, "no-ack")
            if not self.queues[sender]:
                self.holders.discard(sender)
            return
        if packet.retx_count < self.config.max_retx_per_cycle:
            packet.retx_count += 1
            packet.retx_total += 1
            self.state[sender].wants_retx = True
        # otherwise the packet waits for the next cycle

    # L slot

    def l_slot_and_secondary(self) -> bool:
        """
        Jam in L where needed and decide whether a secondary activity period follows.

        Returns:
            True if a secondary activity period was appended.
        """
        now = self.sim.now
        d_l = self.config.d_l
        awake = self._awake_nodes()
        jammers = [v for v in awake if self.state[v].lost_contention or self.state[v].wants_retx]
        jamming = set(jammers)
        for v in jammers:
            self.channel.register(Transmission(v, now, d_l, TxKind.JAMMING))
            state = self.state[v]
            state.lost_contention = False
            state.wants_retx = False
        self.ledger.account_many(jammers, EnergyState.TX, d_l)
        self.ledger.account_many((v for v in awake if v not in jamming), EnergyState.LISTEN, d_l)

        if jammers and self.ap_index + 1 < self.config.capacity:
            in_reach: Set[int] = set()
            for v in jammers:
                in_reach.update(self.two_hop[v])
            sensing = {
                v for v in in_reach
                if v not in jamming and self._is_awake(v) and self.channel.carrier_sense(v, now, now + d_l)
            }
            self.stats["secondary_periods"] += 1
            self.sim.schedule_at(
                now + d_l, self._start_activity, self.ap_index + 1,
                frozenset(jamming | sensing), frozenset(jamming),
            )
            return True

        if jammers:
            self.stats["capacity_exhausted"] += 1
        for v in awake:
            self.state[v].phase = "sleep"
        self.awake = None
        self.eligible = None
        self.sim.schedule_at(self.cycle_start + self.config.cycle_us, self._start_cycle)
        return False
