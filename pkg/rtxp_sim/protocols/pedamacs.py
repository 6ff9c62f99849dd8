"""
Idealized TDMA convergecast baseline.

The sink knows the topology from the start and computes one frame in which
every node's packet reaches the sink. Nodes transmit only in their own slots
and wake only for the slots of their children. An alarm rides the slots of
its origin's flow, hop by hop, inside a single frame.
"""

import logging
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Callable, Deque, Dict, FrozenSet, List, Mapping, Optional, Set, Tuple

from rtxp_sim.core.config import PedamacsConfig, RadioParams
from rtxp_sim.core.kernel import Simulator
from rtxp_sim.core.models import AlarmPacket, Reception, Transmission, TxKind
from rtxp_sim.core.topology import Network
from rtxp_sim.protocols.base import MacProtocol, PacketTracker
from rtxp_sim.radio.channel import Channel
from rtxp_sim.radio.energy import EnergyLedger, EnergyState

logger = logging.getLogger(__name__)


@dataclass
class TreeRouting:
    sink: int
    parent: Dict[int, int]
    depth: Dict[int, int]

    def path(self, origin: int) -> List[int]:
        """Nodes from origin to the sink, both included."""
        nodes = [origin]
        while nodes[-1] != self.sink:
            nodes.append(self.parent[nodes[-1]])
        return nodes

    def children(self, node: int) -> List[int]:
        return sorted(v for v, p in self.parent.items() if p == node)


def build_tree(network: Network) -> TreeRouting:
    """BFS tree: each node's parent is its smallest-id neighbor one ring closer."""
    parent = {v: network.lower[v][0] for v in network.hops.ring if v != network.sink}
    return TreeRouting(sink=network.sink, parent=parent, depth=dict(network.hops.ring))


@dataclass(frozen=True)
class ScheduledLink:
    slot: int
    sender: int
    receiver: int
    origin: int
    hop: int


@dataclass
class TdmaSchedule:
    links: List[ScheduledLink]
    t_slot_us: int
    length: int = 0
    _sends: Dict[int, List[int]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.links = sorted(self.links, key=lambda l: (l.slot, l.sender))
        if not self.length:
            self.length = max((l.slot for l in self.links), default=-1) + 1
        sends = defaultdict(list)
        for link in self.links:
            sends[link.sender].append(link.slot)
        self._sends = {v: sorted(slots) for v, slots in sends.items()}

    @property
    def frame_us(self) -> int:
        return self.length * self.t_slot_us

    def send_slots(self, node: int) -> List[int]:
        return self._sends.get(node, [])

    def receive_slots(self, node: int) -> List[int]:
        return sorted(l.slot for l in self.links if l.receiver == node)

    def flow(self, origin: int) -> List[ScheduledLink]:
        """Links carrying origin's packet, first hop first."""
        return sorted((l for l in self.links if l.origin == origin), key=lambda l: l.hop)

    def flow_span(self) -> int:
        """Longest first-hop-to-arrival stretch of any flow, in slots."""
        first: Dict[int, int] = {}
        last: Dict[int, int] = {}
        for link in self.links:
            first[link.origin] = min(first.get(link.origin, link.slot), link.slot)
            last[link.origin] = max(last.get(link.origin, link.slot), link.slot)
        return max((last[o] - first[o] + 1 for o in first), default=0)

    def worst_case_delay_slots(self, alignment_slots: int) -> int:
        """
        Longest possible alarm delay, in slots.

        A frame that fits the alarm grid repeats on it, so every alarm meets
        a frame start and arrives before that frame ends. Longer frames run
        back to back and an alarm that just missed its first hop waits one
        frame more, then travels its whole flow.
        """
        if self.length <= alignment_slots:
            return self.length
        return self.length + self.flow_span()

    def slot_table(self) -> Dict[int, List[Tuple[int, int]]]:
        """slot -> (sender, receiver) pairs transmitting together."""
        table: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
        for link in self.links:
            table[link.slot].append((link.sender, link.receiver))
        return dict(table)

    def to_records(self) -> List[Dict[str, int]]:
        return [asdict(link) for link in self.links]

    @classmethod
    def from_records(cls, records, t_slot_us: int) -> "TdmaSchedule":
        links = [
            ScheduledLink(
                slot=int(r["slot"]),
                sender=int(r["sender"]),
                receiver=int(r["receiver"]),
                origin=int(r["origin"]),
                hop=int(r["hop"]),
            )
            for r in records
        ]
        return cls(links=links, t_slot_us=t_slot_us)


def links_conflict(
    first: Tuple[int, int],
    second: Tuple[int, int],
    two_hop: Mapping[int, FrozenSet[int]],
    guard_receivers: bool = False,
) -> bool:
    """
    Two (sender, receiver) links cannot share a slot.

    They conflict when they share a node or when the senders are within two
    hops of each other. Senders three hops apart may transmit together.
    With guard_receivers, a sender within two hops of the other link's
    receiver conflicts too.
    """
    s1, r1 = first
    s2, r2 = second
    if {s1, r1} & {s2, r2}:
        return True
    if s2 in two_hop[s1]:
        return True
    return guard_receivers and (r2 in two_hop[s1] or r1 in two_hop[s2])


class _SlotUsage:
    def __init__(self, guard_receivers: bool = False):
        self.guard_receivers = guard_receivers
        self.endpoints: Set[int] = set()
        self.senders: Set[int] = set()
        self.receivers: Set[int] = set()

    def admits(self, sender: int, receiver: int, two_hop: Mapping[int, FrozenSet[int]]) -> bool:
        if sender in self.endpoints or receiver in self.endpoints:
            return False
        if two_hop[sender] & self.senders:
            return False
        if self.guard_receivers:
            return not (two_hop[sender] & self.receivers or two_hop[receiver] & self.senders)
        return True

    def add(self, sender: int, receiver: int) -> None:
        self.endpoints.update((sender, receiver))
        self.senders.add(sender)
        self.receivers.add(receiver)


def _deepest_first(tree: TreeRouting) -> List[int]:
    return sorted(tree.parent, key=lambda v: (-tree.depth[v], v))


def greedy_links(
    tree: TreeRouting, two_hop: Mapping[int, FrozenSet[int]], guard_receivers: bool = False
) -> List[ScheduledLink]:
    """
    Packets are ordered deepest origin first; packet i would take slot 3i + j
    for its hop j. Each hop is then pulled forward to the earliest slot after
    its previous hop where it conflicts with nothing already placed.
    """
    pending = []
    for i, origin in enumerate(_deepest_first(tree)):
        path = tree.path(origin)
        for j in range(len(path) - 1):
            pending.append((3 * i + j, i, j, origin, path[j], path[j + 1]))
    pending.sort()

    usage: Dict[int, _SlotUsage] = defaultdict(partial(_SlotUsage, guard_receivers))
    placed_hop: Dict[int, int] = {}
    links = []
    for _, i, j, origin, sender, receiver in pending:
        slot = placed_hop[i] + 1 if j > 0 else 0
        while not usage[slot].admits(sender, receiver, two_hop):
            slot += 1
        usage[slot].add(sender, receiver)
        placed_hop[i] = slot
        links.append(ScheduledLink(slot=slot, sender=sender, receiver=receiver, origin=origin, hop=j + 1))
    return links


def pipelined_links(
    tree: TreeRouting, two_hop: Mapping[int, FrozenSet[int]], guard_receivers: bool = False
) -> List[ScheduledLink]:
    """
    Every flow takes consecutive slots, one per hop; each flow, deepest origin
    first, starts at the earliest slot where all of its hops fit.
    """
    usage: Dict[int, _SlotUsage] = defaultdict(partial(_SlotUsage, guard_receivers))
    links = []
    for origin in _deepest_first(tree):
        path = tree.path(origin)
        hops = list(zip(path, path[1:]))
        start = 0
        while not all(usage[start + j].admits(s, r, two_hop) for j, (s, r) in enumerate(hops)):
            start += 1
        for j, (sender, receiver) in enumerate(hops):
            usage[start + j].add(sender, receiver)
            links.append(ScheduledLink(slot=start + j, sender=sender, receiver=receiver, origin=origin, hop=j + 1))
    return links


def shallow_first_links(
    tree: TreeRouting, two_hop: Mapping[int, FrozenSet[int]], guard_receivers: bool = False
) -> List[ScheduledLink]:
    """
    Slot by slot list scheduling over per-node FIFO queues. Each slot serves
    holders closest to the sink first, then longer queues, then lower ids.
    """
    queues: Dict[int, Deque[Tuple[int, int]]] = {v: deque([(v, 1)]) for v in tree.parent}
    queues[tree.sink] = deque()
    remaining = len(tree.parent)
    links = []
    slot = 0
    while remaining:
        holders = sorted(
            (v for v in tree.parent if queues[v]),
            key=lambda v: (tree.depth[v], -len(queues[v]), v),
        )
        usage = _SlotUsage(guard_receivers)
        served = []
        for sender in holders:
            receiver = tree.parent[sender]
            if usage.admits(sender, receiver, two_hop):
                usage.add(sender, receiver)
                served.append((sender, receiver))
        for sender, receiver in served:
            origin, hop = queues[sender].popleft()
            links.append(ScheduledLink(slot=slot, sender=sender, receiver=receiver, origin=origin, hop=hop))
            if receiver == tree.sink:
                remaining -= 1
            else:
                queues[receiver].append((origin, hop + 1))
        slot += 1
    return links


def windowed_links(
    tree: TreeRouting,
    two_hop: Mapping[int, FrozenSet[int]],
    guard_receivers: bool = False,
    window: int = 32,
) -> List[ScheduledLink]:
    """
    Flow by flow, deepest origin first: each hop takes the earliest free slot
    after the previous one, but the whole flow must fit within window slots
    of its first hop, otherwise the flow starts later.
    """
    usage: Dict[int, _SlotUsage] = defaultdict(partial(_SlotUsage, guard_receivers))
    links = []
    for origin in _deepest_first(tree):
        path = tree.path(origin)
        hops = list(zip(path, path[1:]))
        span = max(window, len(hops))
        start = 0
        while True:
            slots = _fit_within(usage, hops, start, span, two_hop)
            if slots is not None:
                break
            start += 1
        for j, ((sender, receiver), slot) in enumerate(zip(hops, slots)):
            usage[slot].add(sender, receiver)
            links.append(ScheduledLink(slot=slot, sender=sender, receiver=receiver, origin=origin, hop=j + 1))
    return links


def _fit_within(
    usage: Mapping[int, _SlotUsage],
    hops: List[Tuple[int, int]],
    start: int,
    window: int,
    two_hop: Mapping[int, FrozenSet[int]],
) -> Optional[List[int]]:
    sender, receiver = hops[0]
    if not usage[start].admits(sender, receiver, two_hop):
        return None
    slots = [start]
    for sender, receiver in hops[1:]:
        slot = slots[-1] + 1
        while slot < start + window and not usage[slot].admits(sender, receiver, two_hop):
            slot += 1
        if slot >= start + window:
            return None
        slots.append(slot)
    return slots


SCHEDULERS: Dict[str, Callable[..., List[ScheduledLink]]] = {
    "greedy": greedy_links,
    "pipelined": pipelined_links,
    "shallow-first": shallow_first_links,
    "windowed-16": partial(windowed_links, window=16),
    "windowed-32": partial(windowed_links, window=32),
}


def compute_schedule(
    network: Network,
    tree: TreeRouting,
    t_slot_us: int = PedamacsConfig().t_slot_us,
    alignment_us: int = PedamacsConfig().frame_alignment_us,
    guard_receivers: bool = False,
) -> TdmaSchedule:
    """
    One frame carrying a packet from every node to the sink.

    Every scheduler in SCHEDULERS builds a candidate frame; the one with the
    smallest worst-case alarm delay wins, then the shortest, then the first
    listed. guard_receivers selects the stricter conflict rule of
    links_conflict.
    """
    two_hop = network.graph.two_hop
    alignment_slots = alignment_us // t_slot_us
    best: Optional[Tuple[Tuple[int, int, int], str, TdmaSchedule]] = None
    for rank, (name, build) in enumerate(SCHEDULERS.items()):
        links = build(tree, two_hop, guard_receivers=guard_receivers)
        candidate = TdmaSchedule(links=links, t_slot_us=t_slot_us)
        key = (candidate.worst_case_delay_slots(alignment_slots), candidate.length, rank)
        if best is None or key < best[0]:
            best = (key, name, candidate)

    (worst, length, _), name, schedule = best
    logger.debug(f"{name} tdma frame of {length} slots for {len(tree.parent)} flows, worst delay {worst} slots")
    limit = 3 * (network.size - 1)
    if worst > limit:
        logger.warning(f"worst-case alarm delay of {worst} slots exceeds {limit} on this deployment")
    return schedule


@dataclass
class ScheduleViolation:
    kind: str
    detail: str
    slot: Optional[int] = None

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def check_schedule(
    schedule: TdmaSchedule,
    network: Network,
    tree: TreeRouting,
    guard_receivers: bool = False,
) -> List[ScheduleViolation]:
    """
    Brute-force verification of a schedule.

    Checks every pair of links in each slot against the interference rule, the
    frame length against 3(|V|-1), and that every node's flow follows its tree
    path in strictly increasing slots.
    """
    two_hop = network.graph.two_hop
    violations = []

    for slot, pairs in sorted(schedule.slot_table().items()):
        for a in range(len(pairs)):
            for b in range(a + 1, len(pairs)):
                if links_conflict(pairs[a], pairs[b], two_hop, guard_receivers):
                    violations.append(
                        ScheduleViolation("interference", f"{pairs[a]} and {pairs[b]} conflict", slot)
                    )

    limit = 3 * (network.size - 1)
    if schedule.length > limit:
        violations.append(ScheduleViolation("length", f"{schedule.length} slots exceed {limit}"))

    flows: Dict[int, List[ScheduledLink]] = defaultdict(list)
    for link in schedule.links:
        flows[link.origin].append(link)
    for origin in sorted(tree.parent):
        hops = sorted(flows.get(origin, []), key=lambda l: l.hop)
        path = tree.path(origin)
        expected = list(zip(path, path[1:]))
        if [(l.sender, l.receiver) for l in hops] != expected:
            violations.append(ScheduleViolation("flow", f"flow of node {origin} does not follow {path}"))
            continue
        slots = [l.slot for l in hops]
        if any(b <= a for a, b in zip(slots, slots[1:])):
            violations.append(ScheduleViolation("order", f"flow of node {origin} uses slots {slots}"))
    return violations


def frame_period_us(frame_us: int, alignment_us: int) -> int:
    """Frames fitting the alarm grid repeat on it; longer ones run back to back."""
    return alignment_us if frame_us <= alignment_us else frame_us


class PedamacsProtocol(MacProtocol):
    name = "pedamacs"

    def __init__(
        self,
        sim: Simulator,
        network: Network,
        channel: Channel,
        ledger: EnergyLedger,
        config: PedamacsConfig,
        radio: RadioParams,
        tracker: Optional[PacketTracker] = None,
        schedule: Optional[TdmaSchedule] = None,
    ):
        super().__init__(sim, network, channel, ledger, tracker)
        self.config = config
        self.radio = radio
        self.tree = build_tree(network)
        self.schedule = schedule or compute_schedule(
            network, self.tree, config.t_slot_us, config.frame_alignment_us, config.guard_receivers
        )
        self.frame_period = frame_period_us(self.schedule.frame_us, config.frame_alignment_us)
        self.frames = 0
        self._epoch = 0
        self.stats = {
            "worst_delay_slots": self.schedule.worst_case_delay_slots(
                config.frame_alignment_us // config.t_slot_us
            )
        }

        # origin -> sender -> slot start within the frame
        self._flow_offsets: Dict[int, Dict[int, int]] = defaultdict(dict)
        guards = defaultdict(int)
        for link in self.schedule.links:
            self._flow_offsets[link.origin][link.sender] = link.slot * config.t_slot_us
            guards[link.receiver] += 1
        self._guard_listeners = sorted(guards)
        self._guard_counts = [guards[v] for v in self._guard_listeners]
        # origin -> last frame index whose flow is already claimed
        self._claimed: Dict[int, int] = {}

    @property
    def bound_us(self) -> int:
        return self.config.wctt_us(self.network.size)

    def install(self) -> None:
        self._epoch = self.sim.now
        self.sim.schedule_in(0, self.run_frame)

    def run_frame(self) -> None:
        """Frame boundary: parents wake for the guard of every child slot."""
        self.frames += 1
        guard = self.config.guard_us
        for v, count in zip(self._guard_listeners, self._guard_counts):
            self.ledger.account(v, EnergyState.LISTEN, guard * count)
        self.sim.schedule_in(self.frame_period, self.run_frame)

    def flow_slot_start(self, packet: AlarmPacket, node: int, t: int) -> int:
        """
        Start of the slot in which node sends packet, at or after t.

        The origin takes the first frame whose flow is unclaimed and whose
        first hop is still ahead; relays continue in the frame the flow began.
        """
        offset = self._flow_offsets[packet.origin].get(node)
        if offset is None:
            raise RuntimeError(f"node {node} is not on the flow of node {packet.origin}")
        frame = (t - self._epoch) // self.frame_period
        if node == packet.origin:
            if self._epoch + frame * self.frame_period + offset < t:
                frame += 1
            frame = max(frame, self._claimed.get(node, -1) + 1)
            self._claimed[node] = frame
        return self._epoch + frame * self.frame_period + offset

    def enqueue(self, node: int, packet: AlarmPacket) -> None:
        super().enqueue(node, packet)
        if node == self.network.sink:
            return
        slot_start = self.flow_slot_start(packet, node, self.sim.now)
        self.sim.schedule_at(slot_start + self.config.guard_us // 2, self._transmit, node, packet)

    def _transmit(self, node: int, packet: AlarmPacket) -> None:
        self.queues[node].remove(packet)
        receiver = self.tree.parent[node]
        tx = self.channel.register(
            Transmission(node, self.sim.now, self.radio.data_us, TxKind.DATA, payload=packet)
        )
        self.ledger.account(node, EnergyState.TX, tx.duration)
        self.sim.schedule_at(tx.end, self._receive, tx, receiver)

    def _receive(self, tx: Transmission, receiver: int) -> None:
        packet = tx.payload
        outcome = self.channel.reception_outcome(tx, receiver)
        self.channel.trace(tx, [receiver], outcome.value)
        if outcome != Reception.DELIVERED:
            self.tracker.drop(packet, "link-loss")
            return
        self.ledger.account(receiver, EnergyState.RX, tx.duration)
        copy = self.tracker.forward(packet, receiver)
        self.tracker.release(packet)
        if receiver == self.network.sink:
            self.tracker.deliver(copy, self.sim.now)
        else:
            self.enqueue(receiver, copy)
