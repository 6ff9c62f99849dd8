"""
Virtual coordinate system.

Each node gets coord = (ring - 1) * R + offset, where the offset ranks a
node inside its ring by how well it connects to the ring below: the larger
the share of neighbors one hop closer to the sink, the smaller the offset.
Offsets are laid on the backoff-slot grid so that, among same-ring nodes
within two hops of each other, slots are distinct when the grid allows and
the better connected node always holds the smaller offset.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List

from rtxp_sim.core.topology import HopCounts, NeighborGraph

logger = logging.getLogger(__name__)

OFFSET_SPREAD = 0.9  # raw offsets stay within 90% of R
TIE_SPACING = 0.4  # fraction of a slot width used to keep offsets distinct


@dataclass(frozen=True)
class Coordinate:
    ring: int
    offset: float
    coord: float


@dataclass
class VirtualCoordinates:
    coordinates: Dict[int, Coordinate]
    slots: Dict[int, int]
    slot_conflicts: int = 0

    def __getitem__(self, node: int) -> Coordinate:
        return self.coordinates[node]


@dataclass
class BackoffAssignment:
    b_backoff: Dict[int, int]
    bf_backoff: Dict[int, int]


def lower_ring_share(node: int, graph: NeighborGraph, rings: HopCounts) -> float:
    """Fraction of a node's neighbors that sit one ring closer to the sink."""
    neighbors = graph.adjacency[node]
    if not neighbors:
        return 0.0
    ring = rings.ring[node]
    return sum(1 for u in neighbors if rings.ring[u] == ring - 1) / len(neighbors)


def compute_coordinates(
    graph: NeighborGraph,
    rings: HopCounts,
    radio_range: float,
    slot_count: int = 50,
) -> VirtualCoordinates:
    """
    Assign (ring, offset, coord) to every node.

    Args:
        graph: neighbor graph of the deployment
        rings: hop counts from the sink
        radio_range: R, the ring width in coordinate units
        slot_count: number of distinct backoff slots (max_backoff / slot)

    Returns:
        Coordinates plus the slot index of each node and the number of nodes
        whose preferred slot could not be made unique in its 2-hop scope.
    """
    width = radio_range / slot_count
    share = {v: lower_ring_share(v, graph, rings) for v in rings.ring if rings.ring[v] > 0}
    order = sorted(share, key=lambda v: (rings.ring[v], -share[v], v))

    slots: Dict[int, int] = {}
    conflicts = 0
    for v in order:
        raw = OFFSET_SPREAD * radio_range * (1.0 - share[v])
        preferred = min(slot_count - 1, int(math.floor(raw / width + 0.5)))
        scope = [u for u in graph.two_hop[v] if u in slots and rings.ring[u] == rings.ring[v]]
        taken = {slots[u] for u in scope}
        # better connected nearby nodes were placed first and must stay strictly ahead
        lo = max((slots[u] + 1 for u in scope if share[u] > share[v]), default=0)
        start = max(preferred, lo)
        candidates = list(range(start, slot_count)) + list(range(start - 1, lo - 1, -1))
        chosen = next((s for s in candidates if s not in taken), None)
        if chosen is None:
            conflicts += 1
            chosen = min(start, slot_count - 1)
            logger.debug(f"node {v} (ring {rings.ring[v]}) shares backoff slot {chosen} within two hops")
        slots[v] = chosen
    if conflicts:
        logger.warning(f"{conflicts} node(s) share a backoff slot with a same-ring node within two hops")

    # the sink never contends; coord 0 sorts it before everyone
    coordinates = {v: Coordinate(0, 0.0, 0.0) for v in rings.members(0)}
    total = len(order)
    for rank, v in enumerate(order):
        delta = TIE_SPACING * width * (rank + 1) / (total + 1)
        offset = slots[v] * width + delta
        ring = rings.ring[v]
        coordinates[v] = Coordinate(ring=ring, offset=offset, coord=(ring - 1) * radio_range + offset)
    return VirtualCoordinates(coordinates=coordinates, slots=slots, slot_conflicts=conflicts)


def backoff_of(
    coord: Coordinate,
    slot_us: int = 200,
    max_backoff_us: int = 10_000,
    radio_range: float = 10.0,
) -> int:
    """Map an offset onto a backoff duration, rounded to the slot grid. B and BF both use it."""
    if coord.ring == 0:
        return 0
    exact = coord.offset / radio_range * max_backoff_us
    slots = int(math.floor(exact / slot_us + 0.5))
    return min(slots * slot_us, max_backoff_us)


def assign_backoffs(
    vcs: VirtualCoordinates,
    slot_us: int = 200,
    max_backoff_us: int = 10_000,
    radio_range: float = 10.0,
) -> BackoffAssignment:
    b = {v: backoff_of(c, slot_us, max_backoff_us, radio_range) for v, c in vcs.coordinates.items()}
    return BackoffAssignment(b_backoff=b, bf_backoff=dict(b))


def unique_minimum(nodes: Iterable[int], backoff: Dict[int, int]) -> bool:
    """True if exactly one node holds the smallest backoff."""
    values: List[int] = sorted(backoff[v] for v in nodes)
    return len(values) == 1 or (len(values) > 1 and values[0] < values[1])
