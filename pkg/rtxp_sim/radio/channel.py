"""
Shared half-duplex mono-channel.

Transmissions are registered when they are decided, so a later query sees
every emission that overlaps its window. Receptions are destroyed by any
overlapping emission audible at the receiver; carrier sense reaches two hops.
"""

import itertools
import logging
from typing import Iterable, List, Optional

import numpy as np

from rtxp_sim.core.models import Reception, Transmission
from rtxp_sim.core.topology import Network
from rtxp_sim.utils.logging import log_transmission, trace_enabled

logger = logging.getLogger(__name__)

DEFAULT_RETENTION_US = 5_000_000


class Channel:
    def __init__(
        self,
        network: Network,
        model,
        rng: Optional[np.random.Generator] = None,
        keep_history: bool = False,
        retention_us: int = DEFAULT_RETENTION_US,
    ):
        self.network = network
        self.model = model
        self.rng = rng
        self.retention_us = retention_us
        self.active: List[Transmission] = []
        self.history: Optional[List[Transmission]] = [] if keep_history else None
        self._ids = itertools.count()
        self.lost = 0
        self.delivered = 0

    def register(self, tx: Transmission) -> Transmission:
        tx.tx_id = next(self._ids)
        horizon = tx.start - self.retention_us
        if self.active and self.active[0].end < horizon:
            self.active = [t for t in self.active if t.end >= horizon]
        self.active.append(tx)
        if self.history is not None:
            self.history.append(tx)
        return tx

    def truncate(self, tx: Transmission, end: int) -> None:
        """Stop an emission early (a preamble cut short by a response)."""
        tx.duration = max(0, min(tx.duration, end - tx.start))

    def overlapping(self, t1: int, t2: int, exclude: Optional[Transmission] = None) -> List[Transmission]:
        return [t for t in self.active if t is not exclude and t.overlaps(t1, t2)]

    def reception_outcome(
        self,
        tx: Transmission,
        receiver: int,
        concurrent: Optional[Iterable[Transmission]] = None,
    ) -> Reception:
        """
        Outcome of tx at receiver.

        Nodes decode their one-hop neighbors and only detect two-hop ones, so
        a reception is destroyed by an overlapping emission from the receiver
        itself or from one of its neighbors. Two senders kept three hops
        apart can never destroy each other's receptions.
        """
        if receiver == tx.sender:
            raise ValueError(f"node {receiver} cannot receive its own transmission")
        if concurrent is None:
            concurrent = self.overlapping(tx.start, tx.end, exclude=tx)
        audible = self.network.graph.adjacency[receiver]
        for other in concurrent:
            if other is tx or other.sender == tx.sender:
                continue
            if (other.sender == receiver or other.sender in audible) and other.overlaps(tx.start, tx.end):
                self.lost += 1
                return Reception.LOST
        distance = self.network.topology.distance(tx.sender, receiver)
        if self.model.decodes(distance, self.rng):
            self.delivered += 1
            return Reception.DELIVERED
        self.lost += 1
        return Reception.LOST

    def carrier_sense(self, node: int, t1: int, t2: int, key: Optional[int] = None) -> bool:
        """
        True (busy) if a node within two hops emits inside [t1, t2).

        Args:
            node: the sensing node
            t1: window start
            t2: window end (exclusive)
            key: only count jamming codes answering this data transmission
        """
        scope = self.network.graph.two_hop[node]
        for tx in self.active:
            if tx.sender in scope and tx.overlaps(t1, t2) and (key is None or tx.key == key):
                return True
        return False

    def busy_until(self, node: int, t1: int, t2: int) -> Optional[int]:
        """End of the last emission node senses inside [t1, t2), None when the channel is idle."""
        scope = self.network.graph.two_hop[node]
        ends = [tx.end for tx in self.active if tx.sender in scope and tx.overlaps(t1, t2)]
        return max(ends) if ends else None

    def trace(self, tx: Transmission, receivers: Iterable[int], outcome: str) -> None:
        if trace_enabled():
            log_transmission(tx.end, tx.sender, tx.kind.value, receivers, outcome)
