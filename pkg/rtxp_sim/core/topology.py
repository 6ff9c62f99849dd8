"""
Random deployments and the structures derived from them: disk-model
neighbor graph, 2-hop sets and hop-count rings around the sink.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from rtxp_sim.core.kernel import RngStreams

logger = logging.getLogger(__name__)

DEFAULT_AREA = (50.0, 50.0)
DEFAULT_SINK_POSITION = (0.0, 0.0)


class DisconnectedTopology(ValueError):
    """Some nodes cannot reach the sink."""

    def __init__(self, unreachable: Sequence[int]):
        self.unreachable = sorted(unreachable)
        super().__init__(f"{len(self.unreachable)} node(s) unreachable from the sink: {self.unreachable[:10]}")


@dataclass(eq=False)
class Topology:
    positions: np.ndarray
    sink: int = 0
    area: Tuple[float, float] = DEFAULT_AREA
    radio_range: float = 10.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        if not 0 <= self.sink < len(self.positions):
            raise ValueError(f"sink {self.sink} is not a node id")

    @property
    def count(self) -> int:
        return len(self.positions)

    @property
    def nodes(self) -> List[Tuple[int, float, float]]:
        return [(i, float(x), float(y)) for i, (x, y) in enumerate(self.positions)]

    def distance(self, u: int, v: int) -> float:
        (x1, y1), (x2, y2) = self.positions[u], self.positions[v]
        return math.hypot(x1 - x2, y1 - y2)


@dataclass(eq=False)
class NeighborGraph:
    graph: nx.Graph
    adjacency: Dict[int, FrozenSet[int]]
    two_hop: Dict[int, FrozenSet[int]]

    @property
    def avg_neighbors(self) -> float:
        if not self.adjacency:
            return 0.0
        return sum(len(n) for n in self.adjacency.values()) / len(self.adjacency)


@dataclass(eq=False)
class HopCounts:
    ring: Dict[int, int]
    max_ring: int

    def members(self, ring: int) -> List[int]:
        return sorted(v for v, r in self.ring.items() if r == ring)


@dataclass(eq=False)
class Network:
    """Everything a protocol needs to know about the deployment."""

    topology: Topology
    graph: NeighborGraph
    hops: HopCounts
    lower: Dict[int, Tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.lower:
            self.lower = lower_neighbors(self.graph, self.hops)

    @property
    def sink(self) -> int:
        return self.topology.sink

    @property
    def size(self) -> int:
        return self.topology.count


def generate_uniform(
    count: int,
    area: Tuple[float, float],
    rng: np.random.Generator,
    radio_range: float = 10.0,
    sink_position: Optional[Tuple[float, float]] = DEFAULT_SINK_POSITION,
) -> Topology:
    """Place count nodes uniformly over the area; node 0 is the sink."""
    if count < 2:
        raise ValueError(f"a deployment needs at least 2 nodes, got {count}")
    width, height = area
    positions = rng.uniform((0.0, 0.0), (width, height), size=(count, 2))
    if sink_position is not None:
        positions[0] = sink_position
    return Topology(positions=positions, sink=0, area=(float(width), float(height)), radio_range=radio_range)


def build_graphs(topo: Topology) -> NeighborGraph:
    """Disk-model adjacency (distance <= range) and 2-hop sets."""
    pairs = sorted(cKDTree(topo.positions).query_pairs(r=topo.radio_range))
    graph = nx.Graph()
    graph.add_nodes_from(range(topo.count))
    graph.add_edges_from(pairs)

    adjacency = {v: frozenset(graph[v]) for v in graph.nodes}
    two_hop = {}
    for v, neighbors in adjacency.items():
        reach = set(neighbors)
        for u in neighbors:
            reach.update(adjacency[u])
        reach.discard(v)
        two_hop[v] = frozenset(reach)
    return NeighborGraph(graph=graph, adjacency=adjacency, two_hop=two_hop)


def hop_counts(graph: NeighborGraph, sink: int) -> HopCounts:
    """BFS distance of every node to the sink."""
    ring = nx.single_source_shortest_path_length(graph.graph, sink)
    if len(ring) < graph.graph.number_of_nodes():
        raise DisconnectedTopology(set(graph.graph.nodes) - set(ring))
    ring = {v: ring[v] for v in sorted(ring)}
    return HopCounts(ring=ring, max_ring=max(ring.values()))


def lower_neighbors(graph: NeighborGraph, hops: HopCounts) -> Dict[int, Tuple[int, ...]]:
    """Neighbors one ring closer to the sink, sorted by id."""
    return {
        v: tuple(sorted(u for u in graph.adjacency[v] if hops.ring[u] == hops.ring[v] - 1))
        for v in graph.adjacency
    }


def build_network(topo: Topology) -> Network:
    graph = build_graphs(topo)
    return Network(topology=topo, graph=graph, hops=hop_counts(graph, topo.sink))


def generate_connected(
    count: int,
    streams: RngStreams,
    area: Tuple[float, float] = DEFAULT_AREA,
    radio_range: float = 10.0,
    sink_position: Optional[Tuple[float, float]] = DEFAULT_SINK_POSITION,
    max_attempts: int = 1000,
) -> Tuple[Network, int]:
    """
    Draw deployments until one is connected.

    Each rejected attempt moves to the next index of the topology stream.

    Returns:
        The accepted network and the attempt index that produced it.
    """
    for attempt in range(max_attempts):
        topo = generate_uniform(count, area, streams.stream("topology", attempt), radio_range, sink_position)
        try:
            return build_network(topo), attempt
        except DisconnectedTopology as e:
            logger.info(f"seed {streams.seed} attempt {attempt}: {e}; regenerating")
    raise RuntimeError(f"no connected deployment of {count} nodes after {max_attempts} attempts")
