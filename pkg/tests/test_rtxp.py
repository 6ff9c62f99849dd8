"""
Tests for the rtxp duty cycle: phase timetable, contention, forwarding and
the real-time guarantees on a loss-free channel.
"""

import numpy as np
import pytest

from rtxp_sim.core.config import ProtocolSettings, RadioParams, RtxpConfig
from rtxp_sim.core.kernel import RngStreams, Simulator
from rtxp_sim.core.models import PacketStatus, TxKind
from rtxp_sim.core.topology import Topology, build_network, generate_connected
from rtxp_sim.experiments.runner import RunPlan, run_single
from rtxp_sim.experiments.traffic import generate_traffic
from rtxp_sim.protocols.rtxp import (
    RtxpProtocol,
    contend_b,
    phase_timetable,
    receive_sub_period,
    receiver_class,
    send_sub_period,
    sender_class,
)
from rtxp_sim.radio.channel import Channel
from rtxp_sim.radio.energy import EnergyLedger
from rtxp_sim.radio.propagation import FreeSpaceModel

CFG = RtxpConfig(duty_cycle=0.01)


def _protocol(network, retransmissions=True):
    sim = Simulator()
    channel = Channel(network, FreeSpaceModel(network.topology.radio_range))
    ledger = EnergyLedger(network.size, RadioParams())
    protocol = RtxpProtocol(sim, network, channel, ledger, CFG, retransmissions=retransmissions)
    return sim, protocol


@pytest.fixture
def chain():
    """Sink plus four nodes 8 m apart: rings 0..4."""
    topo = Topology(positions=[(0, 0), (8, 0), (16, 0), (24, 0), (32, 0)])
    return build_network(topo)


def test_classes_line_up():
    """Sub-period k serves sender class (-k) mod 3 toward receiver class one lower."""
    for k in range(3):
        assert receiver_class(k) == (sender_class(k) - 1) % 3
    for ring in range(1, 10):
        assert sender_class(send_sub_period(ring)) == ring % 3
        assert receiver_class(receive_sub_period(ring)) == ring % 3


def test_timetable_for_ring_six():
    """Class 0 sends first and receives last."""
    assert phase_timetable(6, 0, CFG) == [
        ("B0", 0, 10_200),
        ("R2", 10_200, 11_800),
        ("R0", 54_200, 55_800),
        ("BF0", 55_800, 66_000),
        ("L", 66_000, 66_200),
    ]


def test_timetable_for_ring_one():
    """Class 1 receives in the second awake period and sends in the third."""
    assert phase_timetable(1, 0, CFG) == [
        ("R1", 32_200, 33_800),
        ("BF1", 33_800, 44_000),
        ("B1", 44_000, 54_200),
        ("R0", 54_200, 55_800),
        ("L", 66_000, 66_200),
    ]


def test_timetable_secondary_period_offset():
    """Secondary activity period i starts i * D_activity into the cycle."""
    first = phase_timetable(4, 1_000_000, CFG)
    third = phase_timetable(4, 1_000_000, CFG, ap_index=2)
    assert [(l, s + 2 * CFG.d_activity, e + 2 * CFG.d_activity) for l, s, e in first] == third


def test_timetable_rejects_the_sink():
    with pytest.raises(ValueError):
        phase_timetable(0, 0, CFG)


def test_contention_winner_and_losers():
    """The smallest backoff wins; losers remember whose jam they heard."""
    two_hop = {1: frozenset({2, 3}), 2: frozenset({1, 3}), 3: frozenset({1, 2})}
    result = contend_b([1, 2, 3], {1: 600, 2: 200, 3: 400}, two_hop)
    assert result.winners == [2]
    assert result.losers == {1: 2, 3: 2}


def test_contention_ties_and_hidden_nodes():
    """Equal backoffs cannot hear each other; out-of-reach nodes both win."""
    near = {1: frozenset({2}), 2: frozenset({1})}
    assert contend_b([1, 2], {1: 400, 2: 400}, near).winners == [1, 2]
    far = {1: frozenset(), 2: frozenset()}
    assert contend_b([1, 2], {1: 200, 2: 400}, far).winners == [1, 2]


def test_same_slot_contention_goes_to_the_smaller_offset():
    """Inside one backoff slot the smaller offset jams first and the other withdraws."""
    near = {1: frozenset({2}), 2: frozenset({1})}
    result = contend_b([1, 2], {1: 400, 2: 400}, near, offset={1: 4.1, 2: 3.9})
    assert result.winners == [2]
    assert result.losers == {1: 2}
    far = {1: frozenset(), 2: frozenset()}
    assert contend_b([1, 2], {1: 400, 2: 400}, far, offset={1: 4.1, 2: 3.9}).winners == [2, 1]


def test_single_alarm_crosses_the_chain(chain):
    """An alarm at ring 4 reaches the sink within (4 + 1) cycles."""
    sim, protocol = _protocol(chain)
    protocol.install()
    protocol.inject(4)
    sim.run_until(protocol.bound_us)
    record = protocol.tracker.results()[0]
    assert record.status == PacketStatus.DELIVERED
    assert record.hops == 4
    assert record.delay_us <= protocol.bound_us
    protocol.finalize(sim.now)


def test_three_rings_in_one_activity_period(chain):
    """A packet injected at ring 3 drops to the sink during the first activity period."""
    sim, protocol = _protocol(chain)
    protocol.install()
    protocol.inject(3)
    sim.run_until(CFG.d_activity)
    record = protocol.tracker.results()[0]
    assert record.status == PacketStatus.DELIVERED
    assert record.delivered_at < CFG.d_activity


def test_backlog_triggers_a_secondary_period(chain):
    """Two packets at one node: the second leaves in a secondary activity period."""
    sim, protocol = _protocol(chain)
    protocol.install()
    protocol.inject(1)
    protocol.inject(1)
    sim.run_until(CFG.cycle_us - 1)
    assert protocol.stats["secondary_periods"] >= 1
    records = protocol.tracker.results()
    assert all(r.status == PacketStatus.DELIVERED for r in records)
    assert CFG.d_activity < records[1].delivered_at < 2 * CFG.d_activity


def test_neighborhood_burst_drains_within_one_cycle():
    """Fewer than C packets in one 2-hop neighborhood of ring n all reach ring n-1 in one cycle."""
    network, _ = generate_connected(150, RngStreams(1))
    assert network.hops.max_ring >= 2
    ring = network.hops.ring
    rng = np.random.default_rng(77)
    candidates = [v for v in ring if ring[v] >= 1]

    for _ in range(100):
        center = int(rng.choice(candidates))
        n = ring[center]
        pool = sorted(u for u in network.graph.adjacency[center] | {center} if ring[u] == n)
        count = int(rng.integers(1, CFG.capacity))
        origins = [int(u) for u in rng.choice(pool, size=count)]

        sim, protocol = _protocol(network)
        protocol.install()
        packets = [protocol.inject(o) for o in origins]
        sim.run_until(CFG.cycle_us - 1)

        lowest = {p.id: n for p in packets}
        for record in protocol.tracker.results():
            if record.status == PacketStatus.DELIVERED:
                lowest[record.packet_id] = 0
        for holder, queue in protocol.queues.items():
            for copy in queue:
                lowest[copy.id] = min(lowest[copy.id], ring[holder])
        stuck = [pid for pid, r in lowest.items() if r > n - 1]
        assert not stuck, f"{len(stuck)} of {count} packets from ring {n} still there after one cycle"


@pytest.mark.parametrize("alarm_period_us", [1_000_000, 5_000_000])
def test_free_space_delivers_everything_on_time(alarm_period_us):
    """Every alarm arrives, none later than WCTT(NB_hop_max)."""
    for node_count in (100, 200, 300):
        for replication in range(7):
            plan = RunPlan(
                protocol="rtxp",
                channel="free-space",
                node_count=node_count,
                replication=replication,
                seed=100 + replication,
                alarm_period_us=alarm_period_us,
                alarms=200,
                settings=ProtocolSettings(rtxp=CFG),
            )
            result = run_single(plan)
            assert result.delivery_ratio == 1.0
            assert max(result.delays_us) <= result.bound_us
            assert result.late_fraction == 0.0


def test_no_retx_drops_unacknowledged_packets():
    """Without retransmissions a packet nobody decodes is dropped, not retried."""
    topo = Topology(positions=[(0, 0), (8, 0), (16, 0)])
    network = build_network(topo)
    sim, protocol = _protocol(network, retransmissions=False)
    protocol.install()
    protocol.inject(2)
    # cut node 2 off from its only lower neighbor
    protocol.network.lower[2] = ()
    sim.run_until(CFG.cycle_us)
    record = protocol.tracker.results()[0]
    assert record.status == PacketStatus.DROPPED
    assert record.reason == "no-ack"


def test_free_space_delivery_on_the_densest_deployment():
    """800 nodes share backoff slots within two hops; contention still leaves one copy per alarm."""
    for replication in range(2):
        plan = RunPlan(
            protocol="rtxp",
            channel="free-space",
            node_count=800,
            replication=replication,
            seed=100 + replication,
            alarm_period_us=1_000_000,
            alarms=40,
            settings=ProtocolSettings(rtxp=CFG),
        )
        result = run_single(plan)
        assert result.delivery_ratio == 1.0
        assert max(result.delays_us) <= result.bound_us
        assert result.duplicates == 0


def _recorded_run(node_count, seed, alarms=60):
    network, _ = generate_connected(node_count, RngStreams(seed))
    sim = Simulator()
    channel = Channel(network, FreeSpaceModel(network.topology.radio_range), keep_history=True)
    ledger = EnergyLedger(network.size, RadioParams())
    protocol = RtxpProtocol(sim, network, channel, ledger, CFG)
    for alarm in generate_traffic(1_000_000, alarms, network.topology, RngStreams(seed).stream("traffic")):
        sim.schedule_at(alarm.time_us, protocol.on_alarm, alarm.origin)
    protocol.install()
    horizon = alarms * 1_000_000 + 2 * protocol.bound_us
    sim.run_until(horizon)
    protocol.finalize(horizon)
    return network, channel, ledger, horizon


@pytest.mark.parametrize("node_count", [200, 800])
def test_one_data_frame_per_two_hop_neighborhood(node_count):
    """Data frames sharing an R slot come from senders more than two hops apart."""
    network, channel, _, _ = _recorded_run(node_count, 11)
    by_slot = {}
    for tx in channel.history:
        if tx.kind == TxKind.DATA:
            by_slot.setdefault(tx.start, []).append(tx.sender)
    assert by_slot
    for senders in by_slot.values():
        for i, s in enumerate(senders):
            assert not any(u in network.graph.two_hop[s] for u in senders[i + 1:])


def test_half_duplex():
    """A node never emits twice at once, and no receiver of a data frame emits while it lasts."""
    network, channel, ledger, horizon = _recorded_run(300, 12)
    own = {}
    for tx in channel.history:
        own.setdefault(tx.sender, []).append((tx.start, tx.end))
    for intervals in own.values():
        intervals.sort()
        assert all(a_end <= b_start for (_, a_end), (b_start, _) in zip(intervals, intervals[1:]))

    for tx in channel.history:
        if tx.kind != TxKind.DATA:
            continue
        for r in network.lower[tx.sender]:
            assert not any(a < tx.end and tx.start < b for a, b in own.get(r, []))
    assert (ledger.active_us() <= horizon).all()
