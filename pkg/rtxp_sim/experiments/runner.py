"""
Campaign runner: one isolated simulation per (node count, replication).
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

from rtxp_sim.core.config import ProtocolSettings
from rtxp_sim.core.kernel import RngStreams, Simulator
from rtxp_sim.core.topology import DEFAULT_AREA, generate_connected
from rtxp_sim.experiments.metrics import MetricsReport, RunResult
from rtxp_sim.experiments.models import ExperimentSpec
from rtxp_sim.experiments.traffic import generate_traffic
from rtxp_sim.protocols.base import create_protocol
from rtxp_sim.radio.channel import Channel
from rtxp_sim.radio.energy import EnergyLedger
from rtxp_sim.radio.propagation import create_propagation
from rtxp_sim.utils.logging import disable_transmission_trace, enable_transmission_trace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunPlan:
    protocol: str
    channel: str
    node_count: int
    replication: int
    seed: int
    alarm_period_us: int
    alarms: int
    settings: ProtocolSettings = ProtocolSettings()
    area: Tuple[float, float] = DEFAULT_AREA
    trace_path: Optional[str] = None


def plan_runs(spec: ExperimentSpec, trace_path: Optional[str] = None) -> List[RunPlan]:
    """Replication r of every size uses seed spec.seed + r, whatever the protocol."""
    settings = spec.settings()
    return [
        RunPlan(
            protocol=spec.protocol,
            channel=spec.channel,
            node_count=size,
            replication=rep,
            seed=spec.seed + rep,
            alarm_period_us=spec.alarm_period_us,
            alarms=spec.alarms,
            settings=settings,
            area=spec.area,
            trace_path=trace_path,
        )
        for size in spec.node_counts
        for rep in range(spec.replications)
    ]


def run_single(plan: RunPlan) -> RunResult:
    """Build the deployment, install the protocol, inject the alarms and run to the horizon."""
    streams = RngStreams(plan.seed)
    radio = plan.settings.radio
    network, attempt = generate_connected(plan.node_count, streams, plan.area, radio.radio_range)

    sim = Simulator()
    channel = Channel(network, create_propagation(plan.channel, radio), rng=streams.stream("shadowing"))
    ledger = EnergyLedger(network.size, radio)
    protocol = create_protocol(
        plan.protocol, sim, network, channel, ledger, plan.settings, rng=streams.stream("csma-backoff")
    )

    traffic = generate_traffic(plan.alarm_period_us, plan.alarms, network.topology, streams.stream("traffic"))
    for alarm in traffic:
        sim.schedule_at(alarm.time_us, protocol.on_alarm, alarm.origin)
    protocol.install()
    horizon = traffic[-1].time_us + 2 * protocol.bound_us

    handler = enable_transmission_trace(plan.trace_path) if plan.trace_path else None
    try:
        sim.run_until(horizon)
    finally:
        if handler is not None:
            disable_transmission_trace(handler)
    protocol.finalize(horizon)

    vcs = getattr(protocol, "vcs", None)
    schedule = getattr(protocol, "schedule", None)
    result = RunResult(
        protocol=plan.protocol,
        channel=plan.channel,
        node_count=plan.node_count,
        replication=plan.replication,
        seed=plan.seed,
        topology_attempt=attempt,
        avg_neighbors=network.graph.avg_neighbors,
        nb_hop_max=network.hops.max_ring,
        bound_us=protocol.bound_us,
        horizon_us=horizon,
        packets=protocol.tracker.results(),
        energy_j=ledger.energy_j(),
        trace_digest=sim.trace_digest,
        duplicates=protocol.tracker.duplicates,
        vcs_conflicts=vcs.slot_conflicts if vcs is not None else None,
        frame_slots=schedule.length if schedule is not None else None,
        stats=dict(getattr(protocol, "stats", {})),
    )
    logger.info(
        f"{plan.protocol}/{plan.channel} n={plan.node_count} rep={plan.replication}: "
        f"delivery {result.delivery_ratio:.3f}, late {result.late_fraction:.3f}, "
        f"{sim.dispatched} events"
    )
    return result


def run(spec: ExperimentSpec, trace_path: Optional[str] = None) -> MetricsReport:
    """Run the whole campaign, in parallel when spec.workers > 1."""
    parallel = spec.workers > 1 and spec.replications * len(spec.node_counts) > 1
    if parallel and trace_path:
        logger.warning("transmission trace needs a single worker; ignoring it")
        trace_path = None
    if trace_path:
        open(trace_path, "w", encoding="utf-8").close()
    plans = plan_runs(spec, trace_path)
    logger.info(f"running {len(plans)} simulation(s) of {spec.protocol} on {spec.channel}")
    if parallel:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(run_single, plans))
    else:
        results = [run_single(plan) for plan in plans]
    return MetricsReport(spec, results)
