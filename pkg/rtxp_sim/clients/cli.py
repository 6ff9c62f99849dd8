#!/usr/bin/env python3
"""
Command line entry point: run campaigns, evaluate the closed forms and
inspect deployments and TDMA schedules.
"""

import argparse
import json
import os
import sys
from typing import List, Optional

import dotenv

# environment defaults are read when rtxp_sim.core.config is imported
dotenv.load_dotenv()

from rtxp_sim.core.analysis import capacity_curve, evaluate, reference_discrepancies
from rtxp_sim.core.config import (
    DEFAULT_SEED,
    LOG_LEVEL,
    ConfigError,
    PedamacsConfig,
    RtxpConfig,
    ensure_data_dir,
    get_data_dir,
)
from rtxp_sim.core.kernel import RngStreams
from rtxp_sim.core.topology import build_network, generate_connected
from rtxp_sim.core.vcs import compute_coordinates
from rtxp_sim.storage.storage import Storage
from rtxp_sim.utils.logging import setup_logging


def _storage(args) -> Storage:
    data_dir = args.data_dir or get_data_dir()
    os.environ["RTXP_SIM_DATA_DIR"] = data_dir
    ensure_data_dir()
    return Storage(data_dir)


def _deployment(args):
    """Network from --topology, else a fresh connected one from --nodes and --seed."""
    storage = _storage(args)
    if getattr(args, "topology", None):
        return build_network(storage.load_topology(args.topology))
    network, _ = generate_connected(args.nodes, RngStreams(args.seed))
    return network


def cmd_run(args) -> int:
    """Run a simulation campaign and write its tables."""
    from rtxp_sim.experiments.models import load_spec
    from rtxp_sim.experiments.runner import run

    spec = load_spec(
        args.config,
        protocol=args.protocol,
        channel=args.channel,
        alarm_period_s=args.alarm_period,
        node_counts=args.nodes,
        replications=args.replications,
        alarms=args.alarms,
        seed=args.seed,
        workers=args.workers,
    )
    storage = _storage(args)
    out_dir = args.out_dir or storage.run_dir(
        f"{spec.protocol}_{spec.channel}_p{spec.alarm_period_s:g}s_seed{spec.seed}"
    )
    report = run(spec, trace_path=args.trace)
    formats = ("csv", "plot-data") if args.format == "all" else (args.format,)
    written = storage.emit(report, out_dir, formats)

    summary = report.summary()
    print(f"{spec.protocol} on {spec.channel}: {summary['runs']} run(s)")
    print(f"  delivery min {summary['delivery_min']:.3f} avg {summary['delivery_avg']:.3f}")
    print(f"  max delay {summary['max_delay_us'] / 1e6:.3f} s, late fraction {summary['late_fraction']:.3f}")
    for path in written:
        print(f"  wrote {path}")
    return 0


def cmd_analyze(args) -> int:
    """Print every closed-form quantity for one parameter set."""
    cfg = RtxpConfig(duty_cycle=args.duty_cycle, data_us=args.data_us)
    report = evaluate(cfg, args.nb_hop_max, pedamacs=(args.nodes, args.t_slot_us))
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
        return 0
    for key, value in report.to_dict().items():
        print(f"{key:>20}: {value}")
    print()
    for note in reference_discrepancies(report):
        print(f"note: {note}")
    return 0


def cmd_capacity_curve(args) -> int:
    """Capacity against WCTT over a duty-cycle sweep."""
    if not 0 < args.step <= 100:
        raise ConfigError(f"--step must lie in (0, 100], got {args.step}")
    duty_cycles = []
    k = args.step
    while k <= 100 + 1e-9:
        duty_cycles.append(min(k, 100) / 100)
        k += args.step
    points = capacity_curve(duty_cycles, nb_hop_max=args.nb_hop_max)
    notes = reference_discrepancies(evaluate(RtxpConfig(), args.nb_hop_max))[-1:]
    if args.out:
        path = _storage(args).save_capacity_curve(points, args.out, notes)
        print(f"wrote {path}")
    else:
        for wctt, capacity in points:
            print(f"{wctt / 1e6:10.3f} s  {capacity}")
    for note in notes:
        print(f"note: {note}")
    return 0


def cmd_export_topology(args) -> int:
    """Generate a connected deployment and dump positions, rings and coordinates."""
    storage = _storage(args)
    network, attempt = generate_connected(args.nodes, RngStreams(args.seed))
    cfg = RtxpConfig()
    radio_range = network.topology.radio_range
    vcs = compute_coordinates(
        network.graph, network.hops, radio_range, cfg.max_backoff_us // cfg.backoff_slot_us
    )
    name = f"n{args.nodes}_seed{args.seed}"
    path = args.out or storage.topology_path(name)
    if args.coords:
        coords = args.coords
    elif args.out:
        coords = os.path.splitext(path)[0] + ".coords"
    else:
        coords = storage.coordinates_path(name)
    storage.save_topology(network.topology, path)
    storage.save_coordinates(vcs, coords)
    print(f"{args.nodes} nodes, attempt {attempt}, {network.hops.max_ring} rings, "
          f"{network.graph.avg_neighbors:.1f} neighbors on average, {vcs.slot_conflicts} slot conflict(s)")
    print(f"wrote {path} and {coords}")
    return 0


def cmd_check_schedule(args) -> int:
    """Verify a TDMA schedule; exits 1 on any violation."""
    from rtxp_sim.protocols.pedamacs import build_tree, check_schedule, compute_schedule

    network = _deployment(args)
    tree = build_tree(network)
    storage = _storage(args)
    if args.schedule:
        schedule = storage.load_schedule(args.schedule)
    else:
        schedule = compute_schedule(network, tree, guard_receivers=args.guard_receivers)
    if args.dump:
        print(f"wrote {storage.save_schedule(schedule, args.dump)}")

    violations = check_schedule(schedule, network, tree, args.guard_receivers)
    limit = 3 * (network.size - 1)
    print(f"{network.size} nodes, frame of {schedule.length} slots (bound {limit})")
    for v in violations:
        where = f" slot {v.slot}" if v.slot is not None else ""
        print(f"  {v.kind}{where}: {v.detail}")
    if violations:
        print(f"{len(violations)} violation(s)")
        return 1
    print("no violations")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="rtxp_sim - real-time WSN protocol simulator")
    parser.add_argument("--data-dir", help="output root (default: RTXP_SIM_DATA_DIR or ./_data)")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="logging level")
    parser.add_argument("--log-file", help="also log to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a simulation campaign")
    p.add_argument("--config", help="INI experiment file")
    p.add_argument("--protocol", choices=["rtxp", "rtxp-no-retx", "pedamacs", "xmac-gradient"])
    p.add_argument("--channel", choices=["free-space", "log-normal"])
    p.add_argument("--alarm-period", type=float, help="seconds between alarms")
    p.add_argument("--nodes", type=int, nargs="+", help="node counts of the ensembles")
    p.add_argument("--replications", type=int, help="topologies per node count")
    p.add_argument("--alarms", type=int, help="alarms per run")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--workers", type=int, help="parallel processes")
    p.add_argument("--out-dir", help="directory for the output tables")
    p.add_argument("--format", choices=["csv", "plot-data", "all"], default="all")
    p.add_argument("--trace", help="write a per-transmission trace to this file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="evaluate the closed-form delay, capacity and energy")
    p.add_argument("--duty-cycle", type=float, default=0.01)
    p.add_argument("--nb-hop-max", type=int, default=5)
    p.add_argument("--nodes", type=int, default=100, help="|V| for the TDMA bound")
    p.add_argument("--t-slot-us", type=int, default=PedamacsConfig().t_slot_us)
    p.add_argument("--data-us", type=int, default=RtxpConfig().data_us)
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("capacity-curve", help="capacity against WCTT over a duty-cycle sweep")
    p.add_argument("--step", type=float, default=1.0, help="duty-cycle step in percent")
    p.add_argument("--nb-hop-max", type=int, default=5)
    p.add_argument("--out", help="write plot data to this file")
    p.set_defaults(func=cmd_capacity_curve)

    p = sub.add_parser("export-topology", help="dump a deployment with its virtual coordinates")
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="dump path (default: <data-dir>/topologies/)")
    p.add_argument("--coords", help="coordinate dump path (default: next to the topology)")
    p.set_defaults(func=cmd_export_topology)

    p = sub.add_parser("check-schedule", help="verify a TDMA schedule")
    p.add_argument("--topology", help="topology dump to load")
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--schedule", help="schedule dump to check instead of computing one")
    p.add_argument("--dump", help="write the schedule to this file")
    p.add_argument(
        "--guard-receivers",
        action="store_true",
        help="also forbid a sender within two hops of another same-slot receiver",
    )
    p.set_defaults(func=cmd_check_schedule)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, log_file=args.log_file)
    try:
        return args.func(args)
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("\ninterrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
