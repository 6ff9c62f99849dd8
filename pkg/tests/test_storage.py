"""
Tests for the storage functionality of rtxp_sim.
"""

import filecmp
import os
import tempfile

import numpy as np
import pandas as pd
import pytest

from rtxp_sim.core.config import RtxpConfig
from rtxp_sim.core.kernel import RngStreams
from rtxp_sim.core.topology import build_network, generate_connected
from rtxp_sim.core.vcs import compute_coordinates
from rtxp_sim.experiments.models import ExperimentSpec
from rtxp_sim.experiments.runner import run
from rtxp_sim.protocols.pedamacs import build_tree, check_schedule, compute_schedule
from rtxp_sim.storage.storage import Storage


@pytest.fixture
def temp_storage():
    """Create a temporary storage directory for testing."""
    with tempfile.TemporaryDirectory() as temp_dir:
        storage = Storage(data_dir=temp_dir)
        yield storage


@pytest.fixture(scope="module")
def network():
    network, _ = generate_connected(80, RngStreams(21))
    return network


def test_storage_creates_directories(temp_storage):
    """Topology and schedule folders exist after construction."""
    assert os.path.isdir(temp_storage.topologies_dir)
    assert os.path.isdir(temp_storage.schedules_dir)
    assert temp_storage.topology_path("a").endswith(os.path.join("topologies", "a.txt"))


def test_topology_round_trip(temp_storage, network):
    """Positions survive a dump and rebuild the same graph."""
    path = temp_storage.save_topology(network.topology, temp_storage.topology_path("n80"))
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0] == "80 50 50 10 0"
    assert len(lines) == 81
    assert lines[1].split()[0] == "0" and len(lines[1].split()) == 3

    loaded = temp_storage.load_topology(path)
    assert np.allclose(loaded.positions, network.topology.positions, atol=1e-9)
    assert loaded.area == (50.0, 50.0)
    assert loaded.radio_range == 10.0
    rebuilt = build_network(loaded)
    assert rebuilt.graph.adjacency == network.graph.adjacency
    assert temp_storage.list_topologies() == ["n80"]


def test_coordinate_dump(temp_storage, network):
    """One 'id ring offset coord' line per node, matching the computed coordinates."""
    cfg = RtxpConfig()
    vcs = compute_coordinates(network.graph, network.hops, 10.0, cfg.max_backoff_us // cfg.backoff_slot_us)
    path = temp_storage.save_coordinates(vcs, temp_storage.coordinates_path("n80"))
    frame = pd.read_csv(path, sep=" ", header=None, names=["id", "ring", "offset", "coord"])
    assert list(frame["id"]) == list(range(network.size))
    assert list(frame["ring"]) == [network.hops.ring[v] for v in range(network.size)]
    assert np.allclose(frame["coord"], [vcs[v].coord for v in range(network.size)])


def test_topology_count_mismatch(temp_storage):
    """A header announcing more nodes than listed is rejected."""
    path = os.path.join(temp_storage.data_dir, "short.txt")
    with open(path, "w", encoding="utf-8") as f:
        f.write("3 50 50 10 0\n0 0 0\n1 5 5\n")
    with pytest.raises(OSError):
        temp_storage.load_topology(path)


def test_schedule_round_trip(temp_storage, network):
    """A dumped schedule loads back and still checks clean."""
    tree = build_tree(network)
    schedule = compute_schedule(network, tree)
    path = temp_storage.save_schedule(schedule, temp_storage.schedule_path("n80"))
    loaded = temp_storage.load_schedule(path)
    assert loaded.links == schedule.links
    assert loaded.t_slot_us == schedule.t_slot_us
    assert check_schedule(loaded, network, tree) == []


def test_wrong_dump_kind(temp_storage, network):
    """A schedule file is not a topology."""
    schedule = compute_schedule(network, build_tree(network))
    path = temp_storage.save_schedule(schedule, temp_storage.schedule_path("x"))
    with pytest.raises(OSError):
        temp_storage.load_topology(path)


def test_missing_file(temp_storage):
    """Unreadable paths raise OSError naming the path."""
    with pytest.raises(OSError) as exc:
        temp_storage.load_topology(os.path.join(temp_storage.data_dir, "nope.txt"))
    assert "nope.txt" in str(exc.value)


def test_capacity_curve_dump(temp_storage):
    """Plot data: provenance, commented header, space separated rows."""
    path = os.path.join(temp_storage.data_dir, "curve.dat")
    temp_storage.save_capacity_curve([(1_000_000, 1), (6_000_000, 6)], path, ["note one"])
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0] == "# capacity-curve note one"
    assert lines[1] == "# wctt_s capacity"
    assert lines[2] == "1.000000 1"
    assert lines[3] == "6.000000 6"


def test_emit_is_byte_identical_on_rerun(temp_storage):
    """Running the same campaign twice writes identical files."""
    spec = ExperimentSpec(protocol="rtxp", node_counts=[60], replications=2, alarms=10, alarm_period_s=1.0, seed=3)
    first_dir = os.path.join(temp_storage.data_dir, "first")
    second_dir = os.path.join(temp_storage.data_dir, "second")
    first = temp_storage.emit(run(spec), first_dir, ("csv", "plot-data"))
    temp_storage.emit(run(spec), second_dir, ("csv", "plot-data"))

    names = sorted(os.path.basename(p) for p in first)
    assert names == ["delay.dat", "delivery.csv", "delivery.dat", "energy.dat", "packets.csv", "runs.csv", "spec.json"]
    match, mismatch, errors = filecmp.cmpfiles(first_dir, second_dir, names, shallow=False)
    assert mismatch == [] and errors == []

    with open(os.path.join(first_dir, "packets.csv"), encoding="utf-8") as f:
        assert f.readline().startswith("# spec {")
        header = f.readline().strip().split(",")
    assert header[:4] == ["node_count", "replication", "seed", "avg_neighbors"]
    assert "late" in header
