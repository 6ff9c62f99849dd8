"""
Tests for the rtxpsim command line.
"""

import json
import os
import tempfile

import pytest

from rtxp_sim.clients.cli import build_parser, main


@pytest.fixture
def data_dir():
    with tempfile.TemporaryDirectory() as temp_dir:
        yield temp_dir


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_analyze_json(capsys):
    """The closed forms at 1% duty cycle."""
    assert main(["analyze", "--duty-cycle", "0.01", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["d_awake_us"] == 23_800
    assert report["d_sleep_us"] == 2_356_200
    assert report["d_activity_us"] == 66_200
    assert report["wctt_rtxp_us"] == 14_534_400
    assert report["capacity"] == 36


def test_analyze_prints_discrepancies(capsys):
    assert main(["analyze", "--duty-cycle", "0.01"]) == 0
    out = capsys.readouterr().out
    assert "note: capacity per cycle: computed 36, quoted 100" in out


def test_invalid_duty_cycle_exits_with_two(capsys):
    assert main(["analyze", "--duty-cycle", "0"]) == 2
    assert "error:" in capsys.readouterr().err


def test_capacity_curve(data_dir, capsys):
    """Plot data file with one row per duty cycle step."""
    out = os.path.join(data_dir, "curve.dat")
    assert main(["--data-dir", data_dir, "capacity-curve", "--step", "10", "--out", out]) == 0
    with open(out, encoding="utf-8") as f:
        rows = [line for line in f if not line.startswith("#")]
    assert len(rows) == 10
    assert "quoted 15" in capsys.readouterr().out


def test_capacity_curve_bad_step(capsys):
    assert main(["capacity-curve", "--step", "0"]) == 2


def test_export_then_check_schedule(data_dir, capsys):
    """A dumped topology loads back into a clean schedule check."""
    topo = os.path.join(data_dir, "t.txt")
    sched = os.path.join(data_dir, "s.csv")
    assert main(["--data-dir", data_dir, "export-topology", "--nodes", "80", "--seed", "4", "--out", topo]) == 0
    assert os.path.exists(topo)
    assert os.path.exists(os.path.join(data_dir, "t.coords"))
    assert main(["--data-dir", data_dir, "check-schedule", "--topology", topo, "--dump", sched]) == 0
    assert "no violations" in capsys.readouterr().out
    assert main(["--data-dir", data_dir, "check-schedule", "--topology", topo, "--schedule", sched]) == 0


def test_check_schedule_with_the_receiver_guard(data_dir, capsys):
    """A ten-node line passes the default check but overruns the bound once receivers are guarded."""
    topo = os.path.join(data_dir, "line.txt")
    with open(topo, "w", encoding="utf-8") as f:
        f.write("10 80 10 10 0\n")
        f.writelines(f"{i} {8 * i} 0\n" for i in range(10))
    assert main(["--data-dir", data_dir, "check-schedule", "--topology", topo]) == 0
    assert "no violations" in capsys.readouterr().out
    assert main(["--data-dir", data_dir, "check-schedule", "--topology", topo, "--guard-receivers"]) == 1
    out = capsys.readouterr().out
    assert "length" in out and "interference" not in out


def test_run_writes_tables(data_dir, capsys):
    """A small campaign writes CSV and plot data into the output directory."""
    out_dir = os.path.join(data_dir, "campaign")
    code = main([
        "--data-dir", data_dir, "--log-level", "WARNING",
        "run", "--protocol", "rtxp", "--nodes", "60", "--replications", "2",
        "--alarms", "10", "--alarm-period", "1", "--seed", "3", "--out-dir", out_dir,
    ])
    assert code == 0
    for name in ("spec.json", "packets.csv", "runs.csv", "delivery.csv", "delay.dat", "delivery.dat", "energy.dat"):
        assert os.path.exists(os.path.join(out_dir, name))
    with open(os.path.join(out_dir, "spec.json"), encoding="utf-8") as f:
        spec = json.load(f)
    assert spec["node_counts"] == [60]
    assert spec["seed"] == 3
    assert "rtxp on free-space: 2 run(s)" in capsys.readouterr().out


def test_run_with_trace(data_dir):
    """The trace file gets one line per evaluated transmission."""
    trace = os.path.join(data_dir, "trace.txt")
    code = main([
        "--data-dir", data_dir, "--log-level", "WARNING",
        "run", "--protocol", "pedamacs", "--nodes", "60", "--replications", "1",
        "--alarms", "5", "--alarm-period", "1", "--workers", "1",
        "--out-dir", os.path.join(data_dir, "traced"), "--trace", trace,
    ])
    assert code == 0
    with open(trace, encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines
    time_us, sender, kind, receivers, outcome = lines[0].split()
    assert kind == "data"
    assert outcome in ("delivered", "lost")


def test_missing_config_exits_with_two(data_dir, capsys):
    assert main(["--data-dir", data_dir, "run", "--config", os.path.join(data_dir, "none.ini")]) == 2
    assert "error:" in capsys.readouterr().err
