import json
import logging
import os
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import pandas as pd

from rtxp_sim.core.config import get_data_dir
from rtxp_sim.core.topology import Topology
from rtxp_sim.core.vcs import VirtualCoordinates

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"
POSITION_FORMAT = "%.12g"


class Storage:
    def __init__(self, data_dir: str = None):
        self.data_dir = data_dir or get_data_dir()
        self.topologies_dir = os.path.join(self.data_dir, "topologies")
        self.schedules_dir = os.path.join(self.data_dir, "schedules")

        # create directories if they don't exist
        for directory in [self.data_dir, self.topologies_dir, self.schedules_dir]:
            self._mkdir(directory)

    @staticmethod
    def _mkdir(directory: str) -> None:
        try:
            Path(directory).mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OSError(f"cannot create directory {directory}: {e}") from e

    def run_dir(self, name: str) -> str:
        """Directory holding one campaign's outputs."""
        path = os.path.join(self.data_dir, name)
        self._mkdir(path)
        return path

    def topology_path(self, name: str) -> str:
        return os.path.join(self.topologies_dir, f"{name}.txt")

    def coordinates_path(self, name: str) -> str:
        return os.path.join(self.topologies_dir, f"{name}.coords")

    def schedule_path(self, name: str) -> str:
        return os.path.join(self.schedules_dir, f"{name}.csv")

    def list_topologies(self) -> List[str]:
        return sorted(f[:-4] for f in os.listdir(self.topologies_dir) if f.endswith(".txt"))

    # tables

    def write_table(
        self,
        frame: pd.DataFrame,
        path: str,
        provenance: str,
        plot_data: bool = False,
        float_format: str = FLOAT_FORMAT,
    ) -> str:
        """
        Write a table behind a '#' provenance line.

        CSV uses commas and a header row; plot data uses single spaces and
        puts the column names in a second comment line.
        """
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(f"# {provenance}\n")
                if plot_data:
                    f.write("# " + " ".join(str(c) for c in frame.columns) + "\n")
                    frame.to_csv(
                        f, sep=" ", header=False, index=False, float_format=float_format, lineterminator="\n"
                    )
                else:
                    frame.to_csv(f, index=False, float_format=float_format, lineterminator="\n")
        except OSError as e:
            raise OSError(f"cannot write {path}: {e}") from e
        logger.debug(f"wrote {len(frame)} rows to {path}")
        return path

    def read_table(self, path: str) -> Tuple[Dict[str, object], pd.DataFrame]:
        """Read a table written by write_table; returns (header metadata, frame)."""
        try:
            with open(path, "r", encoding="utf-8") as f:
                first = f.readline()
            frame = pd.read_csv(path, comment="#")
        except (OSError, pd.errors.ParserError) as e:
            raise OSError(f"cannot read {path}: {e}") from e
        meta: Dict[str, object] = {}
        label, _, payload = first.lstrip("# ").partition(" ")
        if payload.strip().startswith("{"):
            meta = json.loads(payload)
        meta["kind"] = label.strip()
        return meta, frame

    def emit(self, report, out_dir: str, formats: Sequence[str] = ("csv", "plot-data")) -> List[str]:
        """
        Write a campaign report.

        csv: packets.csv, runs.csv, delivery.csv.
        plot-data: delay.dat, delivery.dat, energy.dat.
        spec.json is always written.
        """
        self._mkdir(out_dir)
        spec_json = report.spec.model_dump_json()
        provenance = f"spec {spec_json}"
        written = [self.write_json(os.path.join(out_dir, "spec.json"), json.loads(spec_json))]
        if "csv" in formats:
            written.append(self.write_table(report.packets(), os.path.join(out_dir, "packets.csv"), provenance))
            written.append(self.write_table(report.runs(), os.path.join(out_dir, "runs.csv"), provenance))
            written.append(self.write_table(report.delivery(), os.path.join(out_dir, "delivery.csv"), provenance))
        if "plot-data" in formats:
            for name, frame in (
                ("delay.dat", report.delay_plot()),
                ("delivery.dat", report.delivery_plot()),
                ("energy.dat", report.energy_plot()),
            ):
                written.append(self.write_table(frame, os.path.join(out_dir, name), provenance, plot_data=True))
        return written

    def write_json(self, path: str, data: Dict[str, object]) -> str:
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                json.dump(data, f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise OSError(f"cannot write {path}: {e}") from e
        return path

    # dumps

    def save_topology(self, topology: Topology, path: str) -> str:
        """
        Plain-text deployment: a 'count width height range sink' header line,
        then one 'id x y' line per node.
        """
        width, height = topology.area
        frame = pd.DataFrame(
            {"id": range(topology.count), "x": topology.positions[:, 0], "y": topology.positions[:, 1]}
        )
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(f"{topology.count} {width:g} {height:g} {topology.radio_range:g} {topology.sink}\n")
                frame.to_csv(f, sep=" ", header=False, index=False, float_format=POSITION_FORMAT, lineterminator="\n")
        except OSError as e:
            raise OSError(f"cannot write {path}: {e}") from e
        logger.debug(f"wrote {topology.count} positions to {path}")
        return path

    def load_topology(self, path: str) -> Topology:
        try:
            with open(path, "r", encoding="utf-8") as f:
                header = f.readline().split()
                frame = pd.read_csv(f, sep=" ", header=None, names=["id", "x", "y"])
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise OSError(f"cannot read {path}: {e}") from e
        try:
            count, width, height, radio_range, sink = header
            count, sink = int(count), int(sink)
            area = (float(width), float(height))
            radio_range = float(radio_range)
        except ValueError as e:
            raise OSError(f"{path} is not a topology dump: bad header {header}") from e
        if len(frame) != count or frame["id"].tolist() != list(range(count)):
            raise OSError(f"{path} is not a topology dump: expected ids 0..{count - 1}")
        return Topology(
            positions=frame[["x", "y"]].to_numpy(dtype=float), sink=sink, area=area, radio_range=radio_range
        )

    def save_coordinates(self, coordinates: VirtualCoordinates, path: str) -> str:
        """One 'id ring offset coord' line per node, the sink included."""
        nodes = sorted(coordinates.coordinates)
        frame = pd.DataFrame(
            {
                "id": nodes,
                "ring": [coordinates[v].ring for v in nodes],
                "offset": [coordinates[v].offset for v in nodes],
                "coord": [coordinates[v].coord for v in nodes],
            }
        )
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                frame.to_csv(f, sep=" ", header=False, index=False, float_format=POSITION_FORMAT, lineterminator="\n")
        except OSError as e:
            raise OSError(f"cannot write {path}: {e}") from e
        return path

    def save_schedule(self, schedule, path: str) -> str:
        frame = pd.DataFrame(schedule.to_records(), columns=["slot", "sender", "receiver", "origin", "hop"])
        meta = {"t_slot_us": schedule.t_slot_us, "length": schedule.length}
        return self.write_table(frame, path, f"schedule {json.dumps(meta, sort_keys=True)}")

    def load_schedule(self, path: str):
        from rtxp_sim.protocols.pedamacs import TdmaSchedule

        meta, frame = self.read_table(path)
        if meta.get("kind") != "schedule":
            raise OSError(f"{path} is not a schedule dump")
        return TdmaSchedule.from_records(frame.to_dict("records"), int(meta["t_slot_us"]))

    def save_capacity_curve(self, points: Sequence[Tuple[int, int]], path: str, notes: Sequence[str] = ()) -> str:
        frame = pd.DataFrame(
            [(wctt / 1e6, capacity) for wctt, capacity in points], columns=["wctt_s", "capacity"]
        )
        provenance = "capacity-curve " + "; ".join(notes) if notes else "capacity-curve"
        return self.write_table(frame, path, provenance, plot_data=True)
