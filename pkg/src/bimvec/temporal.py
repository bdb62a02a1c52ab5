"""Per-time-step building graph snapshots and the temporal adjacency tensor.

The time axis is bucketed into fixed windows. In each window the latest
occupant fix resolves to AT edges against the containing / nearby grid
cells, the latest sensor reading per channel lands as a node attribute, and
comfort feedback is written as a one-hot attribute. Occupants with no fix
carry their last known cells forward for up to ``max_gap`` windows.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    EmptyTimelineError,
    SliceOutOfRangeError,
    UnknownNodeError,
)
from .graph import NodeId, PropertyGraph
from .space_grid import AT_LABEL, DiscretizedSpace, locate_cell

logger = logging.getLogger(__name__)

OCCUPANT_LABEL = "OCCUPANT"

FEEDBACK_ENCODING: dict[str, list[int]] = {
    "comfortable": [1, 0, 0],
    "uncomfortable": [0, 1, 0],
    "neutral": [0, 0, 1],
}


@dataclass(frozen=True)
class SensorReading:
    sensor_node: NodeId
    timestamp: int
    channel: str
    value: float

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")
        if not self.channel:
            raise ValueError("channel must be non-empty")


@dataclass(frozen=True)
class OccupantFix:
    occupant_node: NodeId
    timestamp: int
    space_node: NodeId
    position: tuple[float, float]
    feedback: str | None = None

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")
        if self.feedback is not None and self.feedback not in FEEDBACK_ENCODING:
            raise ValueError(f"unknown feedback value {self.feedback!r}")


@dataclass
class Snapshot:
    timestamp: int
    graph: PropertyGraph


@dataclass
class TemporalGraph:
    base: PropertyGraph
    snapshots: list[Snapshot]
    node_index: dict[NodeId, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.snapshots)


# ---------------------------------------------------------------------------
# Snapshot construction
# ---------------------------------------------------------------------------

@dataclass
class _OccupantState:
    cells: tuple[NodeId, ...]
    position: tuple[float, float]
    feedback: str | None
    windows_since_fix: int = 0


def build_snapshots(
    base: PropertyGraph,
    spaces: Sequence[DiscretizedSpace],
    readings: Sequence[SensorReading],
    fixes: Sequence[OccupantFix],
    step: int,
    occupant_radius: float | None = None,
    max_gap: int = 10,
) -> TemporalGraph:
    """Bucket readings and fixes into ``step``-second windows and build one
    snapshot per window spanning the data.

    ``occupant_radius`` defaults to each space's cell size. Records sharing
    a window are normalized by (timestamp, node id) and the latest wins.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if not readings and not fixes:
        raise EmptyTimelineError("no readings and no fixes")

    space_index = {space.space_node: space for space in spaces}
    for reading in readings:
        if reading.sensor_node not in base:
            raise UnknownNodeError(
                f"reading references missing sensor {reading.sensor_node!r}"
            )
    for fix in fixes:
        if fix.space_node not in space_index:
            raise UnknownNodeError(
                f"fix references space {fix.space_node!r} with no grid"
            )

    timestamps = [r.timestamp for r in readings] + [f.timestamp for f in fixes]
    t0 = min(timestamps)
    n_windows = (max(timestamps) - t0) // step + 1

    # Normalize by (timestamp, node id), then by the remaining fields so
    # construction is independent of input order even for exact duplicates.
    readings_by_window: dict[int, list[SensorReading]] = {}
    for reading in sorted(readings, key=lambda r: (
            r.timestamp, r.sensor_node, r.channel, r.value)):
        readings_by_window.setdefault((reading.timestamp - t0) // step, []).append(reading)
    fixes_by_window: dict[int, list[OccupantFix]] = {}
    for fix in sorted(fixes, key=lambda f: (
            f.timestamp, f.occupant_node, f.space_node, f.position,
            f.feedback or "")):
        fixes_by_window.setdefault((fix.timestamp - t0) // step, []).append(fix)

    snapshots: list[Snapshot] = []
    occupant_states: dict[NodeId, _OccupantState] = {}
    for window in range(n_windows):
        # Latest fix per occupant in this window replaces the carried state.
        window_fixes: dict[NodeId, OccupantFix] = {}
        for fix in fixes_by_window.get(window, []):
            window_fixes[fix.occupant_node] = fix
        for occupant, fix in window_fixes.items():
            space = space_index[fix.space_node]
            radius = occupant_radius if occupant_radius is not None else space.cell_size
            cells = _cells_near(space, fix.position, radius)
            if not cells:
                logger.warning(
                    "fix for %s at %s matched no cell; occupant absent this window",
                    occupant, fix.position,
                )
                occupant_states.pop(occupant, None)
                continue
            occupant_states[occupant] = _OccupantState(
                cells, fix.position, fix.feedback, windows_since_fix=0,
            )
        for occupant in list(occupant_states):
            if occupant not in window_fixes:
                state = occupant_states[occupant]
                state.windows_since_fix += 1
                if state.windows_since_fix > max_gap:
                    del occupant_states[occupant]

        graph = base.copy()
        for occupant in sorted(occupant_states):
            state = occupant_states[occupant]
            attributes: dict = {"x": state.position[0], "y": state.position[1]}
            if state.feedback is not None:
                attributes["feedback"] = list(FEEDBACK_ENCODING[state.feedback])
            graph.add_node(occupant, OCCUPANT_LABEL, attributes)
            for cell_id in state.cells:
                graph.add_edge(occupant, cell_id, AT_LABEL, 1.0)

        window_latest: dict[tuple[NodeId, str], float] = {}
        for reading in readings_by_window.get(window, []):
            window_latest[(reading.sensor_node, reading.channel)] = reading.value
        for (sensor, channel), value in window_latest.items():
            graph.set_node_attribute(sensor, channel, value)

        snapshots.append(Snapshot(t0 + window * step, graph))

    node_ids = sorted({nid for snap in snapshots for nid in snap.graph.node_ids()})
    node_index = {nid: i for i, nid in enumerate(node_ids)}
    return TemporalGraph(base, snapshots, node_index)


def _cells_near(
    space: DiscretizedSpace, position: tuple[float, float], radius: float
) -> tuple[NodeId, ...]:
    targets = {
        cell.id for cell in space.cells
        if math.dist(cell.center, position) <= radius + 1e-9
    }
    containing = locate_cell(space, position)
    if containing is not None:
        targets.add(containing.id)
    return tuple(sorted(targets))


# ---------------------------------------------------------------------------
# Tensor export
# ---------------------------------------------------------------------------

@dataclass
class TensorExport:
    """T x N x N weighted adjacency stack in coordinate form.

    ``records`` holds (t, i, j, weight) with i < j; each slice is symmetric
    with a zero diagonal by construction.
    """

    manifest: dict
    records: list[tuple[int, int, int, float]]

    def write_records_csv(self, fp) -> None:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["t", "i", "j", "w"])
        for record in self.records:
            writer.writerow([record[0], record[1], record[2], repr(record[3])])


def adjacency_tensor(tg: TemporalGraph) -> TensorExport:
    """Export every snapshot's weighted adjacency under the shared node
    ordering; parallel edges are summed into one coefficient."""
    if not tg.snapshots:
        raise ValueError("temporal graph has no snapshots")
    records: list[tuple[int, int, int, float]] = []
    for t, snapshot in enumerate(tg.snapshots):
        aggregated: dict[tuple[int, int], float] = {}
        for edge in snapshot.graph.edges():
            i, j = tg.node_index[edge.a], tg.node_index[edge.b]
            if i > j:
                i, j = j, i
            aggregated[(i, j)] = aggregated.get((i, j), 0.0) + edge.weight
        for (i, j), weight in sorted(aggregated.items()):
            records.append((t, i, j, weight))
    node_order = sorted(tg.node_index, key=tg.node_index.get)
    manifest = {
        "T": len(tg.snapshots),
        "N": len(tg.node_index),
        "node_index": node_order,
        "timestamps": [snap.timestamp for snap in tg.snapshots],
    }
    return TensorExport(manifest, records)


# ---------------------------------------------------------------------------
# Static projections
# ---------------------------------------------------------------------------

def flatten(tg: TemporalGraph, mode: str = "union",
            index: int | None = None) -> PropertyGraph:
    """Project the temporal graph to a static one.

    ``union`` keeps the base graph and adds every AT edge seen in any
    snapshot with weight = fraction of snapshots containing it; ``slice``
    returns snapshot ``index``'s graph unchanged.
    """
    if mode == "slice":
        if index is None or not (0 <= index < len(tg.snapshots)):
            raise SliceOutOfRangeError(
                f"slice {index} out of range for {len(tg.snapshots)} snapshots"
            )
        return tg.snapshots[index].graph.copy()
    if mode != "union":
        raise ValueError(f"unknown flatten mode {mode!r}")

    out = tg.base.copy()
    base_edges = {(e.a, e.b, e.label) for e in tg.base.edges()}
    appearance: dict[tuple[NodeId, NodeId, str], int] = {}
    node_attrs: dict[NodeId, tuple[str, dict]] = {}
    for snapshot in tg.snapshots:
        seen: set[tuple[NodeId, NodeId, str]] = set()
        for edge in snapshot.graph.edges():
            key = (edge.a, edge.b, edge.label)
            if key in base_edges or key in seen:
                continue
            seen.add(key)
            appearance[key] = appearance.get(key, 0) + 1
        for node in snapshot.graph.nodes():
            if node.id not in out:
                node_attrs[node.id] = (node.label, dict(node.attributes))
    for node_id in sorted(node_attrs):
        label, attributes = node_attrs[node_id]
        out.add_node(node_id, label, attributes)
    total = len(tg.snapshots)
    for (a, b, label) in sorted(appearance):
        out.add_edge(a, b, label, appearance[(a, b, label)] / total)
    return out


# ---------------------------------------------------------------------------
# CSV input
# ---------------------------------------------------------------------------

def sensor_node_id(sensor_id: str) -> NodeId:
    return f"sensor:{sensor_id}"


def occupant_node_id(occupant_id: str) -> NodeId:
    return f"occupant:{occupant_id}"


def load_readings_csv(path) -> list[SensorReading]:
    """Rows of ``timestamp,sensor_id,channel,value`` (header optional)."""
    readings = []
    for row in _data_rows(path, 4):
        readings.append(SensorReading(
            sensor_node_id(row[1]), int(row[0]), row[2], float(row[3]),
        ))
    return readings


def load_fixes_csv(path) -> list[OccupantFix]:
    """Rows of ``timestamp,occupant_id,space_id,x,y,feedback?``."""
    fixes = []
    for row in _data_rows(path, 5):
        feedback = row[5].strip() if len(row) > 5 and row[5].strip() else None
        fixes.append(OccupantFix(
            occupant_node_id(row[1]), int(row[0]), str(row[2]),
            (float(row[3]), float(row[4])), feedback,
        ))
    return fixes


def _data_rows(path, min_fields: int) -> Iterable[list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fp:
        for row_no, row in enumerate(csv.reader(fp), start=1):
            if not row or not any(cell.strip() for cell in row):
                continue
            if row_no == 1 and not row[0].strip().isdigit():
                continue  # header row
            if len(row) < min_fields:
                raise ValueError(f"row {row_no} has {len(row)} fields, "
                                 f"expected at least {min_fields}")
            yield [cell.strip() for cell in row]
