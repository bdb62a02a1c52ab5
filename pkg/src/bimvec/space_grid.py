"""Discretize space footprints into 2D structured cell grids.

A footprint polygon is overlaid with an axis-aligned grid anchored at the
bounding-box minimum corner; a cell is kept iff its center lies inside the
polygon (boundary counts as inside). Kept cells become CELL nodes and rook
neighbors become ADJACENT edges once merged into a property graph, and fixed
equipment (sensors, doors, windows) is wired to nearby cells with AT edges.
"""

from __future__ import annotations

import functools
import json
import logging
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import (
    InvalidPolygonError,
    NoCellInRangeError,
    UnknownNodeError,
)
from .graph import NodeId, PropertyGraph

logger = logging.getLogger(__name__)

Point = tuple[float, float]

_EPS = 1e-9

CELL_LABEL = "CELL"
ADJACENT_LABEL = "ADJACENT"
AT_LABEL = "AT"


# ---------------------------------------------------------------------------
# Footprints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Footprint:
    """Simple counter-clockwise polygon for one space, lengths in meters."""

    space_node: NodeId
    polygon: tuple[Point, ...]
    elevation: float = 0.0

    def __post_init__(self):
        polygon = tuple((float(x), float(y)) for x, y in self.polygon)
        object.__setattr__(self, "polygon", polygon)
        if len(polygon) < 3:
            raise InvalidPolygonError(
                f"footprint for {self.space_node!r} has fewer than 3 vertices"
            )
        if signed_area(polygon) <= 0:
            raise InvalidPolygonError(
                f"footprint for {self.space_node!r} must be counter-clockwise "
                "with positive area"
            )
        if _self_intersects(polygon):
            raise InvalidPolygonError(
                f"footprint for {self.space_node!r} is self-intersecting"
            )

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.polygon]
        ys = [p[1] for p in self.polygon]
        return min(xs), min(ys), max(xs), max(ys)

    @property
    def area(self) -> float:
        return signed_area(self.polygon)


def signed_area(polygon: Sequence[Point]) -> float:
    total = 0.0
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2.0


def _segments(polygon: Sequence[Point]):
    n = len(polygon)
    for i in range(n):
        yield polygon[i], polygon[(i + 1) % n]


def _self_intersects(polygon: Sequence[Point]) -> bool:
    segments = list(_segments(polygon))
    n = len(segments)
    for i in range(n):
        for j in range(i + 1, n):
            # Skip segments sharing a vertex (consecutive, or closing edge).
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(segments[i], segments[j]):
                return True
    return False


def _segments_cross(s1, s2) -> bool:
    (p1, p2), (p3, p4) = s1, s2
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and \
       ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(p3, p4, p1):
        return True
    if d2 == 0 and _on_segment(p3, p4, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, p3):
        return True
    if d4 == 0 and _on_segment(p1, p2, p4):
        return True
    return False


def _orient(a: Point, b: Point, c: Point) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a: Point, b: Point, p: Point) -> bool:
    return (min(a[0], b[0]) - _EPS <= p[0] <= max(a[0], b[0]) + _EPS and
            min(a[1], b[1]) - _EPS <= p[1] <= max(a[1], b[1]) + _EPS)


def point_in_polygon(point: Point, polygon: Sequence[Point]) -> bool:
    """Boundary-inclusive even-odd test."""
    x, y = point
    for a, b in _segments(polygon):
        if abs(_orient(a, b, point)) <= _EPS and _on_segment(a, b, point):
            return True
    inside = False
    for (x1, y1), (x2, y2) in _segments(polygon):
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridCell:
    id: NodeId
    space_node: NodeId
    row: int
    col: int
    center: Point


@dataclass(frozen=True)
class DiscretizedSpace:
    footprint: Footprint
    cell_size: float
    cells: tuple[GridCell, ...]
    adjacency: tuple[tuple[NodeId, NodeId], ...]
    origin: Point  # bounding-box minimum corner that anchors the grid

    @property
    def space_node(self) -> NodeId:
        return self.footprint.space_node

    def cell_at(self, row: int, col: int) -> GridCell | None:
        return self._by_rowcol.get((row, col))

    @functools.cached_property
    def _by_rowcol(self) -> dict[tuple[int, int], GridCell]:
        return {(c.row, c.col): c for c in self.cells}


def cell_node_id(space_node: NodeId, row: int, col: int) -> NodeId:
    return f"cell:{space_node}:{row}:{col}"


def discretize(footprint: Footprint, cell_size: float) -> DiscretizedSpace:
    """Overlay the grid and keep cells whose center is inside the polygon.

    Zero kept cells is allowed (flagged as a degenerate footprint when the
    polygon area is below one cell).
    """
    if not (cell_size > 0):
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    min_x, min_y, max_x, max_y = footprint.bounds
    if footprint.area < cell_size * cell_size:
        logger.warning(
            "degenerate footprint for %s: area %.3f below one %g m cell",
            footprint.space_node, footprint.area, cell_size,
        )
    n_cols = max(1, math.ceil((max_x - min_x) / cell_size - _EPS))
    n_rows = max(1, math.ceil((max_y - min_y) / cell_size - _EPS))

    cells: list[GridCell] = []
    for row in range(n_rows):
        for col in range(n_cols):
            center = (
                min_x + (col + 0.5) * cell_size,
                min_y + (row + 0.5) * cell_size,
            )
            if point_in_polygon(center, footprint.polygon):
                cells.append(GridCell(
                    cell_node_id(footprint.space_node, row, col),
                    footprint.space_node, row, col, center,
                ))

    kept = {(c.row, c.col): c for c in cells}
    adjacency: list[tuple[NodeId, NodeId]] = []
    for cell in cells:
        for d_row, d_col in ((1, 0), (0, 1)):
            other = kept.get((cell.row + d_row, cell.col + d_col))
            if other is not None:
                adjacency.append((cell.id, other.id))
    return DiscretizedSpace(
        footprint, float(cell_size), tuple(cells), tuple(adjacency),
        (min_x, min_y),
    )


def queen_adjacency(space: DiscretizedSpace) -> tuple[tuple[NodeId, NodeId], ...]:
    """8-neighbor adjacency variant; diagonals added to the rook pairs."""
    kept = {(c.row, c.col): c for c in space.cells}
    pairs = list(space.adjacency)
    for cell in space.cells:
        for d_row, d_col in ((1, 1), (1, -1)):
            other = kept.get((cell.row + d_row, cell.col + d_col))
            if other is not None:
                pairs.append((cell.id, other.id))
    return tuple(pairs)


def locate_cell(space: DiscretizedSpace, point: Point) -> GridCell | None:
    """Kept cell whose extent contains ``point``; shared borders resolve to
    the lower (row, col); None when the point falls in no kept cell."""
    min_x, min_y = space.origin
    col = _axis_index(point[0] - min_x, space.cell_size)
    row = _axis_index(point[1] - min_y, space.cell_size)
    if row is None or col is None:
        return None
    return space.cell_at(row, col)


def _axis_index(offset: float, cell_size: float) -> int | None:
    if offset < 0:
        return None
    t = offset / cell_size
    index = math.floor(t)
    # A point exactly on the border between index-1 and index belongs to
    # the lower cell.
    if index > 0 and t == index:
        index -= 1
    return index


def attach_fixed_node(
    graph: PropertyGraph,
    space: DiscretizedSpace,
    node: NodeId,
    position: Point,
    radius: float,
    strict: bool = False,
) -> PropertyGraph:
    """Add AT edges (weight 1.0) from ``node`` to every kept cell whose
    center lies within ``radius`` of ``position``, and always to the cell
    containing the position. Mutates and returns ``graph``."""
    if node not in graph:
        raise UnknownNodeError(f"no node {node!r} to attach")
    targets: dict[NodeId, GridCell] = {}
    for cell in space.cells:
        if math.dist(cell.center, position) <= radius + _EPS:
            targets[cell.id] = cell
    containing = locate_cell(space, position)
    if containing is not None:
        targets[containing.id] = containing
    if not targets:
        message = (
            f"no cell within {radius} m of {position} for node {node!r} "
            f"in space {space.space_node!r}"
        )
        if strict:
            raise NoCellInRangeError(message)
        logger.warning("%s; no edge added", message)
        return graph
    for cell_id in sorted(targets):
        if cell_id not in graph:
            raise UnknownNodeError(
                f"cell {cell_id!r} not merged into the graph yet"
            )
        graph.add_edge(node, cell_id, AT_LABEL, 1.0)
    return graph


# ---------------------------------------------------------------------------
# Graph merge / rebuild
# ---------------------------------------------------------------------------

def merge_into(graph: PropertyGraph, space: DiscretizedSpace,
               queen: bool = False) -> PropertyGraph:
    """Add the space's cells and adjacency to the graph.

    Grid parameters are recorded on the space node so the grid can be
    rebuilt from a serialized graph alone. Mutates and returns ``graph``.
    """
    if space.space_node not in graph:
        raise UnknownNodeError(f"space node {space.space_node!r} not in graph")
    graph.set_node_attribute(space.space_node, "grid_cell_size", space.cell_size)
    graph.set_node_attribute(space.space_node, "grid_origin",
                             [space.origin[0], space.origin[1]])
    graph.set_node_attribute(space.space_node, "footprint",
                             [[x, y] for x, y in space.footprint.polygon])
    graph.set_node_attribute(space.space_node, "elevation",
                             space.footprint.elevation)
    for cell in space.cells:
        graph.add_node(cell.id, CELL_LABEL, {
            "space": space.space_node,
            "row": cell.row,
            "col": cell.col,
            "cx": cell.center[0],
            "cy": cell.center[1],
        })
    pairs = queen_adjacency(space) if queen else space.adjacency
    for a, b in pairs:
        graph.add_edge(a, b, ADJACENT_LABEL, 1.0)
    return graph


def spaces_from_graph(graph: PropertyGraph) -> list[DiscretizedSpace]:
    """Rebuild discretized spaces from a graph produced via ``merge_into``."""
    spaces: list[DiscretizedSpace] = []
    cell_nodes: dict[NodeId, list] = {}
    for node in graph.nodes():
        if node.label == CELL_LABEL:
            cell_nodes.setdefault(node.attributes["space"], []).append(node)
    for node in graph.nodes():
        if "grid_cell_size" not in node.attributes:
            continue
        footprint = Footprint(
            node.id,
            tuple((x, y) for x, y in node.attributes["footprint"]),
            node.attributes.get("elevation", 0.0),
        )
        cells = tuple(sorted(
            (GridCell(c.id, node.id, c.attributes["row"], c.attributes["col"],
                      (c.attributes["cx"], c.attributes["cy"]))
             for c in cell_nodes.get(node.id, [])),
            key=lambda c: (c.row, c.col),
        ))
        ids = {c.id for c in cells}
        adjacency = tuple(
            (e.a, e.b) for e in graph.edges()
            if e.label == ADJACENT_LABEL and e.a in ids and e.b in ids
        )
        spaces.append(DiscretizedSpace(
            footprint, node.attributes["grid_cell_size"], cells, adjacency,
            tuple(node.attributes["grid_origin"]),
        ))
    return spaces


# ---------------------------------------------------------------------------
# Sidecar footprint file
# ---------------------------------------------------------------------------

def load_footprints(path) -> list[Footprint]:
    """Read the sidecar file: an array of {space_id, polygon, elevation}."""
    with open(path, "r", encoding="utf-8") as fp:
        records = json.load(fp)
    footprints = []
    for record in records:
        footprints.append(Footprint(
            str(record["space_id"]),
            tuple((x, y) for x, y in record["polygon"]),
            float(record.get("elevation", 0.0)),
        ))
    return footprints
