"""Grid discretization tests with an independent point-in-polygon oracle."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bimvec.errors import InvalidPolygonError, NoCellInRangeError, UnknownNodeError
from bimvec.graph import PropertyGraph
from bimvec.space_grid import (
    DiscretizedSpace,
    Footprint,
    attach_fixed_node,
    discretize,
    load_footprints,
    locate_cell,
    merge_into,
    queen_adjacency,
    spaces_from_graph,
)

SQUARE_4 = Footprint("s", ((0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)))


def oracle_point_in_polygon(x, y, poly) -> bool:
    """Crossing-number oracle (independent reimplementation, tests only)."""
    for px, py in poly:
        if px == x and py == y:
            return True
    n = len(poly)
    for i in range(n):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if abs(cross) < 1e-12 and min(x1, x2) - 1e-12 <= x <= max(x1, x2) + 1e-12 \
                and min(y1, y2) - 1e-12 <= y <= max(y1, y2) + 1e-12:
            return True
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


# ---------------------------------------------------------------------------
# discretize
# ---------------------------------------------------------------------------

def test_square_4x4_cell_2():
    space = discretize(SQUARE_4, 2.0)
    centers = sorted(c.center for c in space.cells)
    assert centers == [(1.0, 1.0), (1.0, 3.0), (3.0, 1.0), (3.0, 3.0)]
    assert len(space.adjacency) == 4


def test_unit_square_boundary_center_kept():
    space = discretize(Footprint("s", ((0, 0), (1, 0), (1, 1), (0, 1))), 2.0)
    assert [(c.row, c.col) for c in space.cells] == [(0, 0)]
    assert space.adjacency == ()


def test_two_squares_sharing_an_edge():
    # union of [0,2]x[0,2] and [2,4]x[0,2]
    space = discretize(Footprint("s", ((0, 0), (4, 0), (4, 2), (0, 2))), 2.0)
    assert [(c.row, c.col) for c in space.cells] == [(0, 0), (0, 1)]
    assert len(space.adjacency) == 1


def test_l_shape_drops_outside_cell():
    polygon = ((0, 0), (4, 0), (4, 2), (2, 2), (2, 4), (0, 4))
    space = discretize(Footprint("s", polygon), 2.0)
    assert sorted((c.row, c.col) for c in space.cells) == [(0, 0), (0, 1), (1, 0)]
    assert len(space.adjacency) == 2


def test_degenerate_footprint_can_keep_zero_cells(caplog):
    tiny = Footprint("s", ((0, 0), (0.4, 0), (0, 0.4)))
    with caplog.at_level("WARNING"):
        space = discretize(tiny, 2.0)
    assert space.cells == ()
    assert any("degenerate" in r.message for r in caplog.records)


def test_invalid_polygons_rejected():
    with pytest.raises(InvalidPolygonError):
        Footprint("s", ((0, 0), (1, 0)))
    with pytest.raises(InvalidPolygonError):  # clockwise
        Footprint("s", ((0, 0), (0, 4), (4, 4), (4, 0)))
    with pytest.raises(InvalidPolygonError):  # bowtie
        Footprint("s", ((0, 0), (2, 2), (2, 0), (0, 2)))


def test_cell_size_must_be_positive():
    with pytest.raises(ValueError):
        discretize(SQUARE_4, 0.0)


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------

def test_kept_centers_pass_independent_oracle():
    polygon = ((0, 0), (4, 0), (4, 2), (2, 2), (2, 4), (0, 4))
    space = discretize(Footprint("s", polygon), 1.0)
    assert space.cells
    for cell in space.cells:
        assert oracle_point_in_polygon(cell.center[0], cell.center[1], polygon)


def test_cell_count_monotone_in_cell_size():
    counts = [len(discretize(SQUARE_4, size).cells) for size in (0.5, 1, 2, 4)]
    assert counts == sorted(counts, reverse=True)
    assert counts == [64, 16, 4, 1]


def test_locate_center_returns_cell():
    for size in (0.5, 1.0, 2.0):
        space = discretize(SQUARE_4, size)
        for cell in space.cells:
            assert locate_cell(space, cell.center) == cell


def test_adjacency_symmetric_irreflexive_rook():
    space = discretize(SQUARE_4, 1.0)
    by_id = {c.id: c for c in space.cells}
    seen = set()
    for a, b in space.adjacency:
        assert a != b
        assert frozenset((a, b)) not in seen  # each unordered pair once
        seen.add(frozenset((a, b)))
        ca, cb = by_id[a], by_id[b]
        assert abs(ca.row - cb.row) + abs(ca.col - cb.col) == 1


def test_queen_adjacency_adds_diagonals():
    space = discretize(SQUARE_4, 2.0)
    assert len(queen_adjacency(space)) == 4 + 2


# ---------------------------------------------------------------------------
# locate_cell
# ---------------------------------------------------------------------------

def test_locate_simple_point():
    space = discretize(SQUARE_4, 2.0)
    cell = locate_cell(space, (0.5, 0.5))
    assert (cell.row, cell.col) == (0, 0)


def test_locate_border_resolves_to_lower_index():
    space = discretize(SQUARE_4, 2.0)
    cell = locate_cell(space, (2.0, 1.0))
    assert (cell.row, cell.col) == (0, 0)


def test_locate_outside_footprint_is_none():
    space = discretize(SQUARE_4, 2.0)
    assert locate_cell(space, (9.0, 9.0)) is None


# ---------------------------------------------------------------------------
# attach_fixed_node
# ---------------------------------------------------------------------------

def _merged(space: DiscretizedSpace) -> PropertyGraph:
    graph = PropertyGraph()
    graph.add_node(space.space_node, "IFCSPACE")
    merge_into(graph, space)
    graph.add_node("sensor:x", "SENSOR")
    return graph


def test_attach_radius_zero_hits_containing_cell():
    space = discretize(SQUARE_4, 2.0)
    graph = _merged(space)
    attach_fixed_node(graph, space, "sensor:x", (1.0, 1.0), 0.0)
    at = [e for e in graph.edges() if e.label == "AT"]
    assert [(e.a, e.b) for e in at] == [("cell:s:0:0", "sensor:x")]


def test_attach_center_radius_covers_four_cells():
    space = discretize(SQUARE_4, 2.0)
    graph = _merged(space)
    attach_fixed_node(graph, space, "sensor:x", (2.0, 2.0), 1.5)
    at = [e for e in graph.edges() if e.label == "AT"]
    assert len(at) == 4
    assert all(math.dist((2.0, 2.0), (1.0, 1.0)) <= 1.5 for _ in at)


def test_attach_out_of_range_lenient_and_strict():
    space = discretize(SQUARE_4, 2.0)
    graph = _merged(space)
    attach_fixed_node(graph, space, "sensor:x", (10.0, 10.0), 0.5)
    assert not [e for e in graph.edges() if e.label == "AT"]
    with pytest.raises(NoCellInRangeError):
        attach_fixed_node(graph, space, "sensor:x", (10.0, 10.0), 0.5,
                          strict=True)


def test_attach_unknown_node_rejected():
    space = discretize(SQUARE_4, 2.0)
    graph = _merged(space)
    with pytest.raises(UnknownNodeError):
        attach_fixed_node(graph, space, "sensor:missing", (1.0, 1.0), 1.0)


# ---------------------------------------------------------------------------
# merge / rebuild round trip
# ---------------------------------------------------------------------------

def test_merge_and_rebuild_round_trip():
    space = discretize(SQUARE_4, 2.0)
    graph = PropertyGraph()
    graph.add_node("s", "IFCSPACE")
    merge_into(graph, space)
    rebuilt = spaces_from_graph(PropertyGraph.from_text(graph.to_text()))
    assert len(rebuilt) == 1
    again = rebuilt[0]
    assert again.cell_size == space.cell_size
    assert again.origin == space.origin
    assert again.footprint.polygon == space.footprint.polygon
    assert [(c.id, c.row, c.col, c.center) for c in again.cells] == \
        [(c.id, c.row, c.col, c.center) for c in space.cells]
    assert set(map(frozenset, again.adjacency)) == \
        set(map(frozenset, space.adjacency))


def test_load_footprints_sidecar(data_dir):
    footprints = load_footprints(data_dir / "two_space.footprints.json")
    assert [f.space_node for f in footprints] == ["5", "7"]
    assert footprints[0].polygon[1] == (6.0, 0.0)


# ---------------------------------------------------------------------------
# property: every kept center round-trips through locate_cell
# ---------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(
    width=st.floats(min_value=0.5, max_value=12),
    height=st.floats(min_value=0.5, max_value=12),
    x0=st.floats(min_value=-5, max_value=5),
    y0=st.floats(min_value=-5, max_value=5),
    cell_size=st.floats(min_value=0.25, max_value=3),
)
def test_locate_center_property(width, height, x0, y0, cell_size):
    footprint = Footprint("s", (
        (x0, y0), (x0 + width, y0), (x0 + width, y0 + height), (x0, y0 + height),
    ))
    space = discretize(footprint, cell_size)
    for cell in space.cells:
        assert locate_cell(space, cell.center) == cell
        assert oracle_point_in_polygon(cell.center[0], cell.center[1],
                                       footprint.polygon)
