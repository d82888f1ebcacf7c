import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hextripod import hexgeom


def test_flower_is_coronene(flower):
    # seven hexagons share 24 vertices; the six of the central hexagon are interior
    assert flower.n_vertices == 24
    assert int(flower.interior.sum()) == 6
    assert len(flower.boundary_edges) == 6
    assert flower.radius == pytest.approx(math.sqrt(7.0))


def test_interior_degree_three_and_symmetric_adjacency(disk10):
    for v in disk10.interior_vertices:
        assert len(disk10.neighbors[v]) == 3
        for w in disk10.neighbors[v]:
            assert v in disk10.neighbors[w]


def test_neighbours_at_unit_mesh_distance(disk10):
    for v in disk10.interior_vertices:
        for w in disk10.neighbors[v]:
            assert abs(disk10.point(v) - disk10.point(w)) == pytest.approx(disk10.delta)


def test_sublattice_directions(disk10):
    tau = np.exp(2j * np.pi / 3)
    for v in disk10.interior_vertices[:40]:
        steps = sorted(np.angle([(disk10.point(w) - disk10.point(v)) / disk10.delta
                                 for w in disk10.neighbors[v]]))
        base = 0.0 if disk10.case[v] == hexgeom.LEFT else np.pi / 3
        expected = sorted(np.angle([tau ** k * np.exp(1j * base) for k in range(3)]))
        assert np.allclose(steps, expected)


def test_boundary_cycle_is_counterclockwise(disk10):
    pts = disk10.coords[list(disk10.boundary_cycle)]
    assert hexgeom.signed_area(pts) > 0


@given(st.sampled_from([0.2, 0.1, 0.05]))
def test_boundary_close_to_circle(delta):
    dom = hexgeom.approximate_disk((0.0, 0.0), 1.0, delta)
    assert hexgeom.boundary_hausdorff_to_circle(dom) <= 2 * delta


def test_degenerate_disk():
    with pytest.raises(hexgeom.DegenerateDomainError):
        hexgeom.approximate_disk((0.0, 0.0), 1.0, 5.0)


@given(st.floats(0, 2 * math.pi - 0.01), st.floats(0.6, 2.5), st.floats(0.6, 2.5))
def test_marked_edges_ccw(a, da, db):
    dom = hexgeom.approximate_disk((0.0, 0.0), 1.0, 0.1)
    angles = (a, a + da, a + da + min(db, 2 * math.pi - da - 0.6))
    m = hexgeom.mark_boundary_edges(dom, angles)
    pos = dom.boundary_position()
    p = [pos[e[1]] for e in m.edges]
    assert len(set(p)) == 3
    assert hexgeom._ccw_order(p)


def test_marked_edge_collision(flower):
    # six boundary edges, 60 degrees apart: two close angles share one
    with pytest.raises(hexgeom.MarkedEdgeCollisionError):
        hexgeom.mark_boundary_edges(flower, (0.1, 0.2, 3.0))


def test_clockwise_marks_rejected(disk10):
    with pytest.raises(hexgeom.MarkedEdgeCollisionError):
        hexgeom.mark_boundary_edges(disk10, (0.0, 4.0, 2.0))


def test_dump_fields(disk10):
    m = hexgeom.mark_boundary_edges(disk10, (0.0, 2.0, 4.0))
    data = disk10.to_json(m)
    assert set(data) == {"delta", "vertices", "edges", "boundary_cycle", "marked"}
    assert set(data["marked"]) == {"e1", "e2", "e3"}
    assert len(data["vertices"]) == disk10.n_vertices


def test_nearest_interior_vertex_ties_lowest(flower):
    # the centre is equidistant from all six interior vertices
    assert hexgeom.nearest_interior_vertex(flower, 0j) == int(flower.interior_vertices.min())


def test_larger_flower_has_more_interior():
    assert hexgeom.build_flower(2).interior.sum() > hexgeom.build_flower(1).interior.sum()


def test_flower_marks_from_hexagon_midpoints(flower):
    m = hexgeom.mark_boundary_edges(flower, (math.pi / 6, 5 * math.pi / 6, 3 * math.pi / 2))
    pos = flower.boundary_position()
    p = [pos[e[1]] for e in m.edges]
    assert len(set(m.edges)) == 3 and hexgeom._ccw_order(p)


def test_near_coincident_angles_collide(flower):
    with pytest.raises(hexgeom.MarkedEdgeCollisionError, match="collision"):
        hexgeom.mark_boundary_edges(flower, (0.0, 1e-9, math.pi))


def test_fine_disk_marks_within_two_mesh(disk02):
    angles = (0.0, 2 * math.pi / 3, 4 * math.pi / 3)
    m = hexgeom.mark_boundary_edges(disk02, angles)
    for e, a in zip(m.edges, angles):
        assert abs(disk02.point(e[1]) - complex(math.cos(a), math.sin(a))) <= 2 * disk02.delta


def test_nearest_interior_vertex_examples(disk10):
    v = int(disk10.interior_vertices[17])
    assert hexgeom.nearest_interior_vertex(disk10, disk10.point(v)) == v
    far = hexgeom.nearest_interior_vertex(disk10, 50 + 0j)
    iv = disk10.interior_vertices
    assert disk10.point(far).real == pytest.approx(disk10.coords[iv, 0].max())


def test_adjacent_interior_vertices_alternate_case(disk10):
    for v in disk10.interior_vertices:
        for w in disk10.neighbors[v]:
            if disk10.interior[w]:
                assert disk10.case[v] != disk10.case[w]


def _area_ratio(delta):
    dom = hexgeom.approximate_disk((0.0, 0.0), 1.0, delta)
    return int(dom.interior.sum()) * dom.face_area() / math.pi


def test_dual_area_increases_toward_disk_area():
    ratios = [_area_ratio(d) for d in (0.1, 0.05, 0.02)]
    assert all(r <= 1 for r in ratios)
    assert ratios == sorted(ratios)


@pytest.mark.xfail(strict=True, reason="face inclusion loses a boundary layer of width ~delta: 0.929 at 0.02")
def test_dual_area_within_five_percent():
    assert _area_ratio(0.02) >= 0.95
