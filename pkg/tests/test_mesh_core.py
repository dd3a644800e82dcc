import math

import numpy as np
import pytest

from harmcanon.core_types.mesh import TriangleMesh
from harmcanon.exceptions import GeometryError, MeshFormatError, TopologyError
from harmcanon.generators import generate_flat_torus, generate_genus2
from harmcanon.mesh_core import (
    face_geometry,
    normalize_area,
    scale_mesh,
    topology,
    triangle_geometry,
    vertex_angle_sums,
)

from .mocks import TETRAHEDRON_FACES, TETRAHEDRON_VERTICES, equilateral_tetrahedron_mesh, tetrahedron_mesh


def test_tetrahedron_counts_and_genus():
    mesh = tetrahedron_mesh()
    topo = topology(mesh)
    assert (topo.vertex_count, topo.edge_count, topo.face_count) == (4, 6, 4)
    assert topo.euler_characteristic == 2
    assert topo.genus == 0
    assert topo.betti1 == 0


def test_flat_torus_topology():
    topo = topology(generate_flat_torus(8))
    assert topo.genus == 1
    assert topo.betti1 == 2


def test_genus2_topology():
    assert topology(generate_genus2(1)).betti1 == 4


def test_boundary_edge_is_rejected():
    with pytest.raises(TopologyError):
        TriangleMesh.from_positions(TETRAHEDRON_VERTICES, TETRAHEDRON_FACES[:3])


def test_inconsistent_orientation_is_rejected():
    faces = list(TETRAHEDRON_FACES)
    faces[3] = (1, 2, 3)
    with pytest.raises(TopologyError):
        TriangleMesh.from_positions(TETRAHEDRON_VERTICES, faces)


def test_disconnected_mesh_is_rejected():
    vertices = np.vstack([TETRAHEDRON_VERTICES, TETRAHEDRON_VERTICES + 10.0])
    faces = list(TETRAHEDRON_FACES) + [tuple(v + 4 for v in face) for face in TETRAHEDRON_FACES]
    with pytest.raises(TopologyError):
        TriangleMesh.from_positions(vertices, faces)


def test_pinched_vertex_is_rejected():
    # two tetrahedra sharing vertex 0 only
    vertices = np.vstack([TETRAHEDRON_VERTICES, TETRAHEDRON_VERTICES[1:] + 10.0])
    relabel = {0: 0, 1: 4, 2: 5, 3: 6}
    faces = list(TETRAHEDRON_FACES) + [tuple(relabel[v] for v in face) for face in TETRAHEDRON_FACES]
    with pytest.raises(TopologyError):
        TriangleMesh.from_positions(vertices, faces)


def test_triangle_inequality_violation_is_rejected():
    lengths = {(i, j): 1.0 for i in range(4) for j in range(i + 1, 4)}
    lengths[(0, 1)] = 2.5
    with pytest.raises(GeometryError):
        TriangleMesh.from_edge_lengths(TETRAHEDRON_FACES, lengths)


def test_zero_length_edge_is_rejected():
    lengths = {(i, j): 1.0 for i in range(4) for j in range(i + 1, 4)}
    lengths[(2, 3)] = 0.0
    with pytest.raises(GeometryError):
        TriangleMesh.from_edge_lengths(TETRAHEDRON_FACES, lengths)


def test_missing_edge_length_is_a_format_error():
    lengths = {(i, j): 1.0 for i in range(4) for j in range(i + 1, 4)}
    del lengths[(0, 2)]
    with pytest.raises(MeshFormatError):
        TriangleMesh.from_edge_lengths(TETRAHEDRON_FACES, lengths)


def test_triangle_geometry_equilateral():
    area, angles = triangle_geometry(1.0, 1.0, 1.0)
    assert area == pytest.approx(math.sqrt(3) / 4, abs=1e-15)
    assert angles == pytest.approx((math.pi / 3,) * 3, abs=1e-14)


def test_triangle_geometry_right_triangle():
    area, angles = triangle_geometry(3.0, 4.0, 5.0)
    assert area == pytest.approx(6.0, abs=1e-12)
    assert angles[2] == pytest.approx(math.pi / 2, abs=1e-14)
    assert sum(angles) == pytest.approx(math.pi, abs=1e-12)


def test_triangle_geometry_degenerate():
    with pytest.raises(GeometryError):
        triangle_geometry(1.0, 1.0, 2.5)


def test_face_angles_sum_to_pi():
    geometry = face_geometry(generate_genus2(1))
    np.testing.assert_allclose(geometry.angles.sum(axis=1), math.pi, atol=1e-12)


def test_normalize_area_halves_lengths_of_area_four_mesh():
    mesh = equilateral_tetrahedron_mesh(1.0)
    big = scale_mesh(mesh, 2.0 / math.sqrt(mesh.total_area))
    assert big.total_area == pytest.approx(4.0, rel=1e-14)
    normalized = normalize_area(big)
    np.testing.assert_allclose(normalized.edge_lengths, big.edge_lengths / 2.0, rtol=1e-14)
    assert normalized.total_area == pytest.approx(1.0, abs=1e-14)


def test_normalize_area_leaves_unit_area_lengths_bitwise():
    mesh = normalize_area(equilateral_tetrahedron_mesh(3.0))
    assert np.array_equal(normalize_area(mesh).edge_lengths, mesh.edge_lengths)


def test_normalize_area_is_idempotent():
    once = normalize_area(generate_genus2(1))
    twice = normalize_area(once)
    np.testing.assert_allclose(twice.edge_lengths, once.edge_lengths, rtol=1e-15)


def test_scaling_does_not_touch_shape():
    mesh = generate_flat_torus(4)
    scaled = scale_mesh(mesh, 3.7)
    assert np.array_equal(scaled.shape_lengths, mesh.shape_lengths)
    np.testing.assert_allclose(scaled.edge_lengths, 3.7 * mesh.edge_lengths, rtol=1e-15)


def test_scale_mesh_rejects_non_positive_factor():
    with pytest.raises(GeometryError):
        scale_mesh(generate_flat_torus(3), 0.0)


def test_vertex_angle_sums_of_flat_torus():
    np.testing.assert_allclose(vertex_angle_sums(generate_flat_torus(5)), 2.0 * math.pi, atol=1e-12)


def test_mesh_dict_round_trip_keeps_lengths():
    mesh = generate_genus2(1)
    restored = TriangleMesh.from_dict(mesh.to_dict())
    assert np.array_equal(restored.faces, mesh.faces)
    assert np.array_equal(restored.edge_lengths, mesh.edge_lengths)


def test_multi_edge_mesh_has_no_pair_lengths():
    mesh = generate_flat_torus(2)
    assert not mesh.is_simplicial
    with pytest.raises(MeshFormatError):
        mesh.edge_length_map()
