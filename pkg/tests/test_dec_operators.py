import math

import numpy as np
import pytest

from harmcanon.core_types.forms import DiscreteForm
from harmcanon.dec_operators import (
    build_operators,
    codifferential1,
    cotan_weights,
    d0,
    d1,
    inner_product_0,
    inner_product_1,
    laplacian0,
    star0,
    star1,
    star2,
)
from harmcanon.exceptions import DimensionMismatch
from harmcanon.generators import generate_flat_torus, generate_genus2
from harmcanon.invariants import rescaled_mesh
from harmcanon.mesh_core import normalize_area, scale_mesh

from .mocks import equilateral_tetrahedron_mesh, random_potential, torus_coordinate_form


@pytest.fixture
def torus():
    return generate_flat_torus(8)


@pytest.fixture
def genus2():
    return normalize_area(generate_genus2(1))


def test_d0_of_constant_is_zero(genus2):
    assert np.all(d0(genus2) @ np.ones(genus2.vertex_count) == 0.0)


def test_d0_of_vertex_indicator(genus2):
    e = 5
    low, high = genus2.edges[e]
    u = np.zeros(genus2.vertex_count)
    u[high] = 1.0
    assert (d0(genus2) @ u)[e] == 1.0
    u[:] = 0.0
    u[low] = 1.0
    assert (d0(genus2) @ u)[e] == -1.0


def test_d1_rows_follow_face_orientation(genus2):
    row = d1(genus2)[0].toarray().ravel()
    for k in range(3):
        assert row[genus2.face_edges[0, k]] == genus2.face_edge_signs[0, k]


@pytest.mark.parametrize("mesh_factory", [lambda: generate_flat_torus(2), lambda: generate_flat_torus(5), lambda: generate_genus2(1)])
def test_d1_d0_is_exactly_zero(mesh_factory):
    mesh = mesh_factory()
    product = (d1(mesh) @ d0(mesh)).toarray()
    assert np.all(product == 0.0)


def test_d1_of_single_edge_form_hits_two_faces(genus2):
    alpha = np.zeros(genus2.edge_count)
    alpha[17] = 1.0
    curl = d1(genus2) @ alpha
    nonzero = curl[curl != 0.0]
    assert nonzero.size == 2
    assert nonzero.sum() == 0.0


def test_star0_of_flat_torus(torus):
    np.testing.assert_allclose(star0(torus).diagonal(), 1.0 / 64.0, rtol=1e-13)


def test_star0_of_unit_tetrahedron():
    mesh = equilateral_tetrahedron_mesh(1.0)
    np.testing.assert_allclose(star0(mesh).diagonal(), math.sqrt(3) / 4, rtol=1e-14)


def test_star0_trace_is_total_area(genus2):
    assert star0(genus2).diagonal().sum() == pytest.approx(1.0, abs=1e-13)


def test_star1_of_flat_torus(torus):
    weights = cotan_weights(torus)
    axis = np.isclose(torus.shape_lengths, 1.0 / 8.0)
    np.testing.assert_allclose(weights[axis], 1.0, atol=1e-14)
    np.testing.assert_allclose(weights[~axis], 0.0, atol=1e-14)


def test_star1_of_equilateral_tetrahedron():
    mesh = equilateral_tetrahedron_mesh(2.0)
    np.testing.assert_allclose(star1(mesh).diagonal(), 1.0 / math.sqrt(3), rtol=1e-14)


@pytest.mark.parametrize("k", [0.1, 3.7, 42.0])
def test_star1_is_bitwise_scale_invariant(genus2, k):
    assert np.array_equal(star1(scale_mesh(genus2, k)).diagonal(), star1(genus2).diagonal())


@pytest.mark.parametrize("k", [0.1, 3.7, 42.0])
def test_star1_ignores_multiplied_lengths(genus2, k):
    scaled = rescaled_mesh(genus2, k)
    np.testing.assert_allclose(scaled.edge_lengths, k * genus2.edge_lengths, rtol=1e-14)
    difference = np.max(np.abs(star1(scaled).diagonal() - star1(genus2).diagonal()))
    assert difference <= 1e-12


def test_star2_of_flat_torus(torus):
    np.testing.assert_allclose(star2(torus).diagonal(), 128.0, rtol=1e-13)


def test_volume_cochain_has_unit_density(genus2):
    volume = genus2.face_areas
    np.testing.assert_allclose(star2(genus2) @ volume, 1.0, rtol=1e-14)
    assert volume @ (star2(genus2) @ volume) == pytest.approx(1.0, abs=1e-13)


def test_inner_product_1_basics(torus):
    zero = DiscreteForm.zeros(torus, 1)
    assert inner_product_1(torus, zero, zero) == 0.0
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((2, torus.edge_count))
    assert inner_product_1(torus, a, b) == inner_product_1(torus, b, a)


def test_dx_has_unit_norm_on_flat_torus(torus):
    dx = torus_coordinate_form(torus, 8, axis=0)
    assert inner_product_1(torus, dx, dx) == pytest.approx(1.0, abs=1e-12)


def test_inner_products_reject_wrong_sizes(torus):
    with pytest.raises(DimensionMismatch):
        inner_product_1(torus, np.ones(3), np.ones(3))
    with pytest.raises(DimensionMismatch):
        inner_product_0(torus, DiscreteForm(1, np.ones(torus.edge_count)), np.ones(torus.vertex_count))


def test_laplacian_kernel_and_symmetry(genus2):
    laplacian = laplacian0(genus2)
    assert np.max(np.abs(laplacian @ np.ones(genus2.vertex_count))) <= 1e-12
    assert abs(laplacian - laplacian.T).max() == 0.0


@pytest.mark.parametrize("mesh_name", ["torus", "genus2"])
def test_laplacian_is_positive_semidefinite(mesh_name, request):
    mesh = request.getfixturevalue(mesh_name)
    laplacian = laplacian0(mesh)
    scale = np.max(laplacian.diagonal())
    rng = np.random.default_rng(11)
    for _ in range(100):
        u = rng.standard_normal(mesh.vertex_count)
        assert u @ (laplacian @ u) >= -1e-12 * scale * (u @ u)


def test_laplacian_matches_stencil_on_flat_torus():
    mesh = generate_flat_torus(3)
    laplacian = laplacian0(mesh).toarray()
    # vertex 4 is (1, 1): axis neighbours 3, 5, 1, 7 with weight 1
    expected = np.zeros(9)
    expected[[1, 3, 5, 7]] = -1.0
    expected[4] = 4.0
    np.testing.assert_allclose(laplacian[4], expected, atol=1e-13)


def test_codifferential_of_exact_constant_is_zero(genus2):
    alpha = d0(genus2) @ np.full(genus2.vertex_count, 2.5)
    assert np.all(codifferential1(genus2, alpha).values == 0.0)


def test_codifferential_of_dx_vanishes(torus):
    dx = torus_coordinate_form(torus, 8, axis=0)
    assert np.max(np.abs(codifferential1(torus, dx).values)) <= 1e-12


def test_codifferential_is_adjoint_of_d0(genus2):
    operators = build_operators(genus2)
    rng = np.random.default_rng(11)
    for _ in range(50):
        u = rng.standard_normal(genus2.vertex_count)
        alpha = rng.standard_normal(genus2.edge_count)
        lhs = operators.inner_product_0(operators.codifferential1(alpha), u)
        rhs = operators.inner_product_1(alpha, operators.d0 @ u)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_operator_bundle_matches_functions(genus2):
    operators = build_operators(genus2)
    u = random_potential(genus2)
    np.testing.assert_array_equal(operators.laplacian0 @ u, laplacian0(genus2) @ u)
