import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backend.services.geometry import (
    Method,
    box_intrinsic_volumes,
    convex_hull,
    distances_to_polytope,
    edge_mean_width_V1,
    exact_intrinsic_volumes,
    hausdorff_distance,
    intrinsic_volume,
    kappa,
    kubota_Vm,
    mean_width_and_V1,
    point_distance,
    point_set_hausdorff,
    polytope_from_text,
    polytope_to_text,
    steiner_point,
    steiner_polynomial_check,
    support_function,
    surface_area_half,
    varpi,
    volume,
)
from backend.services.limits import ball_intrinsic_volume


def _box(sides):
    corners = np.array(np.meshgrid(*[[0.0, side] for side in sides], indexing="ij")).reshape(len(sides), -1).T
    return convex_hull(corners)


def _vertex_set(polytope):
    return {tuple(vertex) for vertex in polytope.vertices}


@st.composite
def random_cloud(draw, dims=(2, 3), min_points=5, max_points=40):
    dim = draw(st.sampled_from(dims))
    count = draw(st.integers(min_value=max(min_points, dim + 2), max_value=max_points))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    return np.random.default_rng(seed).standard_normal((count, dim))


def test_ball_constants():
    assert kappa(0) == pytest.approx(1.0)
    assert kappa(2) == pytest.approx(math.pi)
    assert kappa(3) == pytest.approx(4 * math.pi / 3)
    assert varpi(2) == pytest.approx(2 * math.pi)


def test_square_hull_and_measures(unit_square):
    assert unit_square.degenerate_rank == 2
    assert _vertex_set(unit_square) == {(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)}
    assert volume(unit_square) == pytest.approx(1.0)
    assert surface_area_half(unit_square) == pytest.approx(2.0)
    assert exact_intrinsic_volumes(unit_square) == pytest.approx([1.0, 2.0, 1.0])


def test_cube_exact_intrinsic_volumes(unit_cube):
    assert len(unit_cube.vertices) == 8
    assert edge_mean_width_V1(unit_cube) == pytest.approx(3.0)
    assert exact_intrinsic_volumes(unit_cube) == pytest.approx([1.0, 3.0, 3.0, 1.0])


def test_box_intrinsic_volumes_match_hull():
    sides = [2.0, 3.0, 5.0]
    assert box_intrinsic_volumes(sides) == pytest.approx([1.0, 10.0, 31.0, 30.0])
    assert exact_intrinsic_volumes(_box(sides)) == pytest.approx(box_intrinsic_volumes(sides), rel=1e-9)


def test_box_intrinsic_volumes_rejects_negative_side():
    with pytest.raises(ValueError):
        box_intrinsic_volumes([1.0, -1.0])


def test_flat_square_in_space():
    square = convex_hull([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
    assert square.degenerate_rank == 2
    assert volume(square) == 0.0
    # a flat body's surface counts both sides
    assert surface_area_half(square) == pytest.approx(1.0)
    assert exact_intrinsic_volumes(square) == pytest.approx([1.0, 2.0, 1.0, 0.0])


def test_collinear_points_give_a_segment():
    direction = np.array([1.0, 2.0, 2.0])
    segment = convex_hull([t * direction for t in (0.0, 0.3, 1.0, 2.0)])
    assert segment.degenerate_rank == 1
    assert len(segment.vertices) == 2
    assert intrinsic_volume(segment, 1).value == pytest.approx(6.0)
    assert intrinsic_volume(segment, 2).value == 0.0
    assert steiner_point(segment).point == pytest.approx(direction)


def test_single_point_hull():
    point = convex_hull([[1.5, -2.0]])
    assert point.degenerate_rank == 0
    assert exact_intrinsic_volumes(point) == [1.0, 0.0, 0.0]
    assert steiner_point(point).point == pytest.approx([1.5, -2.0])


def test_invalid_points():
    with pytest.raises(ValueError, match="no points"):
        convex_hull([])
    with pytest.raises(ValueError, match="invalid coordinate"):
        convex_hull([[0.0, 0.0], [float("nan"), 1.0], [1.0, 1.0]])


@settings(max_examples=25, deadline=None)
@given(random_cloud())
def test_hull_is_idempotent(points):
    hull = convex_hull(points)
    again = convex_hull(hull.vertices)
    assert _vertex_set(again) == _vertex_set(hull)
    assert volume(again) == pytest.approx(volume(hull), rel=1e-12)


def test_support_function(unit_square):
    assert support_function(unit_square, [1.0, 1.0]) == pytest.approx(2.0)
    assert support_function(unit_square, [[-1.0, 0.0], [0.0, 2.0]]) == pytest.approx([0.0, 2.0])
    with pytest.raises(ValueError, match="zero direction"):
        support_function(unit_square, [0.0, 0.0])


def test_sphere_quadrature_is_unbiased_on_cube(unit_cube):
    estimate = intrinsic_volume(unit_cube, 1, method="sphere", num_directions=4096, rng_seed=3)
    assert estimate.method is Method.SPHERE
    assert abs(estimate.value - 3.0) <= 4 * estimate.std_error + 1e-9


def test_mean_width_exact_in_the_plane(unit_square):
    estimate = mean_width_and_V1(unit_square)
    assert estimate.method is Method.EXACT
    assert estimate.value == pytest.approx(2.0)


@pytest.mark.parametrize("m, expected", [(1, 6.0), (2, 11.0)])
def test_kubota_matches_box_values(m, expected):
    estimate = kubota_Vm(_box([1.0, 2.0, 3.0]), m, num_rotations=2000, rng_seed=11)
    assert estimate.method is Method.KUBOTA
    assert abs(estimate.value - expected) <= 4 * estimate.std_error + 1e-9


def test_kubota_matches_exact_on_random_polytope(rng):
    polytope = convex_hull(rng.standard_normal((30, 3)))
    exact = exact_intrinsic_volumes(polytope)
    for m in (1, 2):
        estimate = kubota_Vm(polytope, m, num_rotations=2000, rng_seed=5)
        assert abs(estimate.value - exact[m]) <= 4 * estimate.std_error + 1e-9


def test_kubota_is_exact_at_full_rank(unit_cube):
    estimate = kubota_Vm(unit_cube, 3)
    assert estimate.method is Method.EXACT
    assert estimate.value == pytest.approx(1.0)


def test_intrinsic_volume_method_errors(rng):
    polytope = convex_hull(rng.standard_normal((12, 4)))
    with pytest.raises(ValueError, match="no exact branch"):
        intrinsic_volume(polytope, 1, method="exact")
    with pytest.raises(ValueError, match="only estimates V_1"):
        intrinsic_volume(polytope, 2, method="sphere")
    with pytest.raises(ValueError):
        intrinsic_volume(polytope, 5)


def test_steiner_point_of_symmetric_body_is_its_centre():
    shift = np.array([2.0, -1.0, 0.5])
    corners = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])
    estimate = steiner_point(convex_hull(corners + shift), num_directions=600, rng_seed=1)
    assert estimate.point == pytest.approx(shift + 0.5, abs=1e-9)


def test_steiner_point_is_translation_equivariant(rng):
    points = rng.standard_normal((25, 3))
    shift = np.array([3.0, -2.0, 1.0])
    base = steiner_point(convex_hull(points), num_directions=1200, rng_seed=9)
    moved = steiner_point(convex_hull(points + shift), num_directions=1200, rng_seed=9)
    assert moved.point == pytest.approx(base.point + shift, abs=1e-9)


def test_polygon_steiner_point_of_triangle():
    triangle = convex_hull([[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]])
    shifted = convex_hull([[1.0, 1.0], [5.0, 1.0], [1.0, 4.0]])
    point = steiner_point(triangle).point
    assert steiner_point(shifted).point == pytest.approx(point + 1.0)
    assert point_distance(point, triangle) == pytest.approx(0.0, abs=1e-8)


def test_point_distance(unit_square):
    assert point_distance([2.0, 0.5], unit_square) == pytest.approx(1.0, abs=1e-8)
    assert point_distance([2.0, 2.0], unit_square) == pytest.approx(math.sqrt(2.0), abs=1e-8)
    assert point_distance([0.5, 0.5], unit_square) == pytest.approx(0.0, abs=1e-8)


def test_batch_distances_agree_with_min_norm_point(rng):
    polytope = convex_hull(rng.standard_normal((20, 3)))
    queries = 3.0 * rng.standard_normal((40, 3))
    batch = distances_to_polytope(queries, polytope)
    single = np.array([point_distance(query, polytope) for query in queries])
    assert batch == pytest.approx(single, abs=1e-7)


def test_hausdorff_of_nested_squares(unit_square):
    bigger = convex_hull([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
    assert hausdorff_distance(unit_square, bigger) == pytest.approx(math.sqrt(2.0), abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(random_cloud(dims=(2,)), random_cloud(dims=(2,)), random_cloud(dims=(2,)))
def test_hausdorff_metric_axioms(first, second, third):
    a, b, c = convex_hull(first), convex_hull(second), convex_hull(third)
    assert hausdorff_distance(a, a) == pytest.approx(0.0, abs=1e-9)
    assert hausdorff_distance(a, b) == pytest.approx(hausdorff_distance(b, a), abs=1e-9)
    assert hausdorff_distance(a, c) <= hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-8


def test_point_set_hausdorff():
    assert point_set_hausdorff([[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0]]) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "polytope_name, rho",
    [("unit_square", 0.5), ("unit_cube", 0.3)],
)
def test_steiner_polynomial(polytope_name, rho, request):
    polytope = request.getfixturevalue(polytope_name)
    check = steiner_polynomial_check(polytope, rho, mc_points=200_000, rng_seed=4)
    assert check.lhs == pytest.approx(check.rhs, rel=0.01)


def test_steiner_polynomial_at_zero_radius(unit_cube):
    check = steiner_polynomial_check(unit_cube, 0.0)
    assert check.lhs == pytest.approx(1.0)
    assert check.rhs == pytest.approx(1.0)


def test_text_format(rng):
    polytope = convex_hull(rng.standard_normal((15, 3)))
    text = polytope_to_text(polytope)
    assert text.splitlines()[0] == f"3 {len(polytope.vertices)}"
    assert _vertex_set(polytope_from_text(text)) == _vertex_set(polytope)


def test_text_format_errors():
    with pytest.raises(ValueError, match="expected 3 vertices"):
        polytope_from_text("2 3\n0 0\n1 0\n")
    with pytest.raises(ValueError, match="invalid coordinate"):
        polytope_from_text("2 1\n0 x\n")


def test_long_drifted_walk_keeps_its_width():
    steps = np.c_[np.full(20_000, 1e6), np.random.default_rng(8).standard_normal(20_000)]
    walk = np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])
    hull = convex_hull(walk)
    assert hull.degenerate_rank == 2
    assert len(hull.vertices) > 2
    squeezed = walk / np.array([1e6, 1.0])
    assert volume(hull) == pytest.approx(1e6 * volume(convex_hull(squeezed)), rel=1e-6)


def test_long_collinear_walk_stays_a_segment():
    walk = np.outer(np.arange(20_001, dtype=float), [1e6, 2e6])
    segment = convex_hull(walk)
    assert segment.degenerate_rank == 1
    assert intrinsic_volume(segment, 1).value == pytest.approx(2e10 * math.sqrt(5.0))


@pytest.mark.parametrize("factor", [0.5, 3.0])
def test_intrinsic_volumes_and_steiner_point_scale(factor, rng):
    points = rng.standard_normal((30, 3))
    base, scaled = convex_hull(points), convex_hull(factor * points)
    expected = [factor**m * value for m, value in enumerate(exact_intrinsic_volumes(base))]
    assert exact_intrinsic_volumes(scaled) == pytest.approx(expected, rel=1e-9)
    point = steiner_point(base, num_directions=600, rng_seed=2).point
    assert steiner_point(scaled, num_directions=600, rng_seed=2).point == pytest.approx(factor * point, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(random_cloud())
def test_intrinsic_volumes_grow_with_the_hull(points):
    inner = exact_intrinsic_volumes(convex_hull(points[: len(points) // 2]))
    outer = exact_intrinsic_volumes(convex_hull(points))
    for small, large in zip(inner, outer):
        assert small <= large + 1e-9


def _sphere_points(count):
    index = np.arange(count) + 0.5
    polar = np.arccos(1.0 - 2.0 * index / count)
    azimuth = math.pi * (1.0 + math.sqrt(5.0)) * index
    return np.c_[np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth), np.cos(polar)]


def test_inscribed_polytopes_approach_the_ball():
    sphere = exact_intrinsic_volumes(convex_hull(_sphere_points(2000)))
    angles = np.linspace(0.0, 2 * math.pi, 500, endpoint=False)
    disc = exact_intrinsic_volumes(convex_hull(np.c_[np.cos(angles), np.sin(angles)]))
    for values, d in ((disc, 2), (sphere, 3)):
        for m in range(1, d + 1):
            assert values[m] == pytest.approx(ball_intrinsic_volume(d, m), rel=0.02)
            assert values[m] <= ball_intrinsic_volume(d, m)


@settings(max_examples=20, deadline=None)
@given(random_cloud(dims=(2,)), random_cloud(dims=(2,)))
def test_hull_hausdorff_is_bounded_by_point_sets(first, second):
    assert hausdorff_distance(convex_hull(first), convex_hull(second)) <= point_set_hausdorff(first, second) + 1e-8


def test_facets_bound_the_polytope(rng, unit_cube):
    polytope = convex_hull(rng.standard_normal((40, 3)))
    for facet in polytope.facets:
        assert np.linalg.norm(facet.normal) == pytest.approx(1.0)
        assert np.all(polytope.vertices @ facet.normal <= facet.offset + 1e-9)
        assert polytope.vertices[list(facet.vertex_indices)] @ facet.normal == pytest.approx(facet.offset)
    assert len(unit_cube.facets) == 6
    assert all(len(facet.vertex_indices) == 4 for facet in unit_cube.facets)
