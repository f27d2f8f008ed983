import numpy as np
import pytest

from smfpca import (
    DimensionMismatch,
    InputError,
    ParseError,
    ResourceLimit,
    TopologyError,
    load_mesh,
    save_mesh,
    unit_sphere_mesh,
    vertex_locations,
)
from smfpca.errors import DegenerateTriangle
from smfpca.mesh import SurfaceLocation, TriangleMesh


def brute_force_closest(mesh, p):
    """Dense oracle: closest surface point by sampling each triangle
    on a fine barycentric lattice, then reporting the best distance."""
    best = np.inf
    steps = np.linspace(0.0, 1.0, 81)
    for t in range(mesh.T):
        a, b, c = mesh.vertices[mesh.triangles[t]]
        for u in steps:
            vs = np.linspace(0.0, 1.0 - u, 81)
            pts = (1.0 - u - vs)[:, None] * a + u * b + vs[:, None] * c
            d = np.linalg.norm(pts - p, axis=1).min()
            best = min(best, d)
    return best


# -- construction and validation --------------------------------------


def test_tetra_census(tetra):
    assert tetra.K == 4
    assert tetra.T == 4
    assert tetra.edge_count == 6
    assert tetra.boundary_edge_count == 0
    assert tetra.is_closed()


def test_open_mesh_census(right_triangle):
    assert not right_triangle.is_closed()
    assert right_triangle.boundary_edge_count == 3


def test_vertices_out_of_range():
    v = np.eye(3)
    with pytest.raises(TopologyError):
        TriangleMesh(v, np.array([[0, 1, 5]]))


def test_repeated_vertex_in_triangle():
    v = np.eye(3)
    with pytest.raises(TopologyError):
        TriangleMesh(v, np.array([[0, 1, 1]]))


def test_inconsistent_orientation_rejected(tetra):
    flipped = tetra.triangles.copy()
    flipped[1] = flipped[1][::-1]
    with pytest.raises(TopologyError):
        TriangleMesh(tetra.vertices, flipped)


def test_non_manifold_edge_rejected():
    # three triangles sharing the edge (0, 1)
    v = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, -1.0, 0.0],
        ]
    )
    t = np.array([[0, 1, 2], [0, 3, 1], [0, 1, 4]])
    with pytest.raises(TopologyError):
        TriangleMesh(v, t)


def test_degenerate_triangle_rejected():
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    with pytest.raises(DegenerateTriangle):
        TriangleMesh(v, np.array([[0, 1, 2]]))


def test_nonfinite_vertex_rejected():
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, np.nan, 0.0]])
    with pytest.raises(InputError):
        TriangleMesh(v, np.array([[0, 1, 2]]))


def test_bad_shapes_rejected():
    with pytest.raises(DimensionMismatch):
        TriangleMesh(np.zeros((3, 2)), np.array([[0, 1, 2]]))
    with pytest.raises(DimensionMismatch):
        TriangleMesh(np.eye(3), np.array([0, 1, 2]))


def test_isolated_vertex_warns():
    v = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0, 5.0, 5.0]]
    )
    with pytest.warns(UserWarning):
        TriangleMesh(v, np.array([[0, 1, 2]]))


# -- per-triangle geometry --------------------------------------------


def test_right_triangle_geometry(right_triangle):
    geom = right_triangle.triangle_geometry(0)
    assert geom.area == pytest.approx(0.5, abs=1e-15)
    # hand-derived gradients of the three nodal functions
    expected = np.array(
        [
            [-1.0, -1.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ]
    )
    np.testing.assert_allclose(geom.basis_gradients, expected, atol=1e-14)


def test_equilateral_area():
    v = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.5, np.sqrt(3.0) / 2.0, 0.0],
        ]
    )
    m = TriangleMesh(v, np.array([[0, 1, 2]]))
    assert m.triangle_geometry(0).area == pytest.approx(np.sqrt(3.0) / 4.0)


def test_gradients_rotate_with_triangle(right_triangle):
    # a rigid rotation must rotate the gradients and keep the area
    theta = 0.7
    rot = np.array(
        [
            [np.cos(theta), -np.sin(theta), 0.0],
            [np.sin(theta), np.cos(theta), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    axis_swap = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
    rot = axis_swap @ rot
    rotated = TriangleMesh(
        right_triangle.vertices @ rot.T, right_triangle.triangles
    )
    base = right_triangle.triangle_geometry(0)
    moved = rotated.triangle_geometry(0)
    assert moved.area == pytest.approx(base.area, rel=1e-14)
    np.testing.assert_allclose(
        moved.basis_gradients, base.basis_gradients @ rot.T, atol=1e-13
    )


def test_gradients_sum_to_zero(sphere1):
    for t in range(0, sphere1.T, 7):
        g = sphere1.triangle_geometry(t).basis_gradients
        np.testing.assert_allclose(g.sum(axis=0), 0.0, atol=1e-12)


# -- icosphere --------------------------------------------------------


def test_icosphere_counts():
    m0 = unit_sphere_mesh(0)
    assert (m0.K, m0.T) == (12, 20)
    m1 = unit_sphere_mesh(1)
    assert (m1.K, m1.T) == (42, 80)
    m2 = unit_sphere_mesh(2)
    assert (m2.K, m2.T) == (162, 320)


def test_icosphere_on_unit_sphere(sphere2):
    radii = np.linalg.norm(sphere2.vertices, axis=1)
    np.testing.assert_allclose(radii, 1.0, atol=1e-12)
    assert sphere2.is_closed()


def test_icosphere_area_converges(sphere3):
    # inscribed polyhedron: area below 4*pi but within 1% by level 3
    area = sphere3.total_area()
    assert area < 4.0 * np.pi
    assert abs(area - 4.0 * np.pi) / (4.0 * np.pi) < 0.01


def test_icosphere_outward_orientation(sphere1):
    # signed volume of an outward-oriented closed surface is positive
    a = sphere1.vertices[sphere1.triangles[:, 0]]
    b = sphere1.vertices[sphere1.triangles[:, 1]]
    c = sphere1.vertices[sphere1.triangles[:, 2]]
    vol = np.einsum("ij,ij->", a, np.cross(b, c)) / 6.0
    assert vol > 0
    assert vol == pytest.approx(4.0 * np.pi / 3.0, rel=0.15)


def test_icosphere_cap():
    with pytest.raises(ResourceLimit):
        unit_sphere_mesh(10)


# -- point location ---------------------------------------------------


def test_locate_vertex(sphere1):
    loc = sphere1.locate_point(sphere1.vertices[17])
    np.testing.assert_allclose(
        sphere1.location_coordinates(loc), sphere1.vertices[17], atol=1e-12
    )
    assert loc.barycentric.max() == pytest.approx(1.0, abs=1e-9)


def test_locate_centroid(sphere1):
    t = 11
    centroid = sphere1.vertices[sphere1.triangles[t]].mean(axis=0)
    loc = sphere1.locate_point(centroid)
    np.testing.assert_allclose(loc.barycentric, 1.0 / 3.0, atol=1e-9)
    np.testing.assert_allclose(
        sphere1.location_coordinates(loc), centroid, atol=1e-12
    )


def test_locate_outside_point_matches_brute_force(sphere1):
    rng = np.random.default_rng(5)
    for p in rng.normal(scale=1.5, size=(6, 3)):
        loc = sphere1.locate_point(p)
        q = sphere1.location_coordinates(loc)
        oracle = brute_force_closest(sphere1, p)
        # lattice oracle overestimates slightly; located point must not
        # be farther than the lattice best by more than its resolution
        assert np.linalg.norm(q - p) <= oracle + 1e-3
        inside = sphere1.vertices[sphere1.triangles[loc.triangle_index]]
        assert loc.barycentric @ inside == pytest.approx(tuple(q), abs=1e-12)


def test_locate_idempotent(sphere1):
    p = np.array([0.3, -0.2, 1.4])
    loc = sphere1.locate_point(p)
    q = sphere1.location_coordinates(loc)
    loc2 = sphere1.locate_point(q)
    np.testing.assert_allclose(
        sphere1.location_coordinates(loc2), q, atol=1e-12
    )


def test_locate_matches_kd_pruned_path(sphere3):
    # sphere3 is below the pruning threshold; force both code paths
    # to agree by comparing against the brute-force scan
    from smfpca import mesh as meshmod

    p = np.array([0.9, 0.4, -0.1])
    loc = sphere3.locate_point(p)
    q = sphere3.location_coordinates(loc)
    old = meshmod._LOCATE_BRUTE_MAX
    try:
        meshmod._LOCATE_BRUTE_MAX = 1
        loc2 = sphere3.locate_point(p)
    finally:
        meshmod._LOCATE_BRUTE_MAX = old
    q2 = sphere3.location_coordinates(loc2)
    np.testing.assert_allclose(q2, q, atol=1e-12)


def test_vertex_locations_cover_all_vertices(sphere1):
    locs = vertex_locations(sphere1)
    assert len(locs) == sphere1.K
    for k in (0, 13, 41):
        np.testing.assert_allclose(
            sphere1.location_coordinates(locs[k]),
            sphere1.vertices[k],
            atol=1e-14,
        )
        assert locs[k].barycentric.max() == 1.0


def test_surface_location_validation():
    with pytest.raises(InputError):
        SurfaceLocation(0, np.array([0.5, 0.6, 0.2]))
    with pytest.raises(InputError):
        SurfaceLocation(0, np.array([-0.1, 0.6, 0.5]))
    loc = SurfaceLocation(0, np.array([-1e-12, 0.4, 0.6 + 1e-12]))
    assert loc.barycentric.min() == 0.0
    assert loc.barycentric.sum() == pytest.approx(1.0, abs=1e-15)


# -- OFF files --------------------------------------------------------


def test_off_roundtrip(tmp_path, sphere1):
    path = tmp_path / "s.off"
    save_mesh(sphere1, path)
    again = load_mesh(path)
    np.testing.assert_array_equal(again.vertices, sphere1.vertices)
    np.testing.assert_array_equal(again.triangles, sphere1.triangles)


def test_off_accepts_comments_and_blanks(tmp_path):
    path = tmp_path / "t.off"
    path.write_text(
        "OFF\n# a comment\n\n4 4 6\n0 0 0\n1 1 0\n1 0 1\n0 1 1\n"
        "3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n"
    )
    m = load_mesh(path)
    assert m.K == 4 and m.is_closed()


@pytest.mark.parametrize(
    "content,needle",
    [
        ("NOT_OFF\n3 1 0\n", "line 1"),
        ("OFF\n3 1\n", "line 2"),
        ("OFF\n3 1 3\n0 0 0\n1 0 0\n0 1\n", "line 5"),
        ("OFF\n3 1 3\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2\n", "line 6"),
        ("OFF\n3 1 3\n0 0 0\n1 0 0\n0 1 0\n3 0 1 999\n", "line 6"),
        ("OFF\n3 1 3\n0 0 0\n1 0 0\n", "line"),
        ("OFF\n3 1 3\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n3 2 1 0\n", "line 7"),
    ],
)
def test_off_parse_errors_carry_line_numbers(tmp_path, content, needle):
    path = tmp_path / "bad.off"
    path.write_text(content)
    with pytest.raises(ParseError, match=needle):
        load_mesh(path)


def test_load_mesh_unknown_format(tmp_path, sphere1):
    path = tmp_path / "s.off"
    save_mesh(sphere1, path)
    with pytest.raises(InputError):
        load_mesh(path, format="ply")
