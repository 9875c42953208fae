import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from membrane_split.exceptions import MeshError
from membrane_split.mesh import (
    DISC_POINT_LABELS,
    FLAT_DISC,
    SPHERE_POINT_LABELS,
    Sphere,
    TriangleMesh,
    build_disc_mesh,
    build_octasphere,
    build_polar_sphere,
    check_edge_manifold,
    lift_point,
    mesh_size,
    refine,
    to_off,
    triangle_areas,
    validate_mesh,
)

AXES = {
    "+x": (1, 0, 0), "-x": (-1, 0, 0), "+y": (0, 1, 0),
    "-y": (0, -1, 0), "+z": (0, 0, 1), "-z": (0, 0, -1),
}


@pytest.mark.parametrize("level,nv,nt", [(0, 6, 8), (1, 18, 32), (2, 66, 128)])
def test_octasphere_counts(level, nv, nt):
    m = build_octasphere(level)
    assert (m.num_vertices, m.num_triangles) == (nv, nt)


@pytest.mark.parametrize("builder", [build_octasphere, build_polar_sphere])
@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_sphere_euler_and_manifold(builder, level):
    m = builder(level)
    nv, nt = m.num_vertices, m.num_triangles
    ne = len(m.edges()[0])
    assert nv - ne + nt == 2
    assert check_edge_manifold(m)
    validate_mesh(m)
    assert np.allclose(np.linalg.norm(m.vertices, axis=1), 1.0, atol=1e-14)


@pytest.mark.parametrize("builder", [build_octasphere, build_polar_sphere])
def test_sphere_orientation_outward(builder):
    m = builder(2)
    p = m.vertices[m.triangles]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    assert np.all(np.einsum("td,td->t", n, p.mean(axis=1)) > 0)


# the octahedron's first refinement is pre-asymptotic (ratio 3.51)
@pytest.mark.parametrize("builder,first", [(build_polar_sphere, 1), (build_octasphere, 2)])
def test_area_deficit_ratio(builder, first):
    deficits = [4 * np.pi - mesh_size(builder(k)).total_area for k in range(first, first + 5)]
    ratios = [a / b for a, b in zip(deficits, deficits[1:])]
    assert all(3.6 <= r <= 4.4 for r in ratios), ratios


def test_disc_area_converges_to_pi():
    areas = [mesh_size(build_disc_mesh(k)).total_area for k in range(4)]
    gaps = [np.pi - a for a in areas]
    assert all(g > 0 for g in gaps)
    assert all(3.6 <= a / b <= 4.4 for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("builder", [build_octasphere, build_polar_sphere])
def test_sphere_constraint_points_persist(builder):
    for k in range(4):
        m = builder(k)
        assert tuple(m.constraint_vertices) == SPHERE_POINT_LABELS
        for label, v in m.constraint_vertices.items():
            assert np.array_equal(m.vertices[v], np.array(AXES[label], float))


def test_disc_constraint_points_and_boundary():
    for k in range(4):
        m = build_disc_mesh(k)
        assert tuple(m.constraint_vertices) == DISC_POINT_LABELS
        pts = m.constraint_points()
        assert np.allclose(pts, [[0, 0, 0], [0.5, 0, 0], [-0.5, 0, 0], [0, 0.5, 0], [0, -0.5, 0]],
                           atol=0)
        r = np.linalg.norm(m.vertices[m.boundary_vertices], axis=1)
        assert np.allclose(r, 1.0, atol=1e-14)
        _, counts = m.edges()
        assert np.sum(counts == 1) == len(m.boundary_vertices)
        validate_mesh(m)


def test_refine_keeps_old_vertices_and_halves_h():
    m0 = build_polar_sphere(1)
    m1 = refine(m0)
    assert np.array_equal(m1.vertices[: m0.num_vertices], m0.vertices)
    assert m1.level == 2
    ratio = mesh_size(m0).h / mesh_size(m1).h
    assert 1.7 < ratio < 2.3


def test_level_zero_sizes():
    assert (build_disc_mesh(0).num_vertices, build_disc_mesh(0).num_triangles) == (61, 96)
    assert (build_polar_sphere(0).num_vertices, build_polar_sphere(0).num_triangles) == (98, 192)


@pytest.mark.parametrize("bad", [-1, 11, 1.5, "2"])
def test_bad_level_rejected(bad):
    with pytest.raises(MeshError):
        build_octasphere(bad)


def test_validate_detects_off_sphere_vertex():
    m = build_octasphere(1)
    v = m.vertices.copy()
    v[7] *= 1.01
    with pytest.raises(MeshError):
        validate_mesh(TriangleMesh(v, m.triangles, m.geometry))


def test_non_manifold_detected():
    m = build_octasphere(0)
    tris = np.vstack([m.triangles, m.triangles[:1]])
    assert not check_edge_manifold(TriangleMesh(m.vertices, tris, m.geometry))


def test_lift_point():
    x = np.array([[0.0, 0.0, 2.0], [3.0, 4.0, 0.0]])
    assert np.allclose(lift_point(x, Sphere(2.0)), [[0, 0, 2], [1.2, 1.6, 0]])
    assert np.array_equal(lift_point(x, FLAT_DISC), x)
    with pytest.raises(ValueError):
        lift_point(np.zeros(3), Sphere())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3),
       st.floats(0.1, 10))
def test_lift_is_idempotent_projection(x, R):
    x = np.array(x)
    if np.linalg.norm(x) < 1e-3:
        return
    g = Sphere(R)
    y = lift_point(x, g)
    assert np.isclose(np.linalg.norm(y), R)
    assert np.allclose(lift_point(y, g), y)


def test_to_off_roundtrip_header():
    m = build_octasphere(0)
    lines = to_off(m).splitlines()
    assert lines[0] == "OFF" and lines[1] == "6 8 0"
    assert len(lines) == 2 + 6 + 8


def test_mesh_arrays_are_read_only():
    m = build_octasphere(1)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 2.0


def test_triangle_areas_positive():
    for m in (build_disc_mesh(2), build_polar_sphere(2), build_octasphere(3)):
        assert triangle_areas(m).min() > 1e-4
