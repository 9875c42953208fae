"""Triangulated unit disc and sphere meshes.

Spheres come in two families: the octasphere (octahedron refined) and a
latitude-ring sphere whose poles stay 6-valent.  All families are built from a fixed coarse template by uniform
quadrisection.  New vertices are projected back onto the smooth geometry
(radially for the sphere, onto the unit circle for new boundary vertices
of the disc), so every vertex of a sphere mesh lies on the sphere and the
disc polygon approximates the unit disc from within.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .exceptions import MeshError

MAX_LEVEL = 10
_TOL = 1e-12

SPHERE_POINT_LABELS = ("+x", "-x", "+y", "-y", "+z", "-z")
DISC_POINT_LABELS = ("origin", "+x", "-x", "+y", "-y")


@dataclass(frozen=True)
class Geometry:
    kind: str  # "sphere" or "disc"
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sphere", "disc"):
            raise ValueError(f"unknown geometry {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def is_sphere(self) -> bool:
        return self.kind == "sphere"


def Sphere(radius: float = 1.0) -> Geometry:
    return Geometry("sphere", float(radius))


FLAT_DISC = Geometry("disc", 1.0)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (nv, 3)
    triangles: np.ndarray  # (nt, 3), consistently oriented
    geometry: Geometry
    boundary_vertices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    constraint_vertices: Mapping[str, int] = field(default_factory=dict)
    level: int = 0

    def __post_init__(self):
        object.__setattr__(self, "vertices", _freeze(np.asarray(self.vertices, dtype=float)))
        object.__setattr__(self, "triangles", _freeze(np.asarray(self.triangles, dtype=np.int64)))
        object.__setattr__(
            self, "boundary_vertices", _freeze(np.asarray(self.boundary_vertices, dtype=np.int64))
        )
        object.__setattr__(
            self, "constraint_vertices", MappingProxyType(dict(self.constraint_vertices))
        )

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def constraint_points(self, labels=None) -> np.ndarray:
        """Coordinates of registered constraint points in label order."""
        if labels is None:
            labels = list(self.constraint_vertices)
        return self.vertices[[self.constraint_vertices[k] for k in labels]].copy()

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges and the number of triangles sharing each."""
        e = np.concatenate(
            [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
        )
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts


@dataclass(frozen=True)
class MeshStats:
    h: float
    num_vertices: int
    num_triangles: int
    total_area: float


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    return 0.5 * np.linalg.norm(n, axis=1)


def mesh_size(mesh: TriangleMesh) -> MeshStats:
    p = mesh.vertices[mesh.triangles]
    lengths = np.stack(
        [
            np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
            np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
        ]
    )
    return MeshStats(
        h=float(lengths.max()),
        num_vertices=mesh.num_vertices,
        num_triangles=mesh.num_triangles,
        total_area=float(triangle_areas(mesh).sum()),
    )


def lift_point(x, geometry: Geometry) -> np.ndarray:
    """Closest-point projection onto the smooth surface.

    Works on a single point or on an array of points (last axis = 3).
    """
    x = np.asarray(x, dtype=float)
    if not geometry.is_sphere:
        return x.copy()
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(r == 0.0):
        raise ValueError("cannot lift the origin onto a sphere")
    return geometry.radius * x / r


def check_edge_manifold(mesh: TriangleMesh) -> bool:
    _, counts = mesh.edges()
    if mesh.geometry.is_sphere:
        return bool(np.all(counts == 2))
    return bool(np.all(counts <= 2))


def _check_level(level: int):
    if not isinstance(level, (int, np.integer)) or level < 0 or level > MAX_LEVEL:
        raise MeshError(f"level must be an integer in [0, {MAX_LEVEL}], got {level!r}")


def _octahedron(R: float) -> TriangleMesh:
    verts = R * np.array(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
    )
    tris = []
    for sx, ix in ((1, 0), (-1, 1)):
        for sy, iy in ((1, 2), (-1, 3)):
            for sz, iz in ((1, 4), (-1, 5)):
                tris.append((ix, iy, iz) if sx * sy * sz > 0 else (ix, iz, iy))
    labels = dict(zip(SPHERE_POINT_LABELS, range(6)))
    return TriangleMesh(verts, np.array(tris), Sphere(R), constraint_vertices=labels)


POLAR_BANDS = 4


def _polar_template(R: float, bands: int = POLAR_BANDS) -> TriangleMesh:
    # latitude rings: 6k vertices on the k-th ring from either pole
    pts = []
    rings = []
    for k in range(2 * bands + 1):
        theta = k * np.pi / (2 * bands)
        n = 6 * min(k, 2 * bands - k) or 1
        xy = _ring(n, 1.0, snap=(k == bands))
        s = 0.0 if n == 1 else np.sin(theta)
        z = np.cos(theta)
        ring = np.column_stack([s * xy, np.full(n, z)])
        if k == bands:
            ring[:, 2] = 0.0
        rings.append(list(range(sum(map(len, pts)), sum(map(len, pts)) + n)))
        pts.append(ring)
    verts = R * np.vstack(pts)
    verts[0] = (0.0, 0.0, R)
    verts[-1] = (0.0, 0.0, -R)
    tris: list = []
    for a, b in zip(rings, rings[1:]):
        if len(a) <= len(b):
            _zipper(a, b, tris, outer_first=False)
        else:
            band: list = []
            _zipper(b, a, band, outer_first=False)
            tris += [(x, z, y) for x, y, z in band]
    tris = np.array(tris)
    p = verts[tris]
    outward = np.einsum("td,td->t", np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), p.sum(1))
    tris[outward < 0] = tris[outward < 0][:, [0, 2, 1]]
    eq = rings[bands]
    q = len(eq) // 4
    labels = {
        "+x": eq[0],
        "-x": eq[2 * q],
        "+y": eq[q],
        "-y": eq[3 * q],
        "+z": rings[0][0],
        "-z": rings[-1][0],
    }
    return TriangleMesh(verts, tris, Sphere(R), constraint_vertices=labels)


def build_polar_sphere(level: int, R: float = 1.0) -> TriangleMesh:
    """Latitude-ring sphere refined ``level`` times with radial projection.

    Unlike the octasphere, both poles are 6-valent at every level.  The six
    axis points are vertices and are registered like the octasphere's.
    """
    _check_level(level)
    if R <= 0:
        raise MeshError("radius must be positive")
    mesh = _polar_template(float(R))
    for _ in range(level):
        mesh = refine(mesh)
    return mesh


def build_octasphere(level: int, R: float = 1.0) -> TriangleMesh:
    """Octahedron refined ``level`` times with radial projection to radius R.

    The six axis vertices are registered as constraint points
    ``+x, -x, +y, -y, +z, -z``.
    """
    _check_level(level)
    if R <= 0:
        raise MeshError("radius must be positive")
    mesh = _octahedron(float(R))
    for _ in range(level):
        mesh = refine(mesh)
    return mesh


def _zipper(inner: list, outer: list, tris: list, outer_first: bool = True) -> None:
    """Triangulate the band between two concentric vertex rings.

    Both rings start at azimuth 0 and run counter-clockwise; the ring with
    the next smaller azimuth fraction advances first.  ``outer_first``
    decides ties.
    """
    if len(inner) == 1:
        for k in range(len(outer)):
            tris.append((inner[0], outer[k], outer[(k + 1) % len(outer)]))
        return
    ni, no = len(inner), len(outer)
    i = j = 0
    while i < ni or j < no:
        fo, fi = (j + 1) / no, (i + 1) / ni
        if i >= ni or (j < no and (fo < fi or (outer_first and fo == fi))):
            tris.append((inner[i % ni], outer[j % no], outer[(j + 1) % no]))
            j += 1
        else:
            tris.append((inner[i % ni], outer[j % no], inner[(i + 1) % ni]))
            i += 1


def _ring(n: int, radius: float, snap=True) -> np.ndarray:
    phi = 2.0 * np.pi * np.arange(n) / n
    xy = radius * np.column_stack([np.cos(phi), np.sin(phi)])
    if snap and n % 4 == 0:
        q = n // 4
        xy[0], xy[q], xy[2 * q], xy[3 * q] = (radius, 0), (0, radius), (-radius, 0), (0, -radius)
    return xy


DISC_RING_RADII = (0.25, 0.5, 0.75, 1.0)


def _disc_template() -> TriangleMesh:
    # concentric rings of 6k vertices around a 6-valent centre
    pts = [np.zeros((1, 2))]
    rings = [[0]]
    count = 1
    for k, r in enumerate(DISC_RING_RADII, start=1):
        xy = _ring(6 * k, r)
        if k % 2 == 1:
            xy[0], xy[3 * k] = (r, 0.0), (-r, 0.0)
        pts.append(xy)
        rings.append(list(range(count, count + 6 * k)))
        count += 6 * k
    xy = np.vstack(pts)
    tris: list = []
    for inner, outer in zip(rings, rings[1:]):
        _zipper(inner, outer, tris)
    verts = np.column_stack([xy, np.zeros(len(xy))])
    half = rings[2]  # radius 0.5, 12 vertices
    labels = {"origin": 0, "+x": half[0], "-x": half[6], "+y": half[3], "-y": half[9]}
    return TriangleMesh(
        verts, np.array(tris), FLAT_DISC, boundary_vertices=rings[-1], constraint_vertices=labels
    )


def build_disc_mesh(level: int) -> TriangleMesh:
    """Inscribed polygonal unit disc with the five constraint points as vertices.

    Constraint labels, in order: origin, +x (0.5, 0), -x, +y (0, 0.5), -y.
    """
    _check_level(level)
    mesh = _disc_template()
    for _ in range(level):
        mesh = refine(mesh)
    return mesh


def refine(mesh: TriangleMesh) -> TriangleMesh:
    """Uniform quadrisection with geometry-specific projection of midpoints."""
    tris = mesh.triangles
    nv = mesh.num_vertices
    nt = len(tris)
    local = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    local_sorted = np.sort(local, axis=1)
    edges, inverse, counts = np.unique(
        local_sorted, axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    geom = mesh.geometry
    new_boundary = np.zeros(0, dtype=np.int64)
    if geom.is_sphere:
        mid = lift_point(mid, geom)
    else:
        on_boundary = counts == 1
        xy = mid[on_boundary]
        mid[on_boundary] = xy / np.linalg.norm(xy, axis=1, keepdims=True)
        new_boundary = nv + np.flatnonzero(on_boundary)

    m = nv + inverse.reshape(3, nt).T  # columns: mid(01), mid(12), mid(20)
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    m01, m12, m20 = m[:, 0], m[:, 1], m[:, 2]
    children = np.stack(
        [
            np.column_stack([a, m01, m20]),
            np.column_stack([m01, b, m12]),
            np.column_stack([m20, m12, c]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=1,
    ).reshape(-1, 3)
    return TriangleMesh(
        np.vstack([mesh.vertices, mid]),
        children,
        geom,
        boundary_vertices=np.concatenate([mesh.boundary_vertices, new_boundary]),
        constraint_vertices=dict(mesh.constraint_vertices),
        level=mesh.level + 1,
    )


def validate_mesh(mesh: TriangleMesh) -> None:
    """Raise MeshError if any structural invariant is violated."""
    if not check_edge_manifold(mesh):
        raise MeshError("mesh is not edge-manifold")
    r = np.linalg.norm(mesh.vertices, axis=1)
    if mesh.geometry.is_sphere:
        if np.max(np.abs(r - mesh.geometry.radius)) > _TOL:
            raise MeshError("sphere vertex off the sphere")
    else:
        if len(mesh.boundary_vertices) and np.max(np.abs(r[mesh.boundary_vertices] - 1.0)) > _TOL:
            raise MeshError("boundary vertex off the unit circle")
        if np.max(r) > 1.0 + _TOL:
            raise MeshError("vertex outside the unit disc")


def to_off(mesh: TriangleMesh) -> str:
    lines = ["OFF", f"{mesh.num_vertices} {mesh.num_triangles} 0"]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles]
    return "\n".join(lines) + "\n"
