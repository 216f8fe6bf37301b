"""Triangulated closed surfaces and the two Galerkin basis families.

A :class:`SurfaceMesh` stores flat triangles with outward unit normals.
Sphere meshes start from a regular octahedron so that the triangle count is
exactly ``8 * 4**level``; refinement splits every triangle into four via
edge midpoints projected back onto the unit sphere.

Two basis families are supported: piecewise constants (one function per
triangle, characteristic point at the centroid) and continuous piecewise
linears (one hat function per vertex, characteristic point at the vertex).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BasisKind(enum.Enum):
    PIECEWISE_CONSTANT = "piecewise_constant"
    PIECEWISE_LINEAR = "piecewise_linear_continuous"


@dataclass(frozen=True)
class SurfaceMesh:
    """Closed orientable triangle mesh.

    Attributes
    ----------
    vertices : (nv, 3) float array
    triangles : (nt, 3) int array, counterclockwise seen from outside
    normals : (nt, 3) outward unit normals
    areas : (nt,) positive triangle areas
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray
    areas: np.ndarray

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def triangle_corners(self, tri_ids=None) -> np.ndarray:
        """Corner coordinates, shape (nt, 3 corners, 3 coords)."""
        tris = self.triangles if tri_ids is None else self.triangles[tri_ids]
        return self.vertices[tris]

    def centroids(self) -> np.ndarray:
        return self.triangle_corners().mean(axis=1)

    def translated(self, shift) -> "SurfaceMesh":
        """Same mesh with all vertices shifted by a constant vector."""
        return SurfaceMesh(self.vertices + np.asarray(shift, dtype=float),
                           self.triangles, self.normals, self.areas)


def mesh_from_arrays(vertices, triangles) -> SurfaceMesh:
    """Build a mesh, deriving normals and areas from the vertex data.

    Triangles are expected counterclockwise seen from outside, so the
    cross product of the first two edges points outward.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    corners = vertices[triangles]
    cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    norms = np.linalg.norm(cross, axis=1)
    if np.any(norms <= 0.0):
        raise ValueError("degenerate (zero-area) triangle in mesh")
    return SurfaceMesh(vertices, triangles, cross / norms[:, None], 0.5 * norms)


_OCTAHEDRON_VERTICES = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)

_OCTAHEDRON_FACES = np.array(
    [
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ],
    dtype=np.int64,
)


def make_sphere_mesh(refinement_level: int) -> SurfaceMesh:
    """Triangulate the unit sphere with ``8 * 4**refinement_level`` triangles.

    Starts from the regular octahedron inscribed in the unit sphere and
    refines by splitting every triangle into four; new vertices are edge
    midpoints projected radially onto the sphere.  Midpoints are
    deduplicated by sorted vertex-index pairs, never by coordinates, so the
    mesh stays exactly closed.
    """
    if refinement_level < 0 or refinement_level > 10:
        raise ValueError("refinement_level must be in 0..10")
    vertices = [v for v in _OCTAHEDRON_VERTICES]
    faces = _OCTAHEDRON_FACES
    for _ in range(refinement_level):
        midpoint_of: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            idx = midpoint_of.get(key)
            if idx is None:
                m = vertices[a] + vertices[b]
                m = m / np.linalg.norm(m)
                idx = len(vertices)
                vertices.append(m)
                midpoint_of[key] = idx
            return idx

        new_faces = np.empty((4 * len(faces), 3), dtype=np.int64)
        for f, (a, b, c) in enumerate(faces):
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces[4 * f + 0] = (a, ab, ca)
            new_faces[4 * f + 1] = (ab, b, bc)
            new_faces[4 * f + 2] = (ca, bc, c)
            new_faces[4 * f + 3] = (ab, bc, ca)
        faces = new_faces
    return mesh_from_arrays(np.array(vertices), faces)


@dataclass(frozen=True)
class BasisFamily:
    """A Galerkin basis family over a mesh.

    Supports are stored in CSR form: the support of function ``i`` is
    ``support_tris[support_ptr[i]:support_ptr[i+1]]``.  For the linear
    family ``support_slots`` gives, per incident triangle, the local corner
    index (0..2) of the owning vertex.
    """

    kind: BasisKind
    mesh: SurfaceMesh
    characteristic_points: np.ndarray
    support_ptr: np.ndarray
    support_tris: np.ndarray
    support_slots: np.ndarray | None = None
    support_bounds: np.ndarray = field(default=None, repr=False)  # (n, 2, 3)

    @property
    def size(self) -> int:
        return len(self.characteristic_points)

    def support(self, i: int) -> np.ndarray:
        """Triangle ids making up the support of basis function ``i``."""
        return self.support_tris[self.support_ptr[i]:self.support_ptr[i + 1]]

    def slots(self, i: int) -> np.ndarray:
        return self.support_slots[self.support_ptr[i]:self.support_ptr[i + 1]]


def make_basis(mesh: SurfaceMesh, kind: BasisKind) -> BasisFamily:
    """Create the piecewise-constant or continuous piecewise-linear family."""
    nt = mesh.num_triangles
    corners = mesh.triangle_corners()
    if kind is BasisKind.PIECEWISE_CONSTANT:
        points = corners.mean(axis=1)
        ptr = np.arange(nt + 1, dtype=np.int64)
        tris = np.arange(nt, dtype=np.int64)
        slots = None
        bounds = np.stack([corners.min(axis=1), corners.max(axis=1)], axis=1)
    elif kind is BasisKind.PIECEWISE_LINEAR:
        nv = mesh.num_vertices
        points = mesh.vertices.copy()
        tri_flat = np.repeat(np.arange(nt, dtype=np.int64), 3)
        slot_flat = np.tile(np.arange(3, dtype=np.int64), nt)
        vert_flat = mesh.triangles.reshape(-1)
        order = np.argsort(vert_flat, kind="stable")
        tris = tri_flat[order]
        slots = slot_flat[order]
        counts = np.bincount(vert_flat, minlength=nv)
        ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        bounds = np.empty((nv, 2, 3))
        sup_corners = corners[tris]  # (3*nt, 3, 3) grouped by vertex
        lo = np.minimum.reduceat(sup_corners.min(axis=1), ptr[:-1])
        hi = np.maximum.reduceat(sup_corners.max(axis=1), ptr[:-1])
        bounds[:, 0], bounds[:, 1] = lo, hi
    else:
        raise ValueError(f"unknown basis kind: {kind}")
    return BasisFamily(kind, mesh, points, ptr, tris, slots, bounds)


def evaluate_basis(family: BasisFamily, i: int, triangle_id: int, barycentric) -> float:
    """Evaluate basis function ``i`` at a point of triangle ``triangle_id``.

    ``barycentric`` holds the coordinates with respect to the triangle's
    stored vertex order.  Constants return 1 on their own triangle and 0
    elsewhere; linears return the barycentric coordinate of the owning
    vertex on incident triangles and 0 elsewhere.
    """
    if family.kind is BasisKind.PIECEWISE_CONSTANT:
        return 1.0 if triangle_id == i else 0.0
    sup = family.support(i)
    pos = np.nonzero(sup == triangle_id)[0]
    if len(pos) == 0:
        return 0.0
    slot = family.slots(i)[pos[0]]
    return float(barycentric[slot])


def save_mesh(mesh: SurfaceMesh, path) -> None:
    """Write the mesh in the plain-text ``v x y z`` / ``t i j k`` format."""
    with open(path, "w", encoding="ascii") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in mesh.triangles:
            fh.write(f"t {t[0]} {t[1]} {t[2]}\n")


def load_mesh(path) -> SurfaceMesh:
    """Read a mesh written by :func:`save_mesh` (0-based indices)."""
    vertices, triangles = [], []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "t":
                triangles.append([int(x) for x in parts[1:4]])
            else:
                raise ValueError(f"unrecognized record: {line!r}")
    return mesh_from_arrays(np.array(vertices), np.array(triangles, dtype=np.int64))
