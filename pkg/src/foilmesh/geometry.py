"""Triangle mesh container, adjacency, spatial queries and basic measurements."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateFaceError,
    EmptyConstraintError,
    InsufficientInputError,
    StructuralError,
)

# Relative to the squared bounding-box diagonal.
DEGENERATE_AREA_EPS = 1e-12


@dataclass
class TriMesh:
    """Vertex positions, CCW triangle faces and a per-vertex fixed mask.

    Fixed vertices may exist without any incident face; they are snapping
    targets until a foil vertex is merged onto them.
    """

    positions: np.ndarray
    faces: np.ndarray
    fixed: np.ndarray = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        n = len(self.positions)
        if self.fixed is None:
            self.fixed = np.zeros(n, dtype=bool)
        else:
            fixed = np.asarray(self.fixed)
            if fixed.dtype != bool:
                mask = np.zeros(n, dtype=bool)
                mask[fixed.astype(np.int64)] = True
                fixed = mask
            self.fixed = fixed.copy()
        if self.fixed.shape != (n,):
            raise StructuralError("fixed mask length must equal vertex count")

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def fixed_indices(self) -> np.ndarray:
        return np.flatnonzero(self.fixed)

    def referenced(self) -> np.ndarray:
        """Boolean mask of vertices used by at least one face."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.faces.ravel()] = True
        return mask

    def bbox_diagonal(self) -> float:
        if self.n_vertices == 0:
            return 0.0
        return float(np.linalg.norm(self.positions.max(0) - self.positions.min(0)))

    def validate(self) -> None:
        """Raise :class:`StructuralError` on out-of-range or repeated face indices."""
        if self.n_faces == 0:
            return
        f = self.faces
        if f.min() < 0 or f.max() >= self.n_vertices:
            raise StructuralError(
                f"face index out of range [0, {self.n_vertices})"
            )
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise StructuralError("face references the same vertex twice")
        if not np.all(np.isfinite(self.positions)):
            raise StructuralError("non-finite vertex position")

    def copy(self) -> "TriMesh":
        return TriMesh(self.positions.copy(), self.faces.copy(), self.fixed.copy())

    def with_positions(self, positions) -> "TriMesh":
        return TriMesh(positions, self.faces, self.fixed)


@dataclass
class Adjacency:
    neighbors: list
    vertex_faces: list
    edges: np.ndarray = field(repr=False)


def unique_edges(faces: np.ndarray) -> np.ndarray:
    """Sorted, deduplicated undirected edges ``(i, j)`` with ``i < j``."""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(faces) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def edge_face_counts(faces: np.ndarray):
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(faces) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0, return_counts=True)


def build_adjacency(mesh: TriMesh) -> Adjacency:
    mesh.validate()
    n = mesh.n_vertices
    edges = unique_edges(mesh.faces)
    nbrs = [[] for _ in range(n)]
    for i, j in edges.tolist():
        nbrs[i].append(j)
        nbrs[j].append(i)
    vfaces = [[] for _ in range(n)]
    for fi, tri in enumerate(mesh.faces.tolist()):
        for v in tri:
            vfaces[v].append(fi)
    return Adjacency([sorted(x) for x in nbrs], vfaces, edges)


def face_normals_areas(positions: np.ndarray, faces: np.ndarray):
    """Unit normals and areas for all faces; degenerate faces get a zero normal."""
    p = positions[faces]
    cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    norm = np.linalg.norm(cross, axis=1)
    areas = 0.5 * norm
    normals = np.zeros_like(cross)
    ok = norm > 0
    normals[ok] = cross[ok] / norm[ok, None]
    return normals, areas


def enclosed_volume(mesh: TriMesh) -> float:
    """Signed volume of a closed, outward-wound mesh (divergence theorem)."""
    p = mesh.positions[mesh.faces]
    return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)


def degenerate_area_threshold(mesh: TriMesh) -> float:
    return DEGENERATE_AREA_EPS * mesh.bbox_diagonal() ** 2


def face_normal_area(mesh: TriMesh, face_index: int):
    """Return ``(unit_normal, area)`` of one face.

    Raises :class:`DegenerateFaceError` when the area is below the
    degeneracy threshold.
    """
    a, b, c = mesh.positions[mesh.faces[face_index]]
    cross = np.cross(b - a, c - a)
    norm = float(np.linalg.norm(cross))
    area = 0.5 * norm
    if area <= degenerate_area_threshold(mesh) or norm == 0.0:
        raise DegenerateFaceError(f"face {face_index} is degenerate (area {area:.3g})")
    return cross / norm, area


def average_nn_distance(points) -> float:
    """Mean distance from each point to its nearest other point."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 2:
        raise InsufficientInputError("need at least two points")
    _, idx = cKDTree(pts).query(pts, k=2)
    nn = idx[:, 1]
    # recompute so the value does not depend on the tree's arithmetic
    return float(np.mean(np.linalg.norm(pts - pts[nn], axis=1)))


class SpatialIndex:
    """Nearest-neighbour index over a fixed point set.

    Results match a linear scan, ties going to the lowest id.
    """

    def __init__(self, points, ids=None):
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.ids = (
            np.arange(len(self.points)) if ids is None else np.asarray(ids, dtype=np.int64)
        )
        self._tree = cKDTree(self.points) if len(self.points) else None

    def __len__(self):
        return len(self.points)

    def nearest(self, query):
        if self._tree is None:
            raise EmptyConstraintError("no fixed vertices to query")
        q = np.asarray(query, dtype=np.float64)
        d, _ = self._tree.query(q, k=1)
        cand = self._tree.query_ball_point(q, r=d * (1 + 1e-9) + 1e-300)
        cand = np.sort(np.asarray(cand, dtype=np.int64))
        dist = np.linalg.norm(self.points[cand] - q, axis=1)
        best = dist == dist.min()
        ids = self.ids[cand[best]]
        return int(ids.min()), float(dist[best][0])

    def distances(self, queries) -> np.ndarray:
        """Nearest distances for many queries (no index resolution)."""
        if self._tree is None:
            raise EmptyConstraintError("no fixed vertices to query")
        d, _ = self._tree.query(np.asarray(queries, dtype=np.float64).reshape(-1, 3), k=1)
        return np.asarray(d, dtype=np.float64)


def nearest_fixed(index: SpatialIndex, query):
    return index.nearest(query)


@dataclass
class WatertightReport:
    is_closed: bool
    euler_characteristic: int
    boundary_edge_count: int
    nonmanifold_edge_count: int = 0


def watertight_check(mesh: TriMesh) -> WatertightReport:
    """Closure report; the vertex count only includes face-referenced vertices."""
    edges, counts = edge_face_counts(mesh.faces)
    v = int(mesh.referenced().sum())
    e = len(edges)
    f = mesh.n_faces
    boundary = int(np.sum(counts == 1))
    nonmanifold = int(np.sum(counts > 2))
    closed = f > 0 and boundary == 0 and nonmanifold == 0
    return WatertightReport(bool(closed), v - e + f, boundary, nonmanifold)
