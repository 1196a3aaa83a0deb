"""Mesh quality upkeep: constrained Laplacian smoothing, midpoint subdivision,
angle and self-intersection checks, and projection back onto the seed sphere."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, ProjectionError, StructuralError
from .geometry import TriMesh, unique_edges, watertight_check

DEGENERATE_ANGLE_DEG = 1.0
_MAX_CELLS_PER_FACE = 64


@dataclass
class QualityReport:
    min_angle_deg: float
    degenerate_faces: list
    self_intersections: list = field(default_factory=list)
    is_closed: bool = False


def umbrella(positions: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Per-vertex sum of ``x_j - x_i`` over neighbours."""
    n = len(positions)
    d = positions[edges[:, 1]] - positions[edges[:, 0]]
    idx = np.concatenate([edges[:, 0], edges[:, 1]])
    vec = np.concatenate([d, -d])
    return np.column_stack([np.bincount(idx, weights=vec[:, k], minlength=n) for k in range(3)])


def laplacian_smooth(mesh: TriMesh, lam: float, rounds: int = 1) -> TriMesh:
    """Jacobi Laplacian smoothing ``x += lam * sum_j (x_j - x_i)``; fixed vertices stay put.

    The update uses the neighbour sum, not the mean, so it is a convex
    combination only while ``lam * degree <= 1``.
    """
    if not 0 < lam < 1:
        raise InvalidParameterError(f"smoothing lambda must lie in (0, 1), got {lam}")
    edges = unique_edges(mesh.faces)
    x = mesh.positions.copy()
    free = ~mesh.fixed
    for _ in range(int(rounds)):
        step = lam * umbrella(x, edges)
        x[free] += step[free]
    return mesh.with_positions(x)


def subdivide(mesh: TriMesh):
    """1-to-4 midpoint split.

    Returns ``(mesh, midpoints)`` where ``midpoints`` maps each original edge
    ``(i, j)``, ``i < j``, to the index of its new midpoint vertex.
    """
    report = watertight_check(mesh)
    if not report.is_closed:
        raise StructuralError("subdivision requires a closed mesh")
    edges = unique_edges(mesh.faces)
    n = mesh.n_vertices
    mid_pos = 0.5 * (mesh.positions[edges[:, 0]] + mesh.positions[edges[:, 1]])
    keys = edges[:, 0] * n + edges[:, 1]

    def mid(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return n + np.searchsorted(keys, lo * n + hi)

    a, b, c = mesh.faces.T
    ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
    faces = np.stack(
        [
            np.column_stack([a, ab, ca]),
            np.column_stack([ab, b, bc]),
            np.column_stack([ca, bc, c]),
            np.column_stack([ab, bc, ca]),
        ],
        axis=1,
    ).reshape(-1, 3)
    positions = np.vstack([mesh.positions, mid_pos])
    fixed = np.concatenate([mesh.fixed, np.zeros(len(edges), dtype=bool)])
    midpoints = {(int(i), int(j)): n + k for k, (i, j) in enumerate(edges.tolist())}
    return TriMesh(positions, faces, fixed), midpoints


def face_angles(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Interior angles in degrees, shape ``(F, 3)``."""
    p = positions[faces]
    out = np.empty((len(faces), 3))
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        s = np.linalg.norm(np.cross(u, v), axis=1)
        out[:, k] = np.degrees(np.arctan2(s, np.einsum("ij,ij->i", u, v)))
    return out


def min_angle(mesh: TriMesh, check_intersections: bool = False) -> QualityReport:
    if mesh.n_faces == 0:
        return QualityReport(0.0, [], [], False)
    theta = face_angles(mesh.positions, mesh.faces).min(axis=1)
    bad = np.flatnonzero(theta < DEGENERATE_ANGLE_DEG).tolist()
    inter = self_intersection_scan(mesh) if check_intersections else []
    return QualityReport(float(theta.min()), bad, inter, watertight_check(mesh).is_closed)


def project_to_sphere(mesh: TriMesh, sphere) -> TriMesh:
    """Push every non-fixed vertex radially onto ``sphere``."""
    c = np.asarray(sphere.center, dtype=np.float64)
    x = mesh.positions.copy()
    free = ~mesh.fixed
    rel = x[free] - c
    r = np.linalg.norm(rel, axis=1)
    if np.any(r == 0):
        raise ProjectionError("vertex at the sphere centre has no projection direction")
    x[free] = c + sphere.radius * rel / r[:, None]
    return mesh.with_positions(x)


def _tri_tri_overlap(A: np.ndarray, B: np.ndarray, tol: float) -> np.ndarray:
    # Separating-axis test for K triangle pairs; A, B have shape (K, 3, 3).
    ea = np.stack([A[:, 1] - A[:, 0], A[:, 2] - A[:, 1], A[:, 0] - A[:, 2]], axis=1)
    eb = np.stack([B[:, 1] - B[:, 0], B[:, 2] - B[:, 1], B[:, 0] - B[:, 2]], axis=1)
    na = np.cross(ea[:, 0], -ea[:, 2])
    nb = np.cross(eb[:, 0], -eb[:, 2])
    axes = [na, nb]
    for i in range(3):
        for j in range(3):
            axes.append(np.cross(ea[:, i], eb[:, j]))
        # in-plane axes handle the coplanar case
        axes.append(np.cross(na, ea[:, i]))
        axes.append(np.cross(nb, eb[:, i]))
    hit = np.ones(len(A), dtype=bool)
    for ax in axes:
        norm = np.linalg.norm(ax, axis=1)
        ok = norm > 1e-300
        u = np.zeros_like(ax)
        u[ok] = ax[ok] / norm[ok, None]
        pa = np.einsum("kvi,ki->kv", A, u)
        pb = np.einsum("kvi,ki->kv", B, u)
        sep = (pa.max(1) <= pb.min(1) + tol) | (pb.max(1) <= pa.min(1) + tol)
        hit &= ~(sep & ok)
    return hit


def self_intersection_scan(mesh: TriMesh) -> list:
    """Pairs ``(f, g)``, ``f < g``, of vertex-disjoint faces whose triangles intersect."""
    F = mesh.n_faces
    if F < 2:
        return []
    tri = mesh.positions[mesh.faces]
    lo, hi = tri.min(axis=1), tri.max(axis=1)
    scale = max(mesh.bbox_diagonal(), 1e-300)
    cell = max(float(np.median((hi - lo).max(axis=1))), 1e-9 * scale)
    origin = lo.min(axis=0)
    clo = np.floor((lo - origin) / cell).astype(np.int64)
    chi = np.floor((hi - origin) / cell).astype(np.int64)
    span = np.prod(chi - clo + 1, axis=1)
    big = np.flatnonzero(span > _MAX_CELLS_PER_FACE)
    buckets = defaultdict(list)
    for f in np.flatnonzero(span <= _MAX_CELLS_PER_FACE).tolist():
        (x0, y0, z0), (x1, y1, z1) = clo[f], chi[f]
        for i in range(x0, x1 + 1):
            for j in range(y0, y1 + 1):
                for k in range(z0, z1 + 1):
                    buckets[(i, j, k)].append(f)
    pairs = set()
    for members in buckets.values():
        m = len(members)
        for s in range(m):
            for t in range(s + 1, m):
                pairs.add((members[s], members[t]))
    # oversized faces skip the grid and are paired with everything
    for f in big.tolist():
        for g in range(F):
            if g != f:
                pairs.add((min(f, g), max(f, g)))
    if not pairs:
        return []
    P = np.array(sorted(pairs), dtype=np.int64)
    f, g = P[:, 0], P[:, 1]
    box = np.all((lo[f] <= hi[g]) & (lo[g] <= hi[f]), axis=1)
    fa, fb = mesh.faces[f], mesh.faces[g]
    shared = (fa[:, :, None] == fb[:, None, :]).any(axis=(1, 2))
    keep = box & ~shared
    P = P[keep]
    if len(P) == 0:
        return []
    hit = _tri_tri_overlap(tri[P[:, 0]], tri[P[:, 1]], 1e-12 * scale)
    return [(int(a), int(b)) for a, b in P[hit]]
