"""Spherical seed mesh: Fibonacci lattice, incremental convex hull, enclosing sphere."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, EmptyConstraintError, InvalidSpecError
from .geometry import TriMesh

DEFAULT_MARGIN = 1.3


@dataclass(frozen=True)
class SphereSpec:
    center: tuple
    radius: float
    point_count: int = 500

    def __post_init__(self):
        c = tuple(float(x) for x in np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(self, "center", c)
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidSpecError(f"sphere radius must be > 0, got {self.radius}")
        if int(self.point_count) < 4:
            raise InvalidSpecError(f"point_count must be >= 4, got {self.point_count}")


def fibonacci_lattice(n: int, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Golden-angle spiral points, index ``i = 0 .. n-1`` with a half-step offset."""
    i = np.arange(n, dtype=np.float64)
    phi = np.arccos(1.0 - 2.0 * (i + 0.5) / n)
    theta = np.pi * (1.0 + np.sqrt(5.0)) * i
    pts = np.column_stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)]
    )
    return pts * radius + np.asarray(center, dtype=np.float64)


def fibonacci_sphere(spec: SphereSpec) -> np.ndarray:
    return fibonacci_lattice(int(spec.point_count), spec.radius, spec.center)


class _Hull:
    # Incremental hull with per-face conflict lists. Faces are kept CCW
    # from outside, so (b - a) x (c - a) is the outward normal.

    def __init__(self, pts: np.ndarray, eps: float):
        self.pts = pts
        self.eps = eps
        self.verts = []
        self.normals = []
        self.offsets = []
        self.alive = []
        self.conflict = []
        self.edge_face = {}
        self.queue = []

    def add_faces(self, tris):
        tri = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
        p = self.pts[tri]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        n /= np.linalg.norm(n, axis=1)[:, None]
        off = np.einsum("ij,ij->i", n, p[:, 0])
        fids = []
        for k, (a, b, c) in enumerate(tri.tolist()):
            fid = len(self.verts)
            self.verts.append((a, b, c))
            self.normals.append(n[k])
            self.offsets.append(float(off[k]))
            self.alive.append(True)
            self.conflict.append(np.zeros(0, dtype=np.int64))
            for e in ((a, b), (b, c), (c, a)):
                self.edge_face[e] = fid
            fids.append(fid)
        return fids

    def kill_face(self, fid):
        self.alive[fid] = False
        a, b, c = self.verts[fid]
        for e in ((a, b), (b, c), (c, a)):
            if self.edge_face.get(e) == fid:
                del self.edge_face[e]

    def assign(self, candidates, fids):
        """Give each candidate point to the new face it is furthest outside of."""
        if len(candidates) == 0 or not fids:
            return
        N = np.array([self.normals[f] for f in fids])
        off = np.array([self.offsets[f] for f in fids])
        dist = self.pts[candidates] @ N.T - off
        best = np.argmax(dist, axis=1)
        outside = dist[np.arange(len(candidates)), best] > self.eps
        for k, f in enumerate(fids):
            sel = outside & (best == k)
            if np.any(sel):
                self.conflict[f] = candidates[sel]
                self.queue.append(f)

    def distance(self, fid, idx):
        return self.pts[idx] @ self.normals[fid] - self.offsets[fid]


def _initial_simplex(pts, eps):
    i0 = int(np.argmin(pts[:, 0]))
    d = np.linalg.norm(pts - pts[i0], axis=1)
    i1 = int(np.argmax(d))
    if d[i1] <= eps:
        raise DegenerateInputError("all points coincide")
    u = (pts[i1] - pts[i0]) / d[i1]
    rel = pts - pts[i0]
    line_d = np.linalg.norm(rel - np.outer(rel @ u, u), axis=1)
    i2 = int(np.argmax(line_d))
    if line_d[i2] <= eps:
        raise DegenerateInputError("points are collinear")
    n = np.cross(pts[i1] - pts[i0], pts[i2] - pts[i0])
    n /= np.linalg.norm(n)
    plane_d = rel @ n
    i3 = int(np.argmax(np.abs(plane_d)))
    if abs(plane_d[i3]) <= eps:
        raise DegenerateInputError("points are coplanar")
    return i0, i1, i2, i3, plane_d[i3] > 0


def convex_hull(points) -> TriMesh:
    """Convex hull as a closed, outward-oriented triangle mesh.

    Output vertices are the hull vertices of ``points`` in their input order.
    Raises :class:`DegenerateInputError` for fewer than four points or
    coplanar input.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 4:
        raise DegenerateInputError("convex hull needs at least 4 points")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInputError("non-finite input point")
    scale = max(float(np.linalg.norm(pts.max(0) - pts.min(0))), float(np.abs(pts).max()))
    eps = 1e-11 * scale
    i0, i1, i2, i3, above = _initial_simplex(pts, eps)

    h = _Hull(pts, eps)
    if above:
        # i3 lies on the +normal side of (i0, i1, i2): flip the base
        base = [(i0, i2, i1), (i0, i1, i3), (i1, i2, i3), (i2, i0, i3)]
    else:
        base = [(i0, i1, i2), (i0, i3, i1), (i1, i3, i2), (i2, i3, i0)]
    fids = h.add_faces(base)
    rest = np.setdiff1d(np.arange(len(pts)), [i0, i1, i2, i3])
    h.assign(rest, fids)

    while h.queue:
        f0 = h.queue.pop()
        if not h.alive[f0]:
            continue
        cand = h.conflict[f0]
        dist = h.distance(f0, cand)
        apex = int(cand[int(np.argmax(dist))])

        visible = {f0}
        stack = [f0]
        while stack:
            f = stack.pop()
            a, b, c = h.verts[f]
            for e in ((b, a), (c, b), (a, c)):
                g = h.edge_face.get(e)
                if g is None or g in visible or not h.alive[g]:
                    continue
                if h.distance(g, apex) > eps:
                    visible.add(g)
                    stack.append(g)

        horizon = []
        for f in sorted(visible):
            a, b, c = h.verts[f]
            for e in ((a, b), (b, c), (c, a)):
                if h.edge_face.get((e[1], e[0])) not in visible:
                    horizon.append(e)

        orphans = np.concatenate([h.conflict[f] for f in sorted(visible)])
        for f in visible:
            h.kill_face(f)
        new = h.add_faces([(a, b, apex) for a, b in horizon])
        h.assign(orphans[orphans != apex], new)

    faces = np.array([h.verts[f] for f in range(len(h.verts)) if h.alive[f]], dtype=np.int64)
    used = np.zeros(len(pts), dtype=bool)
    used[faces.ravel()] = True
    remap = np.cumsum(used) - 1
    return TriMesh(pts[used], remap[faces])


def enclosing_sphere(fixed_points, margin_factor: float = DEFAULT_MARGIN, point_count: int = 500) -> SphereSpec:
    """Centroid-centred sphere whose radius is ``margin_factor`` times the largest spread."""
    pts = np.asarray(fixed_points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyConstraintError("no fixed points given")
    if margin_factor < 1:
        raise InvalidSpecError(f"margin_factor must be >= 1, got {margin_factor}")
    center = pts.mean(axis=0)
    spread = float(np.max(np.linalg.norm(pts - center, axis=1)))
    if spread <= 0:
        raise InvalidSpecError("fixed points have zero spread; sphere radius would be 0")
    return SphereSpec(tuple(center), margin_factor * spread, point_count)


def build_initial_mesh(fixed_points, n: int = 500, margin_factor: float = DEFAULT_MARGIN) -> TriMesh:
    """Hull of a Fibonacci lattice on the enclosing sphere.

    The fixed points are appended after the foil vertices as fixed, face-less
    vertices; they become connected only once snapping merges a foil vertex
    onto them.
    """
    fixed_points = np.asarray(fixed_points, dtype=np.float64).reshape(-1, 3)
    spec = enclosing_sphere(fixed_points, margin_factor, n)
    foil = convex_hull(fibonacci_sphere(spec))
    if foil.n_vertices != n:
        raise DegenerateInputError(
            f"lattice hull kept {foil.n_vertices} of {n} points"
        )
    positions = np.vstack([foil.positions, fixed_points])
    fixed = np.zeros(len(positions), dtype=bool)
    fixed[n:] = True
    return TriMesh(positions, foil.faces, fixed)
