"""Fixed-vertex constraints: snapping, post-snap relaxation and the
effectiveness radius of a fixed vertex."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .forces import MaterialParams
from .geometry import SpatialIndex, TriMesh, unique_edges

# stiffness fraction at which a fixed vertex stops mattering
_CUTOFF_FACTOR = 99.0


@dataclass
class SnapConfig:
    snapping_tolerance: float = 0.15
    relaxation_lambda: float = 0.5
    relaxation_rounds: int = 3

    def __post_init__(self):
        if not self.snapping_tolerance > 0:
            raise InvalidParameterError("snapping_tolerance must be > 0")
        if not 0 < self.relaxation_lambda < 1:
            raise InvalidParameterError("relaxation_lambda must lie in (0, 1)")
        if int(self.relaxation_rounds) < 0:
            raise InvalidParameterError("relaxation_rounds must be >= 0")


@dataclass
class SnapReport:
    """Outcome of one snapping pass.

    ``snapped_this_pass`` holds ``(foil, fixed)`` pairs in pre-pass indices;
    ``index_map`` sends pre-pass vertex indices to post-pass ones (-1 for
    foil vertices absorbed into a fixed vertex).
    """

    snapped_this_pass: list = field(default_factory=list)
    total_snapped: int = 0
    unsatisfied_fixed: list = field(default_factory=list)
    index_map: np.ndarray = None


def unsatisfied_targets(mesh: TriMesh) -> np.ndarray:
    """Fixed vertices that no face touches yet."""
    return np.flatnonzero(mesh.fixed & ~mesh.referenced())


def _report(mesh, pairs, index_map):
    pending = unsatisfied_targets(mesh)
    n_fixed = int(mesh.fixed.sum())
    return SnapReport(pairs, n_fixed - len(pending), pending.tolist(), index_map)


def relax(mesh: TriMesh, vertices, lam: float, rounds: int) -> None:
    """Move ``vertices`` toward their 1-ring mean in place (fixed ones excluded)."""
    vertices = np.asarray(vertices, dtype=np.int64)
    vertices = vertices[~mesh.fixed[vertices]]
    if len(vertices) == 0 or rounds == 0:
        return
    edges = unique_edges(mesh.faces)
    n = mesh.n_vertices
    deg = np.bincount(edges.ravel(), minlength=n).astype(np.float64)
    x = mesh.positions
    for _ in range(rounds):
        s = np.column_stack(
            [
                np.bincount(edges[:, 0], weights=x[edges[:, 1], k], minlength=n)
                + np.bincount(edges[:, 1], weights=x[edges[:, 0], k], minlength=n)
                for k in range(3)
            ]
        )
        mean = s[vertices] / deg[vertices, None]
        x[vertices] += lam * (mean - x[vertices])


def snap_pass(mesh: TriMesh, cfg: SnapConfig, index: SpatialIndex | None = None) -> SnapReport:
    """Merge foil vertices onto nearby unsatisfied fixed vertices, in place.

    A foil vertex within ``snapping_tolerance`` of a fixed vertex that has no
    faces yet is absorbed into it: its faces are re-pointed at the fixed
    vertex and it is dropped from the vertex array. Each target takes at
    most one foil vertex per pass, lowest foil index first. The 1-ring of
    each target is then relaxed.
    """
    n = mesh.n_vertices
    identity = np.arange(n)
    targets = unsatisfied_targets(mesh)
    if len(targets) == 0:
        return _report(mesh, [], identity)
    if index is None:
        index = SpatialIndex(mesh.positions[targets], targets)
    targets_set = set(targets.tolist())
    foil = np.flatnonzero(~mesh.fixed & mesh.referenced())
    near = index.distances(mesh.positions[foil])
    # kd distances are only a prefilter; exact ties resolved by index.nearest
    cand = foil[near < cfg.snapping_tolerance * (1 + 1e-9)]
    taken = set()
    pairs = []
    for i in cand.tolist():
        t, dist = index.nearest(mesh.positions[i])
        if dist < cfg.snapping_tolerance and t not in taken and t in targets_set:
            taken.add(t)
            pairs.append((i, t))
    if not pairs:
        return _report(mesh, [], identity)

    faces = mesh.faces.copy()
    keep = np.ones(n, dtype=bool)
    for i, t in pairs:
        faces[faces == i] = t
        keep[i] = False
    index_map = np.where(keep, np.cumsum(keep) - 1, -1)
    mesh.positions = mesh.positions[keep]
    mesh.faces = index_map[faces]
    mesh.fixed = mesh.fixed[keep]

    edges = unique_edges(mesh.faces)
    ring = set()
    for _, t in pairs:
        nt = index_map[t]
        ring.update(edges[edges[:, 0] == nt, 1].tolist())
        ring.update(edges[edges[:, 1] == nt, 0].tolist())
    relax(mesh, sorted(ring), cfg.relaxation_lambda, int(cfg.relaxation_rounds))
    return _report(mesh, pairs, index_map)


def radius_of_effectiveness(params: MaterialParams, d: float, cfg: SnapConfig) -> float:
    """Distance beyond which a fixed vertex has negligible influence."""
    if not d > 0:
        raise InvalidParameterError(f"average spacing d must be > 0, got {d}")
    s = params.distance_factor_strength
    decay = _CUTOFF_FACTOR * d / s if s > 0 else math.inf
    return min(decay, cfg.snapping_tolerance)


def affected_neighbors(params: MaterialParams, d: float, cfg: SnapConfig) -> float:
    """Approximate number of neighbour rings a fixed vertex reaches."""
    if not d > 0:
        raise InvalidParameterError(f"average spacing d must be > 0, got {d}")
    s = params.distance_factor_strength
    decay = _CUTOFF_FACTOR / s if s > 0 else math.inf
    return min(decay, cfg.snapping_tolerance / d)
