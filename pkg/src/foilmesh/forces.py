"""Elastic, pressure and damping forces plus the matching spring energy."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEdgeError, InvalidParameterError, StructuralError
from .geometry import SpatialIndex, TriMesh, degenerate_area_threshold, enclosed_volume, unique_edges

# Edge lengths below this fraction of the bbox diagonal are treated as collapsed.
DEGENERATE_LENGTH_EPS = 1e-12
# rest length / seed length used by the reconstruction pipeline
DEFAULT_CONTRACTION = 0.5


@dataclass
class MaterialParams:
    """Material constants.

    ``pressure_p`` acts along outward face normals: a negative value
    contracts a closed surface, a positive one inflates it. The default
    pairs mild inflation with pre-tensioned springs (see
    :attr:`RestState.contraction_scale`) so the foil stays in tension. The
    reconstruction pipeline normally derives the pressure from
    :func:`fold_pressure` instead of using this default.
    """

    k_base: float = 1.0
    damping_c: float = 1.0
    pressure_p: float = 4.0
    mass_m: float = 1.0
    distance_factor_strength: float = 0.05

    def __post_init__(self):
        if not self.k_base > 0:
            raise InvalidParameterError(f"k_base must be > 0, got {self.k_base}")
        if not self.mass_m > 0:
            raise InvalidParameterError(f"mass_m must be > 0, got {self.mass_m}")
        if not self.damping_c >= 0:
            raise InvalidParameterError(f"damping_c must be >= 0, got {self.damping_c}")
        if not self.distance_factor_strength >= 0:
            raise InvalidParameterError("distance_factor_strength must be >= 0")
        if not math.isfinite(self.pressure_p):
            raise InvalidParameterError("pressure_p must be finite")


@dataclass
class RestState:
    """Rest length per undirected edge; ``edges`` is sorted and unique."""

    edges: np.ndarray
    rest_lengths: np.ndarray
    contraction_scale: float = 1.0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.rest_lengths = np.asarray(self.rest_lengths, dtype=np.float64).reshape(-1)
        if len(self.edges) != len(self.rest_lengths):
            raise StructuralError("one rest length per edge required")
        if np.any(self.rest_lengths <= 0):
            raise StructuralError("rest lengths must be positive")
        if not 0 < self.contraction_scale <= 1:
            raise InvalidParameterError("contraction_scale must lie in (0, 1]")

    @classmethod
    def from_mesh(cls, mesh: TriMesh, contraction_scale: float = 1.0) -> "RestState":
        edges = unique_edges(mesh.faces)
        return cls(edges, edge_lengths(mesh.positions, edges) * contraction_scale, contraction_scale)

    def remapped(self, mesh: TriMesh, old_to_new=None) -> "RestState":
        """Rest state for the current edges of ``mesh``.

        Edges that survive a re-indexing (``old_to_new``, -1 for dropped
        vertices) keep their rest length; new edges take their current
        length times ``contraction_scale``.
        """
        edges = unique_edges(mesh.faces)
        n = mesh.n_vertices
        old = self.edges
        if old_to_new is not None:
            old = np.asarray(old_to_new)[old]
            keep = np.all(old >= 0, axis=1)
            old = np.sort(old[keep], axis=1)
            lengths = self.rest_lengths[keep]
        else:
            lengths = self.rest_lengths
        old_keys = old[:, 0] * n + old[:, 1]
        order = np.argsort(old_keys, kind="stable")
        old_keys, lengths = old_keys[order], lengths[order]
        keys = edges[:, 0] * n + edges[:, 1]
        pos = np.searchsorted(old_keys, keys)
        pos_c = np.minimum(pos, max(len(old_keys) - 1, 0))
        hit = (pos < len(old_keys)) & (old_keys[pos_c] == keys) if len(old_keys) else np.zeros(len(keys), bool)
        rest = edge_lengths(mesh.positions, edges) * self.contraction_scale
        rest[hit] = lengths[pos_c[hit]]
        return RestState(edges, rest, self.contraction_scale)


def edge_lengths(positions: np.ndarray, edges: np.ndarray) -> np.ndarray:
    return np.linalg.norm(positions[edges[:, 1]] - positions[edges[:, 0]], axis=1)


def effective_stiffness(r, params: MaterialParams, d: float):
    """Stiffness at distance ``r`` from the nearest fixed vertex."""
    return params.k_base / (1.0 + params.distance_factor_strength * np.asarray(r) / d)


def fixed_index(mesh: TriMesh) -> SpatialIndex:
    idx = mesh.fixed_indices
    return SpatialIndex(mesh.positions[idx], idx)


def edge_stiffness(mesh: TriMesh, edges: np.ndarray, params: MaterialParams, d: float) -> np.ndarray:
    """Per-edge ``k_ij`` evaluated at the edge midpoint."""
    if params.distance_factor_strength == 0 or not mesh.fixed.any():
        return np.full(len(edges), float(params.k_base))
    mid = 0.5 * (mesh.positions[edges[:, 0]] + mesh.positions[edges[:, 1]])
    r = fixed_index(mesh).distances(mid)
    return effective_stiffness(r, params, d)


def _chunks(n, workers):
    bounds = np.linspace(0, n, max(1, workers) + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def _map_chunks(fn, n, workers):
    parts = _chunks(n, workers)
    if workers <= 1 or n == 0:
        return [fn(s) for s in parts]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, parts))


def _scatter(n, idx, vec):
    # bincount accumulates in input order, so the result is independent of
    # how the per-element buffers were produced
    return np.column_stack([np.bincount(idx, weights=vec[:, k], minlength=n) for k in range(3)])


def _edge_terms(mesh, rest, params, d, stiffness):
    x = mesh.positions
    e = rest.edges
    if stiffness is None:
        stiffness = edge_stiffness(mesh, e, params, d)
    delta = x[e[:, 1]] - x[e[:, 0]]
    length = np.linalg.norm(delta, axis=1)
    tol = DEGENERATE_LENGTH_EPS * max(mesh.bbox_diagonal(), 1e-300)
    bad = np.flatnonzero(length < tol)
    if len(bad):
        i, j = e[bad[0]]
        raise DegenerateEdgeError(f"edge ({i}, {j}) has collapsed to length {length[bad[0]]:.3g}")
    return delta, length, stiffness


def elastic_forces(mesh: TriMesh, rest: RestState, params: MaterialParams, d: float,
                   stiffness=None, workers: int = 1) -> np.ndarray:
    """Spring forces with strain normalised by the rest length.

    ``stiffness`` overrides the per-edge ``k_ij`` (otherwise derived from the
    distance decay). Output is bitwise independent of ``workers``.
    """
    delta, length, k = _edge_terms(mesh, rest, params, d, stiffness)
    L = rest.rest_lengths

    def block(s):
        scale = k[s] * (length[s] - L[s]) / (L[s] * length[s])
        return delta[s] * scale[:, None]

    f = np.concatenate(_map_chunks(block, len(L), workers)) if len(L) else np.zeros((0, 3))
    idx = np.concatenate([rest.edges[:, 0], rest.edges[:, 1]])
    return _scatter(mesh.n_vertices, idx, np.concatenate([f, -f]))


def spring_energy(mesh: TriMesh, rest: RestState, params: MaterialParams, d: float,
                  stiffness=None) -> float:
    """Sum over edges of ``k (l - L)^2 / (2 L)``; its negative gradient is the elastic force."""
    _, length, k = _edge_terms(mesh, rest, params, d, stiffness)
    L = rest.rest_lengths
    return float(np.sum(0.5 * k * (length - L) ** 2 / L))


def pressure_forces(mesh: TriMesh, params: MaterialParams, workers: int = 1,
                    return_degenerate: bool = False):
    """Uniform pressure: each face adds ``p * n * A / 3`` to its three corners.

    Faces below the degeneracy area are skipped; with ``return_degenerate``
    their count is returned as a second value.
    """
    n = mesh.n_vertices
    faces = mesh.faces
    if len(faces) == 0 or params.pressure_p == 0:
        out = np.zeros((n, 3))
        return (out, 0) if return_degenerate else out
    x = mesh.positions
    thresh = degenerate_area_threshold(mesh)

    def block(s):
        p = x[faces[s]]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        area = 0.5 * np.linalg.norm(cross, axis=1)
        ok = area > thresh
        # n * A = cross / 2
        contrib = np.where(ok[:, None], params.pressure_p * cross / 6.0, 0.0)
        return contrib, int(np.sum(~ok))

    parts = _map_chunks(block, len(faces), workers)
    contrib = np.concatenate([c for c, _ in parts])
    n_bad = sum(b for _, b in parts)
    idx = faces.T.ravel()
    out = _scatter(n, idx, np.concatenate([contrib, contrib, contrib]))
    return (out, n_bad) if return_degenerate else out


def total_forces(mesh: TriMesh, rest: RestState, params: MaterialParams, d: float,
                 velocities, workers: int = 1, return_degenerate: bool = False):
    v = np.asarray(velocities, dtype=np.float64)
    if v.shape != (mesh.n_vertices, 3):
        raise StructuralError(
            f"velocity array shape {v.shape} does not match {mesh.n_vertices} vertices"
        )
    fp, n_bad = pressure_forces(mesh, params, workers, return_degenerate=True)
    f = elastic_forces(mesh, rest, params, d, workers=workers) + fp - params.damping_c * v
    f[mesh.fixed] = 0.0
    return (f, n_bad) if return_degenerate else f


def kinetic_energy(velocities, params: MaterialParams) -> float:
    v = np.asarray(velocities)
    return float(0.5 * params.mass_m * np.sum(v * v))


def fold_pressure(mesh: TriMesh, contraction_scale: float, k_base: float = 1.0) -> float:
    """Largest pressure a uniformly scaled copy of ``mesh`` can hold in balance.

    Scale the mesh by ``rho`` with every rest length equal to
    ``contraction_scale`` times its current length. Spring tension and
    pressure balance when ``p = k * sum(l) * (rho - s) / (3 * s * V * rho**2)``,
    with ``sum(l)`` the total edge length and ``V`` the enclosed volume. The
    right-hand side peaks at ``rho = 2 s``. Above that value the foil has no
    equilibrium and inflates without bound.
    """
    s = float(contraction_scale)
    volume = enclosed_volume(mesh)
    if not volume > 0:
        raise StructuralError("fold pressure needs a closed, outward-wound mesh")
    total = float(edge_lengths(mesh.positions, unique_edges(mesh.faces)).sum())
    return k_base * total / (12.0 * s * s * volume)


def critical_damping(params: MaterialParams) -> float:
    return 2.0 * math.sqrt(params.k_base * params.mass_m)
