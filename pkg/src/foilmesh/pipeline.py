"""End-to-end reconstruction: seed, contract, snap, smooth."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import io, refine
from .config import RunConfig
from .errors import EmptyConstraintError, InsufficientInputError
from .forces import MaterialParams, RestState, fold_pressure
from .geometry import TriMesh, average_nn_distance
from .integrator import SimState, auto_dt, omega_max_estimate, run_simulation
from .seed import build_initial_mesh, enclosing_sphere

log = logging.getLogger(__name__)


@dataclass
class Reconstruction:
    mesh: TriMesh
    reason: str
    history: list
    rest: RestState
    spacing: float
    dt: float
    initial_mesh: TriMesh
    params: MaterialParams

    @property
    def converged(self) -> bool:
        return self.reason == "converged"


def fixed_points_for(config: RunConfig) -> np.ndarray:
    if config.input_path:
        return io.load_points(config.input_path, config.input_format)
    return io.box_scenario(config.box_side, config.box_inset, config.box_top_bottom)


def initial_state(fixed_points, config: RunConfig):
    """Seed mesh, its average spacing ``d`` and the pre-tensioned rest state."""
    pts = np.asarray(fixed_points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyConstraintError("reconstruction needs at least one fixed point")
    if not np.all(np.isfinite(pts)):
        raise InsufficientInputError("fixed points must be finite")
    n = int(config.point_count)
    mesh = build_initial_mesh(pts, n, config.margin_factor)
    if config.init_refine_levels:
        sphere = enclosing_sphere(pts, config.margin_factor, n)
        for _ in range(int(config.init_refine_levels)):
            mesh, _ = refine.subdivide(mesh)
            mesh = refine.project_to_sphere(mesh, sphere)
    foil = mesh.referenced() & ~mesh.fixed
    d = average_nn_distance(mesh.positions[foil])
    return mesh, d, RestState.from_mesh(mesh, config.contraction_scale)


def material_for(mesh: TriMesh, config: RunConfig) -> MaterialParams:
    """Material constants with the pressure resolved against the seed mesh."""
    fold = fold_pressure(mesh, config.contraction_scale, config.k_base)
    if config.pressure_p is None:
        return config.material(config.pressure_ratio * fold)
    if config.pressure_p >= fold:
        log.warning("pressure %.6g is at or above the fold pressure %.6g; the foil will "
                    "keep inflating", config.pressure_p, fold)
    return config.material()


def cfl_summary(mesh: TriMesh, rest: RestState, params: MaterialParams, d: float):
    """``(omega_max bound, admissible dt limit, automatic dt)``."""
    omega = omega_max_estimate(mesh, rest, params, d, uniform=True)
    limit = 2.0 / omega if omega > 0 else float("inf")
    return omega, limit, auto_dt(omega)


def reconstruct(fixed_points, config: RunConfig | None = None, on_stats=None,
                on_snapshot=None) -> Reconstruction:
    config = (config or RunConfig()).validate()
    mesh, d, rest = initial_state(fixed_points, config)
    params = material_for(mesh, config)
    # a point near a face centre is about spacing / sqrt(3) from every vertex
    if d > math.sqrt(3.0) * config.snapping_tolerance:
        log.warning("vertex spacing %.4g exceeds sqrt(3) times the snapping tolerance %.4g; "
                    "the foil can sweep past a fixed point without a vertex landing near it",
                    d, config.snapping_tolerance)
    sim = config.sim()
    dt = sim.dt if sim.dt is not None else cfl_summary(mesh, rest, params, d)[2]
    sim.dt = dt
    log.info("seed: %d vertices, %d faces, d=%.6g, p=%.6g, dt=%.6g", mesh.n_vertices, mesh.n_faces,
             d, params.pressure_p, dt)
    state, reason, rest = run_simulation(
        SimState(mesh), params, rest, config.snap(), sim, d,
        on_stats=on_stats, on_snapshot=on_snapshot, workers=int(config.workers),
    )
    log.info("finished after %d iterations: %s", state.iteration, reason)
    return Reconstruction(state.mesh, reason, state.stats_history, rest, d, dt, mesh, params)
