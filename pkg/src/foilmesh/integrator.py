"""Damped semi-implicit Euler dynamics, CFL guard and the per-iteration loop."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import constraints, refine
from .errors import CFLViolationError, InvalidParameterError, NumericalDivergenceError, StructuralError
from .forces import MaterialParams, RestState, edge_stiffness, kinetic_energy, spring_energy, total_forces
from .geometry import TriMesh, average_nn_distance

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e3
# fraction of the CFL limit used when dt is chosen automatically
DT_SAFETY = 0.9

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
DIVERGED = "diverged"


@dataclass
class SimConfig:
    """Loop settings. ``dt=None`` picks ``DT_SAFETY`` times the CFL limit."""

    dt: float | None = None
    epsilon: float = 1e-4
    max_iterations: int = 1000
    smooth_every: int = 5
    smooth_lambda: float = 0.05
    smooth_rounds: int = 1
    smooth_threshold: float = 5e-3
    snap_every: int = 1
    refine_every: int = 0
    snapshot_every: int = 0
    cfl_mode: str = "enforce"
    deflate_factor: float = 0.8
    deflate_threshold: float = 1e-3
    deflate_wait: int = 50

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        if not self.epsilon > 0:
            raise InvalidParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.max_iterations) < 1:
            raise InvalidParameterError("max_iterations must be >= 1")
        if int(self.snap_every) < 1:
            raise InvalidParameterError("snap_every must be >= 1")
        for name in ("smooth_every", "refine_every", "snapshot_every", "smooth_rounds", "deflate_wait"):
            if int(getattr(self, name)) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if not self.smooth_threshold >= 0:
            raise InvalidParameterError("smooth_threshold must be >= 0")
        if not 0 < self.smooth_lambda < 1:
            raise InvalidParameterError("smooth_lambda must lie in (0, 1)")
        if not 0 < self.deflate_factor <= 1:
            raise InvalidParameterError("deflate_factor must lie in (0, 1]")
        if not self.deflate_threshold >= 0:
            raise InvalidParameterError("deflate_threshold must be >= 0")
        if self.cfl_mode not in ("enforce", "warn"):
            raise InvalidParameterError(f"cfl_mode must be 'enforce' or 'warn', got {self.cfl_mode!r}")


@dataclass
class IterationStats:
    iteration: int
    max_displacement: float
    mean_nn_distance: float
    spring_energy: float
    kinetic_energy: float
    snapped_count: int
    degenerate_face_count: int


@dataclass
class SimState:
    mesh: TriMesh
    velocities: np.ndarray = None
    iteration: int = 0
    stats_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.velocities is None:
            self.velocities = np.zeros((self.mesh.n_vertices, 3))
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.velocities.shape != (self.mesh.n_vertices, 3):
            raise StructuralError("velocities must match the vertex count")


def omega_max_estimate(mesh: TriMesh, rest: RestState, params: MaterialParams, d: float,
                       uniform: bool = False) -> float:
    """Row-sum upper bound on the highest angular eigenfrequency.

    With ``uniform`` every edge uses ``k_base``, the ceiling of the decayed
    stiffness, which keeps the bound valid as fixed vertices get connected.
    """
    if len(rest.edges) == 0:
        return 0.0
    if uniform:
        k = np.full(len(rest.edges), float(params.k_base))
    else:
        k = edge_stiffness(mesh, rest.edges, params, d)
    w = k / rest.rest_lengths
    row = np.bincount(rest.edges.ravel(), weights=np.repeat(w, 2), minlength=mesh.n_vertices)
    return float(np.sqrt(2.0 * row.max() / params.mass_m))


def max_stable_dt(omega_max: float) -> float:
    return math.inf if omega_max <= 0 else 2.0 / omega_max


def auto_dt(omega_max: float) -> float:
    limit = max_stable_dt(omega_max)
    return 1.0 if math.isinf(limit) else DT_SAFETY * limit


def cfl_check(dt: float, omega_max: float, mode: str = "enforce") -> bool:
    """True when ``dt < 2 / omega_max``.

    A violation raises :class:`CFLViolationError` in ``enforce`` mode and
    logs a warning (returning False) in ``warn`` mode.
    """
    limit = max_stable_dt(omega_max)
    if dt < limit:
        return True
    if mode == "enforce":
        raise CFLViolationError(dt, limit)
    log.warning("dt=%g violates the CFL bound (dt < %g); continuing", dt, limit)
    return False


def euler_step(state: SimState, forces, params: MaterialParams, cfg: SimConfig):
    """Velocity first, then position with the new velocity.

    Returns ``(positions, velocities, max_displacement)``.
    """
    f = np.asarray(forces, dtype=np.float64)
    bad = ~np.all(np.isfinite(f), axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NumericalDivergenceError(f"non-finite force on vertex {i}", vertex=i)
    mesh = state.mesh
    v = state.velocities + cfg.dt * (f / params.mass_m)
    v[mesh.fixed] = 0.0
    x = mesh.positions + cfg.dt * v
    x[mesh.fixed] = mesh.positions[mesh.fixed]
    disp = np.linalg.norm(x - mesh.positions, axis=1)
    return x, v, float(disp.max()) if len(disp) else 0.0


def converged(max_displacement: float, cfg: SimConfig) -> bool:
    return max_displacement < cfg.epsilon


def mean_nn_distance(mesh: TriMesh) -> float:
    pts = mesh.positions[mesh.referenced()] if mesh.n_faces else mesh.positions
    return average_nn_distance(pts) if len(pts) >= 2 else 0.0


def _refine_cycle(mesh, velocities, rest):
    fine, midpoints = refine.subdivide(mesh)
    v = np.zeros((fine.n_vertices, 3))
    v[: mesh.n_vertices] = velocities
    for (i, j), m in midpoints.items():
        v[m] = 0.5 * (velocities[i] + velocities[j])
    v[fine.fixed] = 0.0
    # every edge is new after a 1-to-4 split; rest lengths are taken as built
    return fine, v, RestState.from_mesh(fine, rest.contraction_scale)


def run_simulation(initial: SimState, params: MaterialParams, rest: RestState,
                   snap_cfg: constraints.SnapConfig, cfg: SimConfig, d: float,
                   on_stats=None, on_snapshot=None, workers: int = 1):
    """Run the contraction loop.

    Returns ``(state, reason, rest)`` with ``reason`` one of ``"converged"``,
    ``"max_iterations"`` or ``"diverged"``; ``rest`` is the rest state
    after any topology changes. The run only counts as converged once every
    fixed vertex has been reached by the foil. ``on_stats(stats)`` and
    ``on_snapshot(iteration, mesh)`` are optional sinks.
    """
    omega = omega_max_estimate(initial.mesh, rest, params, d, uniform=True)
    if cfg.dt is None:
        cfg = dataclasses.replace(cfg, dt=auto_dt(omega))
    cfl_check(cfg.dt, omega, cfg.cfl_mode)

    mesh = initial.mesh.copy()
    vel = initial.velocities.copy()
    vel[mesh.fixed] = 0.0
    history = list(initial.stats_history)
    limit = DIVERGENCE_FACTOR * max(mesh.bbox_diagonal(), 1e-300)
    reason = MAX_ITERATIONS
    it = initial.iteration
    smoothing = bool(cfg.smooth_every)
    last_check = math.inf
    p_floor = 1e-3 * params.pressure_p
    last_deflate = it

    for _ in range(int(cfg.max_iterations)):
        it += 1
        state = SimState(mesh, vel, it)
        try:
            forces, n_bad = total_forces(mesh, rest, params, d, vel, workers=workers, return_degenerate=True)
            x, vel, disp = euler_step(state, forces, params, cfg)
        except NumericalDivergenceError as exc:
            log.warning("iteration %d: %s", it, exc)
            reason = DIVERGED
            break
        if not np.all(np.isfinite(x)) or disp > limit:
            log.warning("iteration %d: displacement %.3g exceeds divergence limit", it, disp)
            mesh = mesh.with_positions(x)
            reason = DIVERGED
            break
        mesh = mesh.with_positions(x)

        pending = len(constraints.unsatisfied_targets(mesh))
        done = converged(disp, cfg) and pending == 0
        if (disp < cfg.deflate_threshold and pending and params.pressure_p > p_floor
                and cfg.deflate_factor < 1 and it - last_deflate >= cfg.deflate_wait):
            # the foil is at rest short of some targets: let out some inflation
            last_deflate = it
            params = dataclasses.replace(params, pressure_p=params.pressure_p * cfg.deflate_factor)
            smoothing = bool(cfg.smooth_every)
            last_check = math.inf
            log.info("iteration %d: %d targets pending, pressure lowered to %.6g", it, pending, params.pressure_p)
        snapped = 0
        if not done:
            if it % cfg.snap_every == 0 and mesh.fixed.any():
                report = constraints.snap_pass(mesh, snap_cfg)
                snapped = len(report.snapped_this_pass)
                if snapped:
                    keep = report.index_map >= 0
                    vel = vel[keep]
                    vel[mesh.fixed] = 0.0
                    rest = rest.remapped(mesh, report.index_map)
            if smoothing and it % cfg.smooth_every == 0:
                # smoothing stays off once motion has settled below the
                # threshold or stopped shrinking; otherwise each pass keeps
                # kicking the springs out of balance
                if cfg.smooth_threshold <= disp < last_check:
                    mesh = refine.laplacian_smooth(mesh, cfg.smooth_lambda, cfg.smooth_rounds)
                    last_check = disp
                else:
                    smoothing = False
            if cfg.refine_every and it % cfg.refine_every == 0:
                mesh, vel, rest = _refine_cycle(mesh, vel, rest)

        stats = IterationStats(
            iteration=it,
            max_displacement=disp,
            mean_nn_distance=mean_nn_distance(mesh),
            spring_energy=spring_energy(mesh, rest, params, d),
            kinetic_energy=kinetic_energy(vel, params),
            snapped_count=snapped,
            degenerate_face_count=int(n_bad),
        )
        history.append(stats)
        if on_stats is not None:
            on_stats(stats)
        if on_snapshot is not None and cfg.snapshot_every and it % cfg.snapshot_every == 0:
            on_snapshot(it, mesh)
        if done:
            reason = CONVERGED
            break

    return SimState(mesh, vel, it, history), reason, rest
