"""Closed-surface reconstruction by contracting a flexible foil onto fixed points."""

from .config import RunConfig, load_config
from .constraints import SnapConfig, affected_neighbors, radius_of_effectiveness, snap_pass
from .errors import FoilError
from .estimator import FoilReconstructor
from .forces import MaterialParams, RestState, critical_damping, elastic_forces, pressure_forces, spring_energy
from .geometry import SpatialIndex, TriMesh, watertight_check
from .integrator import SimConfig, SimState, run_simulation
from .io import box_scenario, load_mesh, load_points, write_diagnostics, write_mesh, write_points
from .pipeline import Reconstruction, reconstruct
from .refine import laplacian_smooth, min_angle, self_intersection_scan, subdivide
from .seed import SphereSpec, build_initial_mesh, convex_hull, enclosing_sphere, fibonacci_sphere

__version__ = "0.1.0"

__all__ = [
    "FoilError",
    "FoilReconstructor",
    "MaterialParams",
    "Reconstruction",
    "RestState",
    "RunConfig",
    "SimConfig",
    "SimState",
    "SnapConfig",
    "SpatialIndex",
    "SphereSpec",
    "TriMesh",
    "affected_neighbors",
    "box_scenario",
    "build_initial_mesh",
    "convex_hull",
    "critical_damping",
    "elastic_forces",
    "enclosing_sphere",
    "fibonacci_sphere",
    "laplacian_smooth",
    "load_config",
    "load_mesh",
    "load_points",
    "min_angle",
    "pressure_forces",
    "radius_of_effectiveness",
    "reconstruct",
    "run_simulation",
    "self_intersection_scan",
    "snap_pass",
    "spring_energy",
    "subdivide",
    "watertight_check",
    "write_diagnostics",
    "write_mesh",
    "write_points",
]
