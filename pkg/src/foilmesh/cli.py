"""Command-line entry point: ``foilmesh run | check | scenario | info``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields

from . import io, refine
from .config import RunConfig, load_config, parse_value
from .constraints import affected_neighbors, radius_of_effectiveness
from .errors import FoilError
from .forces import critical_damping, fold_pressure
from .geometry import watertight_check
from .pipeline import cfl_summary, fixed_points_for, initial_state, material_for, reconstruct

EXIT_CODES = {
    "error": 1,
    "usage": 2,
    "parse": 3,
    "input": 4,
    "config": 5,
    "constraint": 6,
    "degenerate": 7,
    "structure": 8,
    "cfl": 9,
    "diverged": 10,
    "io": 11,
    "not_converged": 12,
    "quality": 13,
}

_EPILOG = "exit codes:\n" + "\n".join(
    f"  {code:>3}  {name}" for name, code in sorted(EXIT_CODES.items(), key=lambda kv: kv[1])
) + "\n    0  success\n\nErrors print a single line 'ERROR <category>: <message>' on stderr."


class _Failure(Exception):
    def __init__(self, category, message):
        super().__init__(message)
        self.category = category


def _flag(name):
    return "--" + name.replace("_", "-")


def _add_config_flags(p):
    g = p.add_argument_group("configuration (each flag overrides the config-file key of the same name)")
    g.add_argument("--config", metavar="FILE", help="key = value configuration file")
    for f in fields(RunConfig):
        g.add_argument(_flag(f.name), dest="cfg_" + f.name, metavar="VALUE", default=None,
                       help=f"default: {getattr(RunConfig, f.name)!r}")


def _config_from_args(args) -> RunConfig:
    overrides = {}
    for f in fields(RunConfig):
        raw = getattr(args, "cfg_" + f.name, None)
        if raw is None:
            continue
        try:
            overrides[f.name] = parse_value(f.name, raw)
        except ValueError as exc:
            raise _Failure("config", str(exc)) from None
    return load_config(args.config, overrides)


def _emit(pairs, out):
    for key, value in pairs:
        if isinstance(value, float):
            value = "%.12g" % value
        print(f"{key} = {value}", file=out)


# ---------------------------------------------------------------- commands


def cmd_run(args, out) -> int:
    cfg = _config_from_args(args)
    if args.dump_config:
        out.write(cfg.to_text())
        return 0
    fixed = fixed_points_for(cfg)
    on_snapshot = None
    if cfg.snapshot_dir:
        os.makedirs(cfg.snapshot_dir, exist_ok=True)

        def on_snapshot(iteration, mesh):
            io.write_mesh(mesh, io.snapshot_path(cfg.snapshot_dir, iteration), "obj")

    result = reconstruct(fixed, cfg, on_snapshot=on_snapshot)
    if cfg.output_path:
        io.write_mesh(result.mesh, cfg.output_path, cfg.output_format)
    if cfg.diagnostics_path:
        io.write_diagnostics(result.history, cfg.diagnostics_path)
    last = result.history[-1].max_displacement if result.history else float("nan")
    _emit([("termination", result.reason), ("iterations", len(result.history)),
           ("final_max_displacement", last), ("dt", result.dt),
           ("pressure_p", result.params.pressure_p),
           ("vertices", int(result.mesh.referenced().sum())), ("faces", result.mesh.n_faces)], out)
    if result.reason == "diverged":
        raise _Failure("diverged", f"simulation diverged after {len(result.history)} iterations")
    if not result.converged:
        raise _Failure("not_converged", f"no convergence within {cfg.max_iterations} iterations")
    return 0


def cmd_check(args, out) -> int:
    mesh = io.load_mesh(args.mesh, args.format)
    wt = watertight_check(mesh)
    q = refine.min_angle(mesh, check_intersections=not args.skip_intersections)
    pairs = [
        ("vertices", int(mesh.referenced().sum())),
        ("faces", mesh.n_faces),
        ("is_closed", str(wt.is_closed).lower()),
        ("euler_characteristic", wt.euler_characteristic),
        ("boundary_edges", wt.boundary_edge_count),
        ("nonmanifold_edges", wt.nonmanifold_edge_count),
        ("min_angle_deg", q.min_angle_deg),
        ("degenerate_faces", len(q.degenerate_faces)),
    ]
    if not args.skip_intersections:
        pairs.append(("self_intersections", len(q.self_intersections)))
    _emit(pairs, out)
    if args.strict and (not wt.is_closed or q.degenerate_faces or q.self_intersections):
        raise _Failure("quality", "mesh is not watertight or has degenerate/intersecting faces")
    return 0


def cmd_scenario(args, out) -> int:
    pts = io.box_scenario(args.side, args.inset, args.top_bottom)
    if args.output:
        io.write_points(pts, args.output, args.format)
    else:
        for p in pts:
            print(" ".join(io.FLOAT_FMT % c for c in p), file=out)
    return 0


def cmd_info(args, out) -> int:
    cfg = _config_from_args(args)
    snap = cfg.snap()
    mesh, d, rest = initial_state(fixed_points_for(cfg), cfg)
    params = material_for(mesh, cfg)
    omega, limit, auto = cfl_summary(mesh, rest, params, d)
    dt = cfg.dt if cfg.dt is not None else auto
    _emit([
        ("average_spacing_d", d),
        ("R_e", radius_of_effectiveness(params, d, snap)),
        ("N_e", affected_neighbors(params, d, snap)),
        ("c_crit", critical_damping(params)),
        ("fold_pressure", fold_pressure(mesh, cfg.contraction_scale, cfg.k_base)),
        ("pressure_p", params.pressure_p),
        ("omega_max_bound", omega),
        ("admissible_dt_below", limit),
        ("dt", dt),
        ("dt_ok", str(dt < limit).lower()),
    ], out)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foilmesh",
        description="Reconstruct a closed triangle mesh through fixed points by contracting a flexible foil.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("run", help="run the full pipeline", epilog=_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--input", dest="cfg_input_path", metavar="PATH", help="fixed points (.xyz or .ply)")
    p.add_argument("--output", dest="cfg_output_path", metavar="PATH", help="mesh file (.obj or .ply)")
    p.add_argument("--diagnostics", dest="cfg_diagnostics_path", metavar="PATH", help="per-iteration CSV")
    p.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="watertightness and quality report for a mesh file", epilog=_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("mesh", help="mesh file (.obj or .ply)")
    p.add_argument("--format", choices=["obj", "ply"])
    p.add_argument("--skip-intersections", action="store_true", help="skip the self-intersection scan")
    p.add_argument("--strict", action="store_true", help="exit nonzero when the mesh fails a check")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("scenario", help="print or write the built-in box scenario", epilog=_EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--side", type=float, default=RunConfig.box_side)
    p.add_argument("--inset", type=float, default=RunConfig.box_inset)
    p.add_argument("--top-bottom", action="store_true", help="use the +-z faces instead of +-y")
    p.add_argument("--output", metavar="PATH", help="point file (.xyz or .ply); stdout when omitted")
    p.add_argument("--format", choices=["xyz", "ply"])
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("info", help="derived quantities for a configuration, without running",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--input", dest="cfg_input_path", metavar="PATH", help="fixed points (.xyz or .ply)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_info)
    return parser


def _fail(category, message, err) -> int:
    first = str(message).splitlines()[0] if str(message) else category
    print(f"ERROR {category}: {first}", file=err)
    return EXIT_CODES.get(category, 1)


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(err)
        return EXIT_CODES["usage"]
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=err)
    try:
        return args.func(args, out)
    except _Failure as exc:
        return _fail(exc.category, exc, err)
    except FoilError as exc:
        return _fail(exc.category, exc, err)
    except OSError as exc:
        return _fail("io", f"{exc.filename or ''}: {exc.strerror or exc}".lstrip(": "), err)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
