"""Point-cloud and mesh files (XYZ, ASCII PLY, OBJ), diagnostics CSV and
the built-in box scenario.

All writers print floats with 17 significant digits, which round-trips a
64-bit double exactly, and use ``\\n`` line endings so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .errors import InsufficientInputError, InvalidParameterError, ParseError, StructuralError
from .geometry import TriMesh

FLOAT_FMT = "%.17g"

DIAGNOSTICS_COLUMNS = (
    "iteration",
    "max_displacement",
    "mean_nn_distance",
    "spring_energy",
    "kinetic_energy",
    "snapped_count",
    "degenerate_face_count",
)

_POINT_FORMATS = ("xyz", "ply")
_MESH_FORMATS = ("obj", "ply")


def _fmt(x) -> str:
    return FLOAT_FMT % x


def infer_format(path, allowed, fmt=None) -> str:
    """Resolve ``fmt`` or take it from the file extension."""
    if fmt is None:
        fmt = os.path.splitext(str(path))[1].lstrip(".").lower()
    fmt = str(fmt).lower()
    if fmt not in allowed:
        raise InvalidParameterError(
            f"unsupported format {fmt!r} for {path}; expected one of {', '.join(allowed)}"
        )
    return fmt


def _parse_float(tok, line):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite coordinate {tok!r}", line)
    return v


# ---------------------------------------------------------------- reading


def _read_xyz(lines):
    pts = []
    for no, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.split()
        if len(tok) != 3:
            raise ParseError(f"expected 3 coordinates, found {len(tok)}", no)
        pts.append([_parse_float(t, no) for t in tok])
    return pts


class _PlyHeader:
    def __init__(self):
        self.elements = []  # (name, count, [(prop_name, is_list)])
        self.body_start = 0


def _read_ply_header(lines) -> _PlyHeader:
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", 1)
    h = _PlyHeader()
    for no, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] != "ascii":
                raise ParseError("only ASCII PLY is supported", no)
        elif tok[0] == "element":
            if len(tok) != 3:
                raise ParseError("malformed element line", no)
            try:
                count = int(tok[2])
            except ValueError:
                raise ParseError(f"bad element count {tok[2]!r}", no) from None
            h.elements.append((tok[1], count, []))
        elif tok[0] == "property":
            if not h.elements:
                raise ParseError("property before any element", no)
            is_list = len(tok) >= 2 and tok[1] == "list"
            if (is_list and len(tok) != 5) or (not is_list and len(tok) != 3):
                raise ParseError("malformed property line", no)
            h.elements[-1][2].append((tok[-1], is_list))
        elif tok[0] == "end_header":
            h.body_start = no
            return h
        else:
            raise ParseError(f"unexpected header keyword {tok[0]!r}", no)
    raise ParseError("missing end_header", len(lines))


def _iter_ply_rows(lines, header):
    """Yield ``(element_name, line_no, tokens)`` for every body row."""
    no = header.body_start
    for name, count, _ in header.elements:
        got = 0
        while got < count:
            if no >= len(lines):
                raise ParseError(f"file ends inside element {name!r}", no)
            tok = lines[no].split()
            no += 1
            if not tok:
                continue
            yield name, no, tok
            got += 1


def _ply_vertex_columns(header, line):
    for name, _, props in header.elements:
        if name == "vertex":
            names = [p for p, is_list in props]
            if any(is_list for _, is_list in props):
                raise ParseError("list property on vertex element", line)
            missing = [a for a in "xyz" if a not in names]
            if missing:
                raise ParseError(f"vertex element lacks properties {missing}", line)
            return [names.index(a) for a in "xyz"], len(names)
    raise ParseError("no vertex element", line)


def _read_ply(lines, want_faces=False):
    header = _read_ply_header(lines)
    cols, width = _ply_vertex_columns(header, header.body_start)
    pts, faces = [], []
    for name, no, tok in _iter_ply_rows(lines, header):
        if name == "vertex":
            if len(tok) != width:
                raise ParseError(f"expected {width} vertex values, found {len(tok)}", no)
            pts.append([_parse_float(tok[c], no) for c in cols])
        elif name == "face" and want_faces:
            try:
                k = int(tok[0])
                idx = [int(t) for t in tok[1 : 1 + k]]
            except ValueError:
                raise ParseError("bad face record", no) from None
            if k < 3 or len(idx) != k:
                raise ParseError("face needs at least 3 indices", no)
            faces.extend(_fan(idx))
    return pts, faces


def _fan(idx):
    return [[idx[0], idx[t], idx[t + 1]] for t in range(1, len(idx) - 1)]


def _read_lines(path):
    with open(path, "r", encoding="ascii", errors="strict") as fh:
        return fh.read().splitlines()


def load_points(path, fmt=None) -> np.ndarray:
    """Read an ``(n, 3)`` point cloud from ``.xyz`` or ASCII ``.ply``."""
    fmt = infer_format(path, _POINT_FORMATS, fmt)
    lines = _read_lines(path)
    pts = _read_xyz(lines) if fmt == "xyz" else _read_ply(lines)[0]
    if not pts:
        raise InsufficientInputError(f"{path}: point cloud is empty")
    return np.asarray(pts, dtype=np.float64)


def _read_obj(lines):
    pts, faces = [], []
    for no, raw in enumerate(lines, start=1):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "v":
            if len(tok) < 4:
                raise ParseError("vertex needs 3 coordinates", no)
            pts.append([_parse_float(t, no) for t in tok[1:4]])
        elif tok[0] == "f":
            idx = []
            for t in tok[1:]:
                try:
                    i = int(t.split("/")[0])
                except ValueError:
                    raise ParseError(f"bad face index {t!r}", no) from None
                if i == 0:
                    raise ParseError("OBJ indices are 1-based", no)
                idx.append(i - 1 if i > 0 else len(pts) + i)
            if len(idx) < 3:
                raise ParseError("face needs at least 3 indices", no)
            faces.extend(_fan(idx))
    return pts, faces


def load_mesh(path, fmt=None) -> TriMesh:
    """Read a triangle mesh from OBJ or ASCII PLY; polygons are fan-split."""
    fmt = infer_format(path, _MESH_FORMATS, fmt)
    lines = _read_lines(path)
    pts, faces = _read_obj(lines) if fmt == "obj" else _read_ply(lines, want_faces=True)
    if not pts:
        raise InsufficientInputError(f"{path}: mesh has no vertices")
    positions = np.asarray(pts, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(faces) and (faces.min() < 0 or faces.max() >= len(positions)):
        raise StructuralError(f"{path}: face index out of range")
    return TriMesh(positions, faces)


# ---------------------------------------------------------------- writing


def _write_text(path, text):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def _vertex_lines(positions, prefix=""):
    return [prefix + " ".join(_fmt(c) for c in p) for p in positions.tolist()]


def write_points(points, path, fmt=None) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    fmt = infer_format(path, _POINT_FORMATS, fmt)
    if fmt == "xyz":
        body = _vertex_lines(pts)
    else:
        body = [
            "ply",
            "format ascii 1.0",
            f"element vertex {len(pts)}",
            "property double x",
            "property double y",
            "property double z",
            "end_header",
        ] + _vertex_lines(pts)
    _write_text(path, "".join(line + "\n" for line in body))


def mesh_text(mesh: TriMesh, fmt: str = "obj") -> str:
    """Serialized mesh; every vertex is written, referenced or not."""
    fmt = infer_format("<mesh>", _MESH_FORMATS, fmt)
    faces = np.asarray(mesh.faces, dtype=np.int64)
    if fmt == "obj":
        lines = _vertex_lines(mesh.positions, "v ")
        lines += ["f %d %d %d" % tuple(f) for f in (faces + 1).tolist()]
    else:
        lines = [
            "ply",
            "format ascii 1.0",
            f"element vertex {mesh.n_vertices}",
            "property double x",
            "property double y",
            "property double z",
            f"element face {mesh.n_faces}",
            "property list uchar int vertex_indices",
            "end_header",
        ]
        lines += _vertex_lines(mesh.positions)
        lines += ["3 %d %d %d" % tuple(f) for f in faces.tolist()]
    return "".join(line + "\n" for line in lines)


def write_mesh(mesh: TriMesh, path, fmt=None) -> None:
    fmt = infer_format(path, _MESH_FORMATS, fmt)
    _write_text(path, mesh_text(mesh, fmt))


def snapshot_path(directory, iteration: int) -> str:
    return os.path.join(str(directory), "snapshot_%06d.obj" % iteration)


def diagnostics_row(stats) -> str:
    vals = []
    for name in DIAGNOSTICS_COLUMNS:
        v = getattr(stats, name)
        vals.append(str(int(v)) if isinstance(v, (int, np.integer)) else _fmt(v))
    return ",".join(vals)


def write_diagnostics(history, path) -> None:
    lines = [",".join(DIAGNOSTICS_COLUMNS)] + [diagnostics_row(s) for s in history]
    _write_text(path, "".join(line + "\n" for line in lines))


def read_diagnostics(path) -> dict:
    """Columns of a diagnostics CSV as numpy arrays keyed by header name."""
    lines = _read_lines(path)
    if not lines or tuple(lines[0].split(",")) != DIAGNOSTICS_COLUMNS:
        raise ParseError("unexpected diagnostics header", 1)
    rows = [line.split(",") for line in lines[1:] if line]
    data = np.array(rows, dtype=np.float64).reshape(-1, len(DIAGNOSTICS_COLUMNS))
    return {name: data[:, k] for k, name in enumerate(DIAGNOSTICS_COLUMNS)}


# ---------------------------------------------------------------- scenarios


def box_scenario(side: float = 2.0, inset_fraction: float = 0.85, top_bottom: bool = False) -> np.ndarray:
    """Four fixed points at the face centres of an origin-centred cube.

    The points sit on the four lateral faces (``+-x``, ``+-y``) and are pulled
    toward the centre to a distance of ``inset_fraction * side / 2``. With
    ``top_bottom`` the ``+-y`` pair is replaced by the ``+-z`` faces.
    """
    if not (side > 0 and math.isfinite(side)):
        raise InvalidParameterError(f"side must be > 0, got {side}")
    if not 0 < inset_fraction <= 1:
        raise InvalidParameterError(f"inset_fraction must lie in (0, 1], got {inset_fraction}")
    h = inset_fraction * side / 2.0
    second = 2 if top_bottom else 1
    pts = np.zeros((4, 3))
    pts[0, 0], pts[1, 0] = h, -h
    pts[2, second], pts[3, second] = h, -h
    return pts


SCENARIOS = {"box": box_scenario}
