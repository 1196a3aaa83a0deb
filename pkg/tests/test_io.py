import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from foilmesh import io
from foilmesh.errors import InsufficientInputError, InvalidParameterError, ParseError
from foilmesh.geometry import TriMesh
from foilmesh.integrator import IterationStats


def test_xyz_two_points(tmp_path):
    p = tmp_path / "a.xyz"
    p.write_text("0 0 0\n1 0 0\n")
    np.testing.assert_array_equal(io.load_points(p), [[0, 0, 0], [1, 0, 0]])


def test_xyz_comments_and_blank_lines(tmp_path):
    p = tmp_path / "a.xyz"
    p.write_text("# header\n\n1 2 3\n   # indented comment\n4 5 6\n")
    assert io.load_points(p).shape == (2, 3)


@pytest.mark.parametrize("text, line", [("1 2\n", 1), ("0 0 0\n1 2 x\n", 2), ("0 0 0\n\n1 nan 2\n", 3),
                                        ("1 2 3 4\n", 1), ("inf 0 0\n", 1)])
def test_xyz_errors_name_the_line(tmp_path, text, line):
    p = tmp_path / "bad.xyz"
    p.write_text(text)
    with pytest.raises(ParseError, match=f"line {line}:") as exc:
        io.load_points(p)
    assert exc.value.line == line


def test_empty_cloud(tmp_path):
    p = tmp_path / "e.xyz"
    p.write_text("# nothing\n")
    with pytest.raises(InsufficientInputError):
        io.load_points(p)


def test_unknown_extension(tmp_path):
    with pytest.raises(InvalidParameterError):
        io.load_points(tmp_path / "a.txt")


def test_ply_with_extra_properties_and_faces(tmp_path):
    p = tmp_path / "a.ply"
    p.write_text(
        "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 3\n"
        "property float nx\nproperty float x\nproperty float y\nproperty float z\n"
        "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
        "9 1 2 3\n9 4 5 6\n9 7 8 9\n3 0 1 2\n"
    )
    np.testing.assert_array_equal(io.load_points(p), [[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    m = io.load_mesh(p)
    assert m.faces.tolist() == [[0, 1, 2]]


@pytest.mark.parametrize("header", [
    "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
    "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n",
    "plx\n",
    "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n",
])
def test_ply_header_errors(tmp_path, header):
    p = tmp_path / "b.ply"
    p.write_text(header + "1 2 3\n")
    with pytest.raises(ParseError):
        io.load_points(p)


def test_ply_truncated_body(tmp_path):
    p = tmp_path / "t.ply"
    p.write_text("ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\n"
                 "property double z\nend_header\n1 2 3\n")
    with pytest.raises(ParseError):
        io.load_points(p)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)), elements=finite), st.sampled_from(["xyz", "ply"]))
def test_points_round_trip(tmp_path_factory, pts, fmt):
    p = tmp_path_factory.mktemp("rt") / f"c.{fmt}"
    io.write_points(pts, p)
    back = io.load_points(p)
    assert back.tobytes() == pts.tobytes()


def test_single_triangle_obj(tmp_path):
    p = tmp_path / "t.obj"
    io.write_mesh(TriMesh(np.eye(3), [[0, 1, 2]]), p)
    lines = p.read_text().splitlines()
    assert [l for l in lines if l.startswith("v ")] == ["v 1 0 0", "v 0 1 0", "v 0 0 1"]
    assert [l for l in lines if l.startswith("f ")] == ["f 1 2 3"]


@pytest.mark.parametrize("fmt", ["obj", "ply"])
def test_mesh_round_trip_and_determinism(tmp_path, sphere200, fmt):
    a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
    io.write_mesh(sphere200, a)
    io.write_mesh(sphere200.copy(), b)
    assert a.read_bytes() == b.read_bytes()
    back = io.load_mesh(a)
    assert back.positions.tobytes() == sphere200.positions.tobytes()
    assert np.array_equal(back.faces, sphere200.faces)


@pytest.mark.parametrize("fmt", ["obj", "ply"])
def test_reference_tool_reads_our_files(tmp_path, sphere200, fmt):
    trimesh = pytest.importorskip("trimesh")
    p = tmp_path / f"s.{fmt}"
    io.write_mesh(sphere200, p)
    m = trimesh.load(p, process=False)
    assert len(m.vertices) == 200 and len(m.faces) == 396
    assert m.is_watertight


def test_obj_reader_handles_slashes_negatives_and_quads(tmp_path):
    p = tmp_path / "q.obj"
    p.write_text("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -2 -1\n")
    m = io.load_mesh(p)
    assert m.faces.tolist() == [[0, 1, 2], [0, 2, 3], [0, 2, 3]]


def test_obj_zero_index_rejected(tmp_path):
    p = tmp_path / "z.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")
    with pytest.raises(ParseError, match="line 4"):
        io.load_mesh(p)


def _stats(i):
    return IterationStats(i, 0.1 / i, 0.5 + 1e-17 * i, 1 / 3, 2 / 7, i % 2, 0)


def test_diagnostics_header_only(tmp_path):
    p = tmp_path / "d.csv"
    io.write_diagnostics([], p)
    assert p.read_text() == ",".join(io.DIAGNOSTICS_COLUMNS) + "\n"
    assert p.read_text().startswith(
        "iteration,max_displacement,mean_nn_distance,spring_energy,kinetic_energy,snapped_count,degenerate_face_count")


def test_diagnostics_rows_round_trip(tmp_path):
    p = tmp_path / "d.csv"
    hist = [_stats(i) for i in (1, 2, 3)]
    io.write_diagnostics(hist, p)
    assert len(p.read_text().splitlines()) == 4
    cols = io.read_diagnostics(p)
    assert cols["max_displacement"].tolist() == [s.max_displacement for s in hist]
    assert cols["spring_energy"][0] == 1 / 3
    assert p.read_text().splitlines()[1].split(",")[0] == "1"


def test_snapshot_name():
    assert io.snapshot_path("out", 7).endswith("snapshot_000007.obj")


def test_box_scenario():
    np.testing.assert_array_equal(io.box_scenario(2, 1.0), [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]])
    np.testing.assert_allclose(io.box_scenario(2, 0.85), [[0.85, 0, 0], [-0.85, 0, 0], [0, 0.85, 0], [0, -0.85, 0]])
    np.testing.assert_array_equal(io.box_scenario(2, 1.0, top_bottom=True)[2:], [[0, 0, 1], [0, 0, -1]])
    for bad in ((2, 0), (2, 1.2), (0, 0.5)):
        with pytest.raises(InvalidParameterError):
            io.box_scenario(*bad)
