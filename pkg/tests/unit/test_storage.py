import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.models.fit import FitReport
from core.models.observations import EdgeMap, Landmarks2D
from core.storage.repositories.edge_repository import EdgeRepository, parse_pnm
from core.storage.repositories.landmark_repository import LandmarkRepository
from core.storage.repositories.mesh_repository import MeshRepository, export_obj
from core.storage.repositories.model_repository import ModelRepository
from core.storage.repositories.report_repository import ReportRepository
from core.storage.repositories.table_repository import TableRepository, format_cell
from utils.errors import FormatError

def test_model_round_trip(tmp_path, toy_model):
    repository = ModelRepository(tmp_path / "toy.smm")
    repository.save(toy_model)
    loaded = repository.load()
    assert_allclose(loaded.mean, toy_model.mean, rtol=0, atol=0)
    assert_allclose(loaded.basis, toy_model.basis, rtol=0, atol=0)
    assert_allclose(loaded.sigma, toy_model.sigma, rtol=0, atol=0)
    assert loaded.topology.triangles.tolist() == toy_model.topology.triangles.tolist()
    assert loaded.landmark_indices.tolist() == [0, 3]

def test_model_without_topology_round_trips(tmp_path, toy_model):
    repository = ModelRepository(tmp_path / "bare.smm")
    repository.save(toy_model.copy(update={"topology": None}))
    assert repository.load().topology is None

def test_model_file_is_little_endian_column_major(tmp_path, toy_model):
    path = tmp_path / "toy.smm"
    ModelRepository(path).save(toy_model)
    data = path.read_bytes()
    assert data[:4] == b"SMM1"
    assert np.frombuffer(data, dtype="<u4", count=3, offset=4).tolist() == [4, 2, 2]
    first_column = np.frombuffer(data, dtype="<f8", count=12, offset=16 + 8 * 12)
    assert_allclose(first_column, toy_model.basis[:, 0])

@pytest.mark.parametrize("mutate,offset", [
    (lambda d: b"SMM2" + d[4:], 0),
    (lambda d: d[:-3], None),
    (lambda d: d + b"\x00", None),
])
def test_corrupt_model_files_are_rejected(tmp_path, toy_model, mutate, offset):
    path = tmp_path / "toy.smm"
    ModelRepository(path).save(toy_model)
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FormatError) as excinfo:
        ModelRepository(path).load()
    if offset is not None:
        assert excinfo.value.offset == offset

def test_non_positive_sigma_is_rejected(tmp_path, toy_model):
    path = tmp_path / "toy.smm"
    ModelRepository(path).save(toy_model)
    data = bytearray(path.read_bytes())
    sigma_offset = 16 + 8 * 12 + 8 * 24
    data[sigma_offset:sigma_offset + 8] = np.array([-1.0], dtype="<f8").tobytes()
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError) as excinfo:
        ModelRepository(path).load()
    assert excinfo.value.offset == sigma_offset

def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(FormatError):
        ModelRepository(tmp_path / "nope.smm").load()

def test_landmarks_round_trip_exactly(tmp_path):
    landmarks = Landmarks2D(vertex_indices=[5, 0, 12], points=[[0.1, 1e-17], [123.456789012345, -7.0], [1 / 3, 2 / 3]])
    repository = LandmarkRepository(tmp_path / "lm.csv")
    repository.save(landmarks)
    loaded = repository.load()
    assert loaded.vertex_indices.tolist() == [5, 0, 12]
    assert_allclose(loaded.points, landmarks.points, rtol=0, atol=0)

@pytest.mark.parametrize("text,row", [
    ("index,x,y\n1,2,3\n", 1),
    ("vertex_index,x,y\n1,2\n", 2),
    ("vertex_index,x,y\n1,2,3\n1,4,5\n", 3),
    ("vertex_index,x,y\n-1,2,3\n", 2),
    ("vertex_index,x,y\n1,abc,3\n", 2),
    ("vertex_index,x,y\n1,nan,3\n", 2),
])
def test_malformed_landmark_files_report_the_row(tmp_path, text, row):
    path = tmp_path / "lm.csv"
    path.write_text(text)
    with pytest.raises(FormatError) as excinfo:
        LandmarkRepository(path).load()
    assert excinfo.value.row == row

def test_empty_landmark_file_is_rejected(tmp_path):
    path = tmp_path / "lm.csv"
    path.write_text("vertex_index,x,y\n")
    with pytest.raises(FormatError):
        LandmarkRepository(path).load()

@pytest.mark.parametrize("suffix", [".csv", ".pbm", ".pgm"])
def test_edge_maps_round_trip(tmp_path, suffix):
    edges = EdgeMap(pixels=[[0, 0], [3, 1], [9, 4], [2, 4]], width=10, height=5)
    repository = EdgeRepository(tmp_path / f"edges{suffix}")
    repository.save(edges)
    loaded = repository.load()
    assert (loaded.width, loaded.height) == (10, 5)
    assert loaded.pixels.tolist() == edges.pixels.tolist()

def test_ascii_bitmap_with_comments():
    data = b"P1\n# a comment\n3 2\n0 1 0\n1 0 1\n"
    assert parse_pnm(data).tolist() == [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]

def test_ascii_graymap():
    data = b"P2\n2 2\n255\n0 128\n255 7\n"
    assert parse_pnm(data).tolist() == [[0.0, 128.0], [255.0, 7.0]]

def test_sixteen_bit_graymap():
    data = b"P5\n2 1\n65535\n" + np.array([1, 4096], dtype=">u2").tobytes()
    assert parse_pnm(data).tolist() == [[1.0, 4096.0]]

@pytest.mark.parametrize("data", [b"P6\n1 1\n255\n\x00", b"P5\n4 4\n255\n\x00\x00", b"P1\n2 2\n0 1\n", b"P2\n0 2\n255\n"])
def test_bad_rasters_are_rejected(data):
    with pytest.raises(FormatError):
        parse_pnm(data)

def test_edge_list_needs_dimensions(tmp_path):
    path = tmp_path / "edges.csv"
    path.write_text("x,y\n1,2\n")
    with pytest.raises(FormatError):
        EdgeRepository(path).load()
    assert EdgeRepository(path).load(width=4, height=4).pixels.tolist() == [[1, 2]]

def test_edge_list_pixel_outside_the_image(tmp_path):
    path = tmp_path / "edges.csv"
    path.write_text("# 4,4\nx,y\n1,2\n4,0\n")
    with pytest.raises(FormatError) as excinfo:
        EdgeRepository(path).load()
    assert excinfo.value.row == 4

def _report() -> FitReport:
    return FitReport(
        camera="persp",
        alpha=[0.1 / 3, -2e-5],
        alpha_normalized=[0.5, -0.25],
        sigma=[0.2 / 3, 8e-5],
        pose={"r": [0.0, 0.1, 0.0], "t3d": [0.0, 0.0, 0.6], "f": 1200.0, "principal_point": [256.0, 256.0]},
        objective=1.25e-9,
        d_l=0.01,
        iterations={"stage1": 9, "stage2": 3},
        landmarks=[(3, 10.5, 20.25), (7, 1 / 3, 2 / 3)],
    )

def test_report_round_trip(tmp_path):
    repository = ReportRepository(tmp_path / "fit.json")
    repository.save(_report())
    loaded = repository.load()
    assert loaded == _report()
    assert loaded.camera_model().t_z == 0.6
    assert loaded.observations().vertex_indices.tolist() == [3, 7]

def test_report_carries_the_schema_tag(tmp_path):
    path = tmp_path / "fit.json"
    ReportRepository(path).save(_report())
    assert json.loads(path.read_text())["schema"] == "geofit3d/1"

@pytest.mark.parametrize("payload", ["{not json", "[1, 2]", '{"camera": "ortho"}'])
def test_invalid_reports_are_rejected(tmp_path, payload):
    path = tmp_path / "fit.json"
    path.write_text(payload)
    with pytest.raises(FormatError):
        ReportRepository(path).load()

def test_report_with_a_foreign_schema_is_rejected(tmp_path):
    path = tmp_path / "fit.json"
    ReportRepository(path).save(_report())
    data = json.loads(path.read_text())
    data["schema"] = "geofit3d/0"
    path.write_text(json.dumps(data))
    with pytest.raises(FormatError):
        ReportRepository(path).load()

def test_table_round_trip(tmp_path):
    repository = TableRepository(tmp_path / "table.csv")
    repository.save(["t_z", "d_l", "flag", "note"], [
        {"t_z": 0.5, "d_l": None, "flag": True, "note": "ortho"},
        {"t_z": 2, "d_l": 1 / 3, "flag": False, "note": "x"},
    ])
    rows = repository.load()
    assert rows[0] == {"t_z": "0.5", "d_l": "", "flag": "true", "note": "ortho"}
    assert float(rows[1]["d_l"]) == 1 / 3

def test_table_rows_must_cover_the_header(tmp_path):
    with pytest.raises(ValueError):
        TableRepository(tmp_path / "table.csv").save(["a", "b"], [{"a": 1}])

def test_format_cell_uses_round_trip_precision():
    assert float(format_cell(0.1 + 0.2)) == 0.1 + 0.2
    assert format_cell(np.int64(3)) == "3"
    assert format_cell(np.bool_(False)) == "false"

def test_coefficient_vector_with_optional_header(tmp_path):
    path = tmp_path / "alpha.csv"
    path.write_text("alpha\n0.5\n-1.25\n")
    assert TableRepository(path).load_vector().tolist() == [0.5, -1.25]
    path.write_text("0.5\nfoo\n")
    with pytest.raises(FormatError) as excinfo:
        TableRepository(path).load_vector()
    assert excinfo.value.row == 2

def test_obj_export_round_trip(tmp_path, toy_model):
    alpha = np.array([0.5, -1.0])
    repository = export_obj(toy_model, alpha, tmp_path / "mesh.obj")
    vertices, topology = repository.load()
    assert_allclose(vertices.ravel(), toy_model.mean + toy_model.basis @ alpha, rtol=0, atol=0)
    assert topology.triangles.tolist() == toy_model.topology.triangles.tolist()
    assert "f 1 2 3" in (tmp_path / "mesh.obj").read_text()

def test_boundary_sidecar(tmp_path):
    repository = MeshRepository(tmp_path / "mesh.obj")
    repository.save_boundary([4, 1, 9])
    assert (tmp_path / "mesh.obj").read_text() == "4\n1\n9\n"

def test_failed_command_removes_only_its_own_outputs(tmp_path):
    existing = tmp_path / "kept.csv"
    existing.write_text("x")
    untouched = TableRepository(existing)
    assert untouched.remove_partial() is False
    assert existing.exists()

    written = TableRepository(tmp_path / "out.csv")
    written.save(["a"], [{"a": 1}])
    assert written.remove_partial() is True
    assert not (tmp_path / "out.csv").exists()
