import json

import pytest

from app import main
from utils.errors import EXIT_INVALID_ARGUMENT, EXIT_OK

@pytest.fixture
def model_path(tmp_path):
    path = tmp_path / "face.smm"
    assert main(["synth", "--seed", "3", "--n-vertices", "150", "--n-modes", "5", "--out", str(path)]) == EXIT_OK
    return path

def _project(model_path, out, *extra):
    return main(["project", "--model", str(model_path), "--camera", "persp", "--distance", "0.6",
                 "--rotation", "0,15,0", "--out", str(out), *extra])

def test_synth_project_fit_round_trip(tmp_path, model_path):
    landmarks = tmp_path / "lm.csv"
    report = tmp_path / "fit.json"
    mesh = tmp_path / "fit.obj"
    assert _project(model_path, landmarks) == EXIT_OK
    assert main(["fit-landmarks", "--model", str(model_path), "--landmarks", str(landmarks), "--camera", "persp",
                 "--reg", "0", "--out", str(report), "--mesh", str(mesh)]) == EXIT_OK

    data = json.loads(report.read_text())
    assert data["schema"] == "geofit3d/1"
    assert data["camera"] == "persp"
    assert data["d_l"] < 1e-2
    assert mesh.read_text().startswith("v ")

def test_fixed_distance_is_written_to_the_report(tmp_path, model_path):
    landmarks = tmp_path / "lm.csv"
    report = tmp_path / "fit.json"
    _project(model_path, landmarks)
    assert main(["fit-landmarks", "--model", str(model_path), "--landmarks", str(landmarks), "--camera", "persp",
                 "--fix-tz", "1.5", "--out", str(report)]) == EXIT_OK
    assert json.loads(report.read_text())["pose"]["t3d"][2] == 1.5

def test_single_landmark_exits_with_invalid_argument(tmp_path, model_path):
    landmarks = tmp_path / "lm.csv"
    landmarks.write_text("vertex_index,x,y\n0,10.0,20.0\n")
    report = tmp_path / "fit.json"
    code = main(["fit-landmarks", "--model", str(model_path), "--landmarks", str(landmarks), "--camera", "ortho",
                 "--out", str(report)])
    assert code == EXIT_INVALID_ARGUMENT
    assert not report.exists()

def test_corrupt_model_exits_with_invalid_argument(tmp_path):
    model = tmp_path / "bad.smm"
    model.write_bytes(b"SMM0")
    code = main(["check-jacobians", "--model", str(model), "--trials", "1"])
    assert code == EXIT_INVALID_ARGUMENT

def test_check_jacobians_passes(tmp_path, model_path):
    out = tmp_path / "jac.csv"
    assert main(["check-jacobians", "--model", str(model_path), "--trials", "3", "--out", str(out)]) == EXIT_OK
    assert out.read_text().splitlines()[0] == "trial,rodrigues,ortho,persp_dlt"

def test_flex_modes_from_a_saved_fit(tmp_path, model_path):
    landmarks = tmp_path / "lm.csv"
    report = tmp_path / "fit.json"
    spectrum = tmp_path / "spectrum.csv"
    _project(model_path, landmarks)
    main(["fit-landmarks", "--model", str(model_path), "--landmarks", str(landmarks), "--camera", "persp",
          "--out", str(report)])
    assert main(["flex-modes", "--model", str(model_path), "--fit", str(report), "--out", str(spectrum),
                 "--mesh-dir", str(tmp_path / "modes")]) == EXIT_OK

    lines = spectrum.read_text().splitlines()
    assert lines[0] == "mode,eigenvalue,landmark_shift_px,retained,plausible"
    assert len(lines) == 1 + 5

def test_failed_command_removes_its_partial_outputs(tmp_path, model_path):
    landmarks = tmp_path / "lm.csv"
    report = tmp_path / "fit.json"
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    _project(model_path, landmarks)

    with pytest.raises(OSError):
        main(["fit-landmarks", "--model", str(model_path), "--landmarks", str(landmarks), "--camera", "ortho",
              "--out", str(report), "--mesh", str(blocker / "fit.obj")])
    assert not report.exists()
    assert blocker.read_text() == "not a directory"

def test_outputs_are_deterministic(tmp_path, model_path):
    other = tmp_path / "again.smm"
    main(["synth", "--seed", "3", "--n-vertices", "150", "--n-modes", "5", "--out", str(other)])
    assert other.read_bytes() == model_path.read_bytes()

    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for out, threads in ((first, "1"), (second, "2")):
        assert main(["ortho-limit", "--model", str(model_path), "--seeds", "2", "--threads", threads,
                     "--distances", "0.5,1,1000000", "--out", str(out)]) == EXIT_OK
    assert first.read_text() == second.read_text()

def test_noisy_projection_depends_only_on_the_seed(tmp_path, model_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    _project(model_path, a, "--noise-px", "1", "--seed", "7")
    _project(model_path, b, "--noise-px", "1", "--seed", "7")
    _project(model_path, c, "--noise-px", "1", "--seed", "8")
    assert a.read_text() == b.read_text()
    assert a.read_text() != c.read_text()

def test_ambiguity_sweep_table(tmp_path, model_path):
    out = tmp_path / "amb.csv"
    assert main(["ambiguity-sweep", "--model", str(model_path), "--seeds", "1", "--reg", "0",
                 "--gen-dist", "0.6,ortho", "--fit-dist", "0.6,ortho", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "gen,fit,d_l,d_s_mm"
    label = lambda cell: cell if cell == "ortho" else float(cell)
    cells = [tuple(label(c) for c in line.split(",")[:2]) for line in lines[1:]]
    assert cells == [(0.6, 0.6), (0.6, "ortho"), ("ortho", 0.6), ("ortho", "ortho")]

def test_argument_errors_exit_through_argparse(model_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["fit-landmarks", "--model", str(model_path)])
    assert excinfo.value.code == 2

def test_projection_and_contour_fit_share_the_image_centre(tmp_path, model_path):
    landmarks = tmp_path / "lm.csv"
    edges = tmp_path / "edges.csv"
    report = tmp_path / "fit.json"
    edges.write_text("# 512,512\nx,y\n")
    assert _project(model_path, landmarks, "--image-size", "512,512") == EXIT_OK
    assert main(["fit-contours", "--model", str(model_path), "--landmarks", str(landmarks), "--camera", "persp",
                 "--reg", "0", "--edges", str(edges), "--out", str(report)]) == EXIT_OK

    data = json.loads(report.read_text())
    assert data["pose"]["principal_point"] == [256.0, 256.0]
    assert data["d_l"] < 1e-2
