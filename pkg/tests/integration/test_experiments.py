import numpy as np
import pytest

from core.analysis.experiments import (ORTHO, ambiguity_cell, ambiguity_table, distance_sweep, normalized_camera,
                                       normalized_pose, persp_vs_ortho_sweep, pose_sweep, sample_alphas, snls_vs_als)
from core.fitting.landmarks import project_landmarks
from core.fitting.ortho import fit_landmarks_ortho
from core.geometry.shape import sample_coefficients
from core.geometry.synthetic import make_synthetic_model
from core.models.fit import OrthoFitConfig, PerspFitConfig
from utils.errors import InvalidArgumentError

EXACT = PerspFitConfig(tikhonov_weight=0.0, coeff_bound_sigmas=50.0)

def test_perspective_departure_shrinks_with_distance(face_model):
    alphas = sample_alphas(face_model, [0, 1, 2])
    rows = persp_vs_ortho_sweep(face_model, alphas, [0.3, 0.6, 1.2, 2.5, 5.0, 1e6])
    means = [row["d_l_mean"] for row in rows]
    assert all(b < a for a, b in zip(means, means[1:]))
    assert means[-1] < 1e-3
    assert all(row["d_l_max"] >= row["d_l_mean"] for row in rows)

def test_sweep_does_not_depend_on_thread_count(face_model):
    alphas = sample_alphas(face_model, [0, 1])
    distances = [0.5, 1.0, 2.0]
    assert persp_vs_ortho_sweep(face_model, alphas, distances, threads=1) == \
        persp_vs_ortho_sweep(face_model, alphas, distances, threads=3)

def test_sweep_rejects_unsorted_distances(face_model):
    with pytest.raises(InvalidArgumentError):
        persp_vs_ortho_sweep(face_model, sample_alphas(face_model, [0]), [2.0, 1.0])

def test_matching_distance_explains_the_landmarks(face_model):
    alphas = sample_alphas(face_model, [4])
    rows = ambiguity_table(face_model, alphas, [0.5, ORTHO], [0.5, ORTHO], EXACT)
    assert [(row["gen"], row["fit"]) for row in rows] == [(0.5, 0.5), (0.5, ORTHO), (ORTHO, 0.5), (ORTHO, ORTHO)]
    diagonal = [row for row in rows if row["gen"] == row["fit"]]
    assert all(row["d_l"] < 1e-2 for row in diagonal)
    assert all(row["d_s_mm"] >= 0 for row in rows)

def test_snls_is_not_worse_than_alternation_on_most_seeds(face_model):
    config = OrthoFitConfig(tikhonov_weight=0.0, coeff_bound_sigmas=50.0)
    rows = snls_vs_als(face_model, range(50), noise_px=1.0, config=config)
    assert [row["seed"] for row in rows] == list(range(50))
    assert sum(row["snls_not_worse"] for row in rows) >= 48
    assert all(np.isfinite(row["snls_objective"]) and np.isfinite(row["als_objective"]) for row in rows)

def test_snls_row_compares_landmark_objectives(face_model):
    config = OrthoFitConfig(tikhonov_weight=10.0)
    row = snls_vs_als(face_model, [3], noise_px=1.0, config=config)[0]
    rng = np.random.default_rng(3)
    alpha = sample_coefficients(face_model, rng, 2.0)
    rotation = np.radians([rng.uniform(-10, 10), rng.uniform(-30, 30), 0.0])
    landmarks = project_landmarks(face_model, alpha, normalized_pose(face_model, alpha, rotation),
                                  noise_px=1.0, rng=rng)
    snls = fit_landmarks_ortho(face_model, landmarks, config.copy(update={"restarts": False}))
    assert row["snls_objective"] == snls.objective
    assert row["snls_objective"] == pytest.approx(float(snls.residuals @ snls.residuals))
    assert row["snls_objective"] < snls.report.objective

def test_negative_noise_is_rejected(face_model):
    with pytest.raises(InvalidArgumentError):
        snls_vs_als(face_model, [0], noise_px=-0.5)

def test_distance_sweep_ends_with_the_free_fit(face_model):
    alpha = sample_alphas(face_model, [5])[0]
    landmarks = project_landmarks(face_model, alpha, normalized_camera(face_model, alpha, 0.6, (0.0, 0.3, 0.0)))
    rows = distance_sweep(face_model, landmarks, [0.3, 0.6, 1.2], EXACT)
    assert [row["kind"] for row in rows] == ["fixed", "fixed", "fixed", "free"]
    assert [row["t_z"] for row in rows[:3]] == [0.3, 0.6, 1.2]
    assert rows[-1]["d_s_mm"] == pytest.approx(0.0, abs=1e-9)

def test_pose_sweep_reports_every_yaw(face_model):
    alphas = sample_alphas(face_model, [0, 1])
    rows = pose_sweep(face_model, alphas, [-20.0, 0.0, 20.0], noise_px=0.5, seed=3)
    assert [row["yaw_deg"] for row in rows] == [-20.0, 0.0, 20.0]
    assert all(row["samples"] == 2 and row["d_s_mm"] >= 0 for row in rows)

@pytest.fixture(scope="module")
def rich_model():
    return make_synthetic_model(seed=5, n_vertices=200, n_modes=15, n_landmarks=20)

def test_close_faces_fitted_far_away_keep_landmarks_but_change_shape(rich_model):
    config = PerspFitConfig(coeff_bound_sigmas=10.0)
    alphas = sample_alphas(rich_model, range(20), bound_sigmas=1.0)
    ambiguous = 0
    for alpha in alphas:
        same = ambiguity_cell(rich_model, alpha, 0.3, 0.3, config)
        far = ambiguity_cell(rich_model, alpha, 0.3, 1.2, config)
        ambiguous += far["d_l"] < 1.0 and far["d_s_mm"] >= 2.0 * same["d_s_mm"]
    assert ambiguous >= 18
