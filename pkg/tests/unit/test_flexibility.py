import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError
from scipy.stats import chi

from core.analysis.experiments import normalized_pose
from core.analysis.flexibility import (apply_mode, flexibility_modes, landmark_shifts, plausibility_filter,
                                       projection_matrix_ortho, projection_matrix_persp, truncate_modes)
from core.analysis.metrics import mean_displacement
from core.fitting.landmarks import project_landmarks, project_points
from core.geometry.camera import rodrigues, skew
from core.geometry.shape import synthesize_vertices
from core.models.camera import PerspCamera
from core.models.flexibility import FlexibilitySpectrum
from utils.errors import InvalidArgumentError

@pytest.fixture(scope="module")
def yawed_spectrum(face_model):
    projection = projection_matrix_ortho(face_model, face_model.landmark_indices, [0.0, 0.3, 0.0])
    return projection, flexibility_modes(face_model, projection, k1=0.002)

def test_modes_solve_the_generalised_eigenproblem(face_model, yawed_spectrum):
    projection, spectrum = yawed_spectrum
    A = face_model.basis.T @ face_model.basis
    B = projection.T @ projection
    for i in range(spectrum.num_modes):
        f = spectrum.mode(i)
        lhs, rhs = A @ f, spectrum.eigenvalues[i] * (B @ f)
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(lhs)

def test_modes_are_orthogonal_in_the_projected_metric(yawed_spectrum):
    projection, spectrum = yawed_spectrum
    gram = spectrum.modes.T @ projection.T @ projection @ spectrum.modes
    off_diagonal = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off_diagonal)) <= 1e-8 * np.max(np.abs(np.diag(gram)))

def test_eigenvalues_are_descending(yawed_spectrum):
    _, spectrum = yawed_spectrum
    assert np.all(np.diff(spectrum.eigenvalues) <= 1e-12 * spectrum.eigenvalues[0])

def test_every_mode_moves_the_surface_by_k1(face_model, yawed_spectrum):
    _, spectrum = yawed_spectrum
    for i in range(spectrum.num_modes):
        moved = apply_mode(face_model, np.zeros(face_model.num_modes), spectrum.mode(i), 1.0)
        assert mean_displacement(face_model.mean, moved) == pytest.approx(0.002, rel=1e-9)

def test_invisible_direction_is_the_most_flexible(face_model):
    S = face_model.num_modes
    projection = np.eye(S)[1:]  # coefficient 0 never reaches the image
    spectrum = flexibility_modes(face_model, projection)
    top = spectrum.mode(0) / np.linalg.norm(spectrum.mode(0))
    assert abs(top[0]) > 0.999
    assert spectrum.eigenvalues[0] > 1e6 * spectrum.eigenvalues[1]

def test_modes_follow_a_sign_convention(yawed_spectrum):
    _, spectrum = yawed_spectrum
    for i in range(spectrum.num_modes):
        col = spectrum.mode(i)
        first = col[np.abs(col) > 1e-12 * np.max(np.abs(col))][0]
        assert first > 0

def test_invalid_projection_shape_is_rejected(face_model):
    with pytest.raises(InvalidArgumentError):
        flexibility_modes(face_model, np.ones((4, face_model.num_modes + 1)))

def test_non_positive_k1_is_rejected(face_model, yawed_spectrum):
    projection, _ = yawed_spectrum
    with pytest.raises(InvalidArgumentError):
        flexibility_modes(face_model, projection, k1=0.0)

def test_spectrum_rejects_unsorted_eigenvalues():
    with pytest.raises(ValidationError):
        FlexibilitySpectrum(modes=np.eye(2), eigenvalues=[1.0, 2.0], k1=0.002)

def test_truncation_matches_brute_force(face_model, yawed_spectrum):
    _, spectrum = yawed_spectrum
    alpha = np.zeros(face_model.num_modes)
    pose = normalized_pose(face_model, alpha, (0.0, 0.3, 0.0))
    idx = face_model.landmark_indices
    base = project_points(synthesize_vertices(face_model, alpha)[idx], pose)

    shifts = []
    for i in range(spectrum.num_modes):
        moved = synthesize_vertices(face_model, alpha + spectrum.mode(i))[idx]
        shifts.append(np.mean(np.linalg.norm(project_points(moved, pose) - base, axis=1)))
    assert_allclose(landmark_shifts(spectrum, face_model, idx, pose), shifts, rtol=1e-9)

    k2 = float(np.median(shifts))
    expected = [i for i, shift in enumerate(shifts) if shift < k2]
    assert truncate_modes(spectrum, face_model, idx, pose, k1=0.002, k2=k2) == expected

def test_truncation_needs_positive_thresholds(face_model, yawed_spectrum):
    _, spectrum = yawed_spectrum
    pose = normalized_pose(face_model, np.zeros(face_model.num_modes))
    with pytest.raises(InvalidArgumentError):
        truncate_modes(spectrum, face_model, face_model.landmark_indices, pose, k1=0.002, k2=0.0)

def test_plausibility_uses_the_chi_distribution():
    S = 4
    sigma = np.ones(S)
    limit = chi(S).mean() + 3.0 * chi(S).std()
    modes = np.column_stack([np.full(S, 0.1), np.full(S, limit), np.zeros(S), np.zeros(S)])
    assert plausibility_filter(modes, np.zeros(S), sigma) == [0, 2, 3]
    assert plausibility_filter(modes, np.zeros(S), sigma, indices=[1, 2]) == [2]

def test_plausibility_rejects_mismatched_dimensions():
    with pytest.raises(InvalidArgumentError):
        plausibility_filter(np.eye(3), np.zeros(2), np.ones(3))

def test_perspective_projection_is_the_change_of_collinearity_rows(face_model, rng):
    camera = PerspCamera(r=[0.0, 0.2, 0.0], t3d=[0.0, 0.0, 0.8], f=900.0)
    landmarks = project_landmarks(face_model, np.zeros(face_model.num_modes), camera)
    P = projection_matrix_persp(face_model, landmarks, camera)
    assert P.shape == (3 * landmarks.count, face_model.num_modes)

    def rows(alpha):
        vertices = synthesize_vertices(face_model, alpha)[landmarks.vertex_indices]
        X = vertices @ rodrigues(camera.r).T + camera.t3d
        return np.concatenate([skew([x, y, 1.0]) @ (camera.intrinsics() @ p) for (x, y), p in zip(landmarks.points, X)])

    delta = rng.standard_normal(face_model.num_modes)
    assert_allclose(P @ delta, rows(delta) - rows(np.zeros_like(delta)), atol=1e-9 * camera.f)

def test_apply_mode_rejects_wrong_length(face_model):
    with pytest.raises(InvalidArgumentError):
        apply_mode(face_model, np.zeros(face_model.num_modes), np.zeros(face_model.num_modes + 1), 1.0)

def test_top_mode_at_ten_millimetres_barely_moves_unseen_landmarks(dense_face_model):
    # two landmarks give four image rows for five modes, so one direction never reaches the image
    rotation = (0.0, 0.3, 0.0)
    eyes = dense_face_model.landmark_indices[:2]
    spectrum = flexibility_modes(dense_face_model, projection_matrix_ortho(dense_face_model, eyes, rotation), k1=0.01)
    pose = normalized_pose(dense_face_model, np.zeros(dense_face_model.num_modes), rotation)
    shifts = landmark_shifts(spectrum, dense_face_model, eyes, pose)
    assert shifts[0] < 1e-6
    assert np.all(shifts[1:] > 1e3 * shifts[0])

def test_top_mode_moves_landmarks_less_than_the_stiffest_mode(face_model):
    rotation = (0.0, 0.3, 0.0)
    idx = face_model.landmark_indices
    spectrum = flexibility_modes(face_model, projection_matrix_ortho(face_model, idx, rotation), k1=0.01)
    pose = normalized_pose(face_model, np.zeros(face_model.num_modes), rotation)
    shifts = landmark_shifts(spectrum, face_model, idx, pose)
    assert shifts[0] < shifts[-1]
