import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.analysis.experiments import normalized_pose
from core.fitting.landmarks import landmark_error, project_landmarks
from core.fitting.ortho import (assemble_A, assemble_y, fit_landmarks_ortho, fit_landmarks_ortho_als,
                                initial_scale, jacobian_ortho, reduced_residual, sop_pose_from_points)
from core.geometry.camera import rodrigues, sop_project_points
from core.geometry.shape import sample_coefficients, synthesize_vertices
from core.models.fit import OrthoFitConfig
from core.models.observations import Landmarks2D
from core.optim.least_squares import finite_difference_jacobian
from utils.errors import UnderDeterminedError

def _instance(model, seed, rotation=(0.1, 0.35, 0.0), noise_px=0.0):
    rng = np.random.default_rng(seed)
    alpha = sample_coefficients(model, rng, 2.0)
    pose = normalized_pose(model, alpha, rotation)
    return alpha, pose, project_landmarks(model, alpha, pose, noise_px=noise_px, rng=rng)

def test_linear_system_reproduces_projection_residual(face_model, rng):
    alpha, pose, landmarks = _instance(face_model, 3, noise_px=2.0)
    r, s = np.array([0.05, 0.2, -0.1]), pose.s * 1.1
    t2d = rng.standard_normal(2)

    A = assemble_A(face_model, landmarks, r, s)
    y = assemble_y(face_model, landmarks, r, s)
    vertices = synthesize_vertices(face_model, alpha)
    projected = sop_project_points(vertices[landmarks.vertex_indices], r, t2d, s).ravel()
    assert A.shape == (2 * landmarks.count, face_model.num_modes + 2)
    assert_allclose(A @ np.concatenate([alpha, t2d]) + y, projected - landmarks.stacked(), atol=1e-9)

def test_reduced_residual_is_orthogonal_to_linear_columns(face_model):
    _, pose, landmarks = _instance(face_model, 4, noise_px=1.0)
    r = np.array([0.0, 0.3, 0.0])
    residual = reduced_residual(face_model, landmarks, r, pose.s)
    A = assemble_A(face_model, landmarks, r, pose.s)
    assert np.max(np.abs(A.T @ residual)) < 1e-6 * np.linalg.norm(A) * max(np.linalg.norm(residual), 1.0)

def test_jacobian_matches_finite_differences(face_model):
    _, pose, landmarks = _instance(face_model, 5, noise_px=1.5)
    p = np.array([0.12, 0.3, -0.05, pose.s * 0.95])
    analytic = jacobian_ortho(face_model, landmarks, p[:3], p[3])
    numeric = finite_difference_jacobian(lambda x: reduced_residual(face_model, landmarks, x[:3], x[3]), p)
    scale = max(np.max(np.abs(numeric)), 1.0)
    assert np.max(np.abs(analytic - numeric)) / scale < 1e-5

def test_initial_scale_matches_true_scale_at_frontal_pose(face_model):
    alpha, pose, landmarks = _instance(face_model, 6, rotation=(0.0, 0.0, 0.0))
    assert initial_scale(face_model, landmarks, np.zeros(3)) == pytest.approx(pose.s, rel=0.5)

def test_sop_pose_from_points_recovers_a_rigid_projection(rng):
    points = rng.standard_normal((12, 3))
    r, s, t2d = np.array([0.2, -0.4, 0.3]), 3.5, np.array([1.0, -2.0])
    observed = sop_project_points(points, r, t2d, s)

    r_hat, s_hat, t_hat = sop_pose_from_points(points, observed)
    assert s_hat == pytest.approx(s, rel=1e-9)
    assert_allclose(rodrigues(r_hat), rodrigues(r), atol=1e-9)
    assert_allclose(t_hat, t2d, atol=1e-9)

@pytest.mark.parametrize("rotation", [(0.0, 0.0, 0.0), (0.1, 0.35, 0.0), (-0.15, -0.5, 0.05)])
def test_noiseless_fit_reproduces_landmarks(face_model, rotation):
    _, _, landmarks = _instance(face_model, 8, rotation=rotation)
    result = fit_landmarks_ortho(face_model, landmarks, OrthoFitConfig(tikhonov_weight=0.0, coeff_bound_sigmas=50.0))
    assert result.camera == "ortho"
    assert landmark_error(face_model, result) < 1e-3
    assert result.objective == pytest.approx(float(result.residuals @ result.residuals))

@pytest.mark.parametrize("yaw_deg", [0.0, 30.0, -30.0])
@pytest.mark.parametrize("seed", [15, 16, 17])
def test_noiseless_fit_recovers_the_coefficients(face_model, seed, yaw_deg):
    alpha, _, landmarks = _instance(face_model, seed, rotation=(0.0, np.radians(yaw_deg), 0.0))
    result = fit_landmarks_ortho(face_model, landmarks, OrthoFitConfig(tikhonov_weight=0.0, coeff_bound_sigmas=50.0))
    assert landmark_error(face_model, result) < 1e-3
    assert np.max(np.abs((result.alpha - alpha) / face_model.sigma)) < 1e-4

def test_regularisation_shrinks_coefficients(face_model):
    _, _, landmarks = _instance(face_model, 10, noise_px=3.0)
    free = fit_landmarks_ortho(face_model, landmarks, OrthoFitConfig(tikhonov_weight=0.0, coeff_bound_sigmas=50.0))
    heavy = fit_landmarks_ortho(face_model, landmarks, OrthoFitConfig(tikhonov_weight=1e6, coeff_bound_sigmas=50.0))
    assert np.linalg.norm(heavy.alpha_normalized) < np.linalg.norm(free.alpha_normalized)

def test_coefficient_bound_is_respected(face_model):
    _, _, landmarks = _instance(face_model, 11, noise_px=20.0)
    result = fit_landmarks_ortho(face_model, landmarks, OrthoFitConfig(tikhonov_weight=0.0, coeff_bound_sigmas=0.1))
    assert np.all(np.abs(result.alpha_normalized) <= 0.1 + 1e-12)

def test_single_landmark_is_under_determined(face_model):
    landmarks = Landmarks2D(vertex_indices=[face_model.landmark_indices[0]], points=[[10.0, 20.0]])
    with pytest.raises(UnderDeterminedError):
        fit_landmarks_ortho(face_model, landmarks)

def test_fit_is_deterministic(face_model):
    _, _, landmarks = _instance(face_model, 12, noise_px=1.0)
    a = fit_landmarks_ortho(face_model, landmarks)
    b = fit_landmarks_ortho(face_model, landmarks)
    assert_allclose(a.alpha, b.alpha, rtol=0, atol=0)
    assert a.objective == b.objective

def test_als_objective_never_increases(face_model):
    _, _, landmarks = _instance(face_model, 13, noise_px=1.0)
    result = fit_landmarks_ortho_als(face_model, landmarks, OrthoFitConfig(restarts=False))
    trace = np.array(result.report.trace)
    assert trace.size >= 1
    assert np.all(np.diff(trace) <= 0)

def test_snls_not_worse_than_als(face_model):
    _, _, landmarks = _instance(face_model, 14, rotation=(0.05, 0.25, 0.0), noise_px=1.0)
    config = OrthoFitConfig(restarts=False, tikhonov_weight=0.0, coeff_bound_sigmas=50.0)
    snls = fit_landmarks_ortho(face_model, landmarks, config)
    als = fit_landmarks_ortho_als(face_model, landmarks, config)
    assert snls.objective <= als.objective * (1 + 1e-8) + 1e-12
