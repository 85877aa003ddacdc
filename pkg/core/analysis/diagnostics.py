from typing import Dict

import numpy as np

from core.analysis.experiments import normalized_camera, normalized_pose
from core.fitting.landmarks import project_landmarks
from core.fitting.ortho import jacobian_ortho, reduced_residual
from core.fitting.persp import dlt_reduced_residual, jacobian_persp_dlt
from core.geometry.camera import rodrigues, rodrigues_derivative
from core.geometry.shape import sample_coefficients
from core.models.shape_model import ShapeModel
from core.optim.least_squares import LeastSquaresProblem, check_jacobian, finite_difference_jacobian
from utils.errors import InvalidArgumentError

JACOBIAN_TOLERANCE = 1e-5
RODRIGUES_TOLERANCE = 1e-6

def rodrigues_error(r) -> float:
    '''Max deviation of the analytic dR/dr_i from central differences.'''
    r = np.asarray(r, dtype=float)
    numeric = finite_difference_jacobian(lambda p: rodrigues(p).ravel(), r, step=1e-6)
    analytic = np.column_stack([rodrigues_derivative(r, i).ravel() for i in range(3)])
    return float(np.max(np.abs(analytic - numeric)))

def jacobian_errors(model: ShapeModel, rng: np.random.Generator, noise_px: float = 1.0) -> Dict[str, float]:
    '''
    Analytic against finite-difference Jacobians on one random noisy instance,
    evaluated away from the generating pose.
    '''
    if model.landmark_indices.size < 4:
        raise InvalidArgumentError("Jacobian checks need a model with at least 4 landmarks")
    alpha = sample_coefficients(model, rng, 2.0)
    rotation = rng.uniform(-0.4, 0.4, size=3)

    pose = normalized_pose(model, alpha, rotation)
    landmarks = project_landmarks(model, alpha, pose, noise_px=noise_px, rng=rng)
    p = np.concatenate([rotation + rng.normal(0.0, 0.05, 3), [pose.s * (1 + 0.05 * rng.standard_normal())]])
    ortho = LeastSquaresProblem(
        residual=lambda x: reduced_residual(model, landmarks, x[:3], x[3]),
        jacobian=lambda x: jacobian_ortho(model, landmarks, x[:3], x[3]),
        x0=p,
    )

    camera = normalized_camera(model, alpha, rng.uniform(0.4, 2.0), rotation)
    landmarks = project_landmarks(model, alpha, camera, noise_px=noise_px, rng=rng)
    q = np.concatenate([rotation + rng.normal(0.0, 0.05, 3), [camera.f * (1 + 0.05 * rng.standard_normal())]])
    dlt = LeastSquaresProblem(
        residual=lambda x: dlt_reduced_residual(model, landmarks, x[:3], x[3]),
        jacobian=lambda x: jacobian_persp_dlt(model, landmarks, x[:3], x[3]),
        x0=q,
    )
    return {
        "rodrigues": max(rodrigues_error(rotation), rodrigues_error(np.zeros(3))),
        "ortho": check_jacobian(ortho, p),
        "persp_dlt": check_jacobian(dlt, q),
    }
