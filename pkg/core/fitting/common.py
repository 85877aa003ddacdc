from typing import Callable, Optional

import numpy as np

from core.analysis.metrics import interocular_distance, landmark_distance
from core.geometry.shape import eye_indices
from core.models.observations import Landmarks2D
from core.models.shape_model import ShapeModel
from utils.errors import DegenerateConfigurationError, UnderDeterminedError

def require_landmarks(landmarks: Landmarks2D, minimum: int, what: str):
    if landmarks.count < minimum:
        raise UnderDeterminedError(
            f"{what} needs at least {minimum} landmarks, got {landmarks.count} (under-determined)"
        )

def fit_landmark_error(model: ShapeModel, landmarks: Landmarks2D, vertices: np.ndarray,
                       project: Callable[[np.ndarray], np.ndarray]) -> Optional[float]:
    '''
    d_L of a fitted shape: landmark error in % of the interocular distance.

    Unobserved eyes fall back to the fitted projection of the eye vertices.
    Returns None for models without designated eyes.
    '''
    try:
        eyes = eye_indices(model)
    except DegenerateConfigurationError:
        return None
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
    projected = project(vertices[landmarks.vertex_indices])
    try:
        iod = interocular_distance(landmarks, eyes, fallback=project(vertices[list(eyes)]))
        return landmark_distance(landmarks, projected, iod)
    except DegenerateConfigurationError:
        return None

def clamp_coefficients(alpha_n: np.ndarray, bound: Optional[float]):
    '''Clamp sigma-normalised coefficients to [-bound, bound]; returns (alpha, clamped?).'''
    if bound is None or not np.any(np.abs(alpha_n) > bound):
        return alpha_n, False
    return np.clip(alpha_n, -bound, bound), True
