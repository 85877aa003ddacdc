from typing import Sequence, Tuple, Union

import numpy as np

from core.models.shape_model import ShapeCoefficients, ShapeModel
from utils.errors import DegenerateConfigurationError, InvalidArgumentError

def _alpha_vector(model: ShapeModel, alpha: Union[ShapeCoefficients, np.ndarray, Sequence[float]]) -> np.ndarray:
    a = alpha.alpha if isinstance(alpha, ShapeCoefficients) else np.asarray(alpha, dtype=float).ravel()
    if a.size != model.num_modes:
        raise InvalidArgumentError(f"alpha has {a.size} entries, model has {model.num_modes} modes")
    return a

def synthesize(model: ShapeModel, alpha) -> np.ndarray:
    '''Vertex positions mean + basis @ alpha as a length-3N vector.'''
    return model.mean + model.basis @ _alpha_vector(model, alpha)

def synthesize_vertices(model: ShapeModel, alpha) -> np.ndarray:
    return synthesize(model, alpha).reshape(-1, 3)

def row_indices(indices: Sequence[int]) -> np.ndarray:
    '''Rows (3i, 3i+1, 3i+2) for each vertex index, in order.'''
    idx = np.asarray(indices, dtype=np.int64).ravel()
    return (3 * idx[:, None] + np.arange(3)).ravel()

def landmark_submatrix(model: ShapeModel, indices: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    '''Rows of the basis and the mean belonging to the given vertices (order preserved).'''
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        raise InvalidArgumentError("at least one vertex index is required")
    if idx.min() < 0 or idx.max() >= model.num_vertices:
        bad = int(idx[(idx < 0) | (idx >= model.num_vertices)][0])
        raise InvalidArgumentError(f"vertex index {bad} out of range for {model.num_vertices} vertices")
    rows = row_indices(idx)
    return model.basis[rows], model.mean[rows]

def eye_indices(model: ShapeModel) -> Tuple[int, int]:
    '''The two eye-centre vertices (first two canonical landmarks).'''
    if model.landmark_indices.size < 2:
        raise DegenerateConfigurationError("model does not designate two eye landmarks")
    return int(model.landmark_indices[0]), int(model.landmark_indices[1])

def sample_coefficients(model: ShapeModel, rng: np.random.Generator, bound_sigmas: float = 2.0) -> np.ndarray:
    '''Gaussian coefficients truncated to +-bound_sigmas standard deviations.'''
    z = rng.standard_normal(model.num_modes)
    return np.clip(z, -bound_sigmas, bound_sigmas) * model.sigma
