from typing import Optional, Sequence, Union

import numpy as np

from core.fitting.common import fit_landmark_error
from core.fitting.ortho import fit_landmarks_ortho
from core.fitting.persp import fit_landmarks_persp
from core.geometry.camera import pinhole_project_points, sop_project_points
from core.geometry.shape import synthesize_vertices
from core.models.camera import OrthoPose, PerspCamera
from core.models.fit import FitResult, OrthoFitConfig, PerspFitConfig
from core.models.observations import Landmarks2D
from core.models.shape_model import ShapeModel
from utils.errors import InvalidArgumentError

CAMERA_KINDS = ("ortho", "persp")

def project_points(points: np.ndarray, camera: Union[OrthoPose, PerspCamera],
                   vertex_ids: Optional[Sequence[int]] = None) -> np.ndarray:
    if isinstance(camera, OrthoPose):
        return sop_project_points(points, camera.r, camera.t2d, camera.s)
    return pinhole_project_points(points, camera.r, camera.t3d, camera.f, camera.principal_point, vertex_ids)

def project_landmarks(model: ShapeModel, alpha, camera: Union[OrthoPose, PerspCamera],
                      indices: Optional[Sequence[int]] = None, noise_px: float = 0.0,
                      rng: Optional[np.random.Generator] = None) -> Landmarks2D:
    '''Image positions of the given vertices (default: the model's landmarks), optionally with Gaussian noise.'''
    idx = model.landmark_indices if indices is None else np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise InvalidArgumentError("no vertices to project")
    vertices = synthesize_vertices(model, alpha)
    points = project_points(vertices[idx], camera, idx)
    if noise_px > 0:
        rng = rng or np.random.default_rng(0)
        points = points + rng.normal(0.0, noise_px, size=points.shape)
    return Landmarks2D(vertex_indices=idx, points=points)

def fit_landmarks(model: ShapeModel, landmarks: Landmarks2D, camera_kind: str,
                  config: Optional[Union[OrthoFitConfig, PerspFitConfig]] = None,
                  fixed_tz: Optional[float] = None) -> FitResult:
    if camera_kind == "ortho":
        if fixed_tz is not None:
            raise InvalidArgumentError("a fixed distance only applies to the perspective camera")
        return fit_landmarks_ortho(model, landmarks, config)
    if camera_kind == "persp":
        if config is not None and not isinstance(config, PerspFitConfig):
            config = PerspFitConfig(**config.dict())
        return fit_landmarks_persp(model, landmarks, config, fixed_tz=fixed_tz)
    raise InvalidArgumentError(f"unknown camera kind '{camera_kind}' (expected one of {', '.join(CAMERA_KINDS)})")

def landmark_error(model: ShapeModel, result: FitResult) -> Optional[float]:
    '''d_L of a fit, in % of the interocular distance (None when the model has no eye landmarks).'''
    vertices = synthesize_vertices(model, result.alpha)
    return fit_landmark_error(model, result.landmarks, vertices,
                              lambda pts: project_points(pts, result.pose))
