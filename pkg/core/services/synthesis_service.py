from typing import Optional, Sequence, Tuple

import numpy as np

from core.analysis.experiments import normalized_camera, normalized_pose
from core.fitting.landmarks import CAMERA_KINDS, project_landmarks
from core.geometry.synthetic import make_synthetic_model
from core.models.camera import OrthoPose, PerspCamera
from core.models.fit import resolve_principal_point
from core.models.observations import Landmarks2D
from core.models.shape_model import ShapeModel
from core.services.base_service import BaseService
from core.storage.repositories.base_repository import PathLike
from core.storage.repositories.landmark_repository import LandmarkRepository
from core.storage.repositories.model_repository import ModelRepository
from core.storage.repositories.table_repository import TableRepository
from utils.errors import InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

class SynthesisService(BaseService):
    def synthesize_model(self, seed: int, n_vertices: int, n_modes: int, scale: float = 0.16,
                         n_landmarks: int = 20, out: Optional[PathLike] = None) -> ShapeModel:
        try:
            model = make_synthetic_model(seed, n_vertices, n_modes, scale, n_landmarks)
            if out is not None:
                self.output(ModelRepository(out)).save(model)
            logger.info(f"Synthesised model seed={seed} N={n_vertices} S={n_modes} scale={scale} m")
            return model
        except Exception as e:
            logger.error(f"Error synthesising model: {str(e)}")
            raise

    def load_alpha(self, model: ShapeModel, path: Optional[PathLike]) -> np.ndarray:
        """Shape coefficients from a one-column CSV; the mean shape when no file is given."""
        if path is None:
            return np.zeros(model.num_modes)
        alpha = TableRepository(path).load_vector()
        if alpha.size != model.num_modes:
            raise InvalidArgumentError(f"{path} has {alpha.size} coefficients, model has {model.num_modes} modes")
        return alpha

    def camera(self, model: ShapeModel, alpha, camera_kind: str, rotation_deg: Sequence[float] = (0.0, 0.0, 0.0),
               distance: Optional[float] = None, focal: Optional[float] = None, scale: Optional[float] = None,
               principal_point: Optional[Tuple[float, float]] = None,
               image_size: Optional[Tuple[int, int]] = None):
        """
        Camera for forward projection. Unset focal length or scale is chosen so
        the eyes land 200 px apart. The perspective principal point resolves like
        the fitting side: explicit, else the image centre, else the origin.
        """
        if camera_kind not in CAMERA_KINDS:
            raise InvalidArgumentError(f"unknown camera kind '{camera_kind}'")
        rotation = np.radians(np.asarray(rotation_deg, dtype=float))
        if camera_kind == "ortho":
            pose = normalized_pose(model, alpha, rotation)
            if scale is not None:
                pose = OrthoPose(r=rotation, t2d=pose.t2d * pose.s / scale, s=scale)
            return pose
        distance = distance or 1.0
        if focal is None:
            focal = normalized_camera(model, alpha, distance, rotation).f
        return PerspCamera(r=rotation, t3d=[0.0, 0.0, distance], f=focal,
                           principal_point=resolve_principal_point(principal_point, image_size))

    def project(self, model: ShapeModel, alpha, camera, noise_px: float = 0.0, seed: int = 0,
                indices: Optional[Sequence[int]] = None) -> Landmarks2D:
        if noise_px < 0:
            raise InvalidArgumentError("noise must be non-negative")
        landmarks = project_landmarks(model, alpha, camera, indices, noise_px, np.random.default_rng(seed))
        logger.info(f"Projected {landmarks.count} landmarks ({camera.kind}, noise {noise_px} px)")
        return landmarks

    def save_landmarks(self, landmarks: Landmarks2D, path: PathLike):
        self.output(LandmarkRepository(path)).save(landmarks)
