from typing import Optional, Tuple, Union

from core.fitting.contours import occluding_boundary
from core.fitting.contours import fit_contours as fit_contours_kernel
from core.fitting.edges import detect_edges
from core.fitting.landmarks import fit_landmarks as fit_landmarks_kernel
from core.fitting.landmarks import landmark_error
from core.models.fit import (FLAG_FD_JACOBIAN, FLAG_LOW_CONFIDENCE, FLAG_NO_CORRESPONDENCES, FLAG_RANK_DEFICIENT,
                             ContourFitConfig, FitReport, FitResult, OrthoFitConfig, PerspFitConfig)
from core.models.observations import EdgeMap, Landmarks2D
from core.models.shape_model import ShapeModel
from core.services.base_service import BaseService
from core.storage.repositories.base_repository import PathLike
from core.storage.repositories.edge_repository import EdgeRepository
from core.storage.repositories.landmark_repository import LandmarkRepository
from core.storage.repositories.mesh_repository import MeshRepository, export_obj
from core.storage.repositories.report_repository import ReportRepository
from utils.logger import get_logger

logger = get_logger(__name__)

WARNING_FLAGS = (FLAG_RANK_DEFICIENT, FLAG_FD_JACOBIAN, FLAG_NO_CORRESPONDENCES, FLAG_LOW_CONFIDENCE)

class FittingService(BaseService):
    def load_landmarks(self, path: PathLike) -> Landmarks2D:
        landmarks = LandmarkRepository(path).load()
        logger.info(f"Loaded {landmarks.count} landmarks from {path}")
        return landmarks

    def load_edges(self, edges_path: Optional[PathLike] = None, image_path: Optional[PathLike] = None,
                   low: Optional[float] = None, high: Optional[float] = None) -> EdgeMap:
        """Edge pixels from a mask/list file, or detected in a grayscale image."""
        if edges_path is not None:
            edges = EdgeRepository(edges_path).load()
            logger.info(f"Loaded {edges.count} edge pixels ({edges.width}x{edges.height}) from {edges_path}")
            return edges
        image = EdgeRepository(image_path).load_image()
        edges = detect_edges(image, low, high)
        logger.info(f"Detected {edges.count} edge pixels in {image_path}")
        return edges

    def _log_result(self, what: str, result: FitResult):
        logger.info(f"{what}: camera={result.camera} objective={result.objective:.6e} "
                    f"iterations={result.iterations} restarts={result.restarts_used}")
        for flag in result.flags:
            if flag in WARNING_FLAGS:
                logger.warning(f"{what} flagged: {flag}")

    def fit_landmarks(self, model: ShapeModel, landmarks: Landmarks2D, camera_kind: str,
                      config: Optional[Union[OrthoFitConfig, PerspFitConfig]] = None,
                      fixed_tz: Optional[float] = None) -> FitResult:
        try:
            result = fit_landmarks_kernel(model, landmarks, camera_kind, config, fixed_tz)
            self._log_result("Landmark fit", result)
            return result
        except Exception as e:
            logger.error(f"Error fitting {landmarks.count} landmarks ({camera_kind}): {str(e)}")
            raise

    def fit_contours(self, model: ShapeModel, landmarks: Landmarks2D, edges: EdgeMap, camera_kind: str,
                     config: Optional[ContourFitConfig] = None) -> FitResult:
        try:
            result = fit_contours_kernel(model, landmarks, edges, config, camera_kind)
            self._log_result(f"Contour fit ({result.rounds} rounds)", result)
            return result
        except Exception as e:
            logger.error(f"Error fitting contours ({camera_kind}): {str(e)}")
            raise

    def build_report(self, model: ShapeModel, result: FitResult) -> FitReport:
        return FitReport.from_result(result, model.sigma, landmark_error(model, result))

    def save_report(self, report: FitReport, path: PathLike):
        self.output(ReportRepository(path)).save(report)
        logger.info(f"Wrote fit report {path} (d_L={report.d_l})")

    def export_mesh(self, model: ShapeModel, result: FitResult, path: PathLike,
                    boundary_path: Optional[PathLike] = None) -> Tuple[MeshRepository, Optional[MeshRepository]]:
        mesh = self.output(export_obj(model, result.alpha, path))
        logger.info(f"Wrote mesh {path}")
        sidecar = None
        if boundary_path is not None and model.topology is not None:
            boundary = occluding_boundary(model, result.alpha, result.pose)
            sidecar = self.output(MeshRepository(boundary_path))
            sidecar.save_boundary(boundary.vertex_indices)
            logger.info(f"Wrote {boundary.count} occluding boundary vertices to {boundary_path}")
        return mesh, sidecar
