from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from core.analysis.flexibility import (apply_mode, flexibility_modes, landmark_shifts, plausibility_filter,
                                       projection_matrix_ortho, projection_matrix_persp)
from core.models.fit import FitReport
from core.models.flexibility import FlexibilitySpectrum
from core.models.shape_model import ShapeModel
from core.services.base_service import BaseService
from core.storage.repositories.base_repository import PathLike
from core.storage.repositories.mesh_repository import MeshRepository
from core.storage.repositories.report_repository import ReportRepository
from core.storage.repositories.table_repository import TableRepository
from utils.errors import FormatError
from utils.logger import get_logger

logger = get_logger(__name__)

SPECTRUM_HEADER = ["mode", "eigenvalue", "landmark_shift_px", "retained", "plausible"]
SNAPSHOT_WEIGHTS = {"minus": -1.0, "zero": 0.0, "plus": 1.0}

class FlexibilityService(BaseService):
    def load_report(self, path: PathLike) -> FitReport:
        report = ReportRepository(path).load()
        logger.info(f"Loaded {report.camera} fit report {path}")
        return report

    def spectrum(self, model: ShapeModel, report: FitReport, k1: float, k2: float,
                 n_sigmas: float = 3.0) -> FlexibilitySpectrum:
        """Flexibility modes of a saved fit, with landmark shifts, the k2 truncation and plausibility."""
        try:
            camera = report.camera_model()
            landmarks = report.observations()
        except ValueError as e:
            raise FormatError(f"fit report cannot be analysed: {str(e)}")
        if len(report.alpha) != model.num_modes:
            raise FormatError(f"report has {len(report.alpha)} coefficients, model has {model.num_modes} modes")

        try:
            alpha = np.asarray(report.alpha)
            if report.camera == "ortho":
                projection = projection_matrix_ortho(model, landmarks, camera.r)
            else:
                projection = projection_matrix_persp(model, landmarks, camera)
            spectrum = flexibility_modes(model, projection, k1)
            shifts = landmark_shifts(spectrum, model, landmarks, camera, k1, alpha)
            retained = [i for i, shift in enumerate(shifts) if shift < k2]
            plausible = plausibility_filter(spectrum, alpha, model.sigma, n_sigmas, indices=retained)
            spectrum = spectrum.copy(update={
                "landmark_shift": shifts.tolist(),
                "retained": retained,
                "plausible": plausible,
            })
            logger.info(f"Flexibility: {len(retained)} of {spectrum.num_modes} modes move landmarks "
                        f"< {k2} px at {k1 * 1000:.1f} mm; {len(plausible)} plausible")
            return spectrum
        except Exception as e:
            logger.error(f"Error computing flexibility modes: {str(e)}")
            raise

    def save_spectrum(self, spectrum: FlexibilitySpectrum, path: PathLike):
        retained = set(spectrum.retained or [])
        plausible = set(spectrum.plausible or [])
        shifts = spectrum.landmark_shift or [None] * spectrum.num_modes
        rows = [{
            "mode": i,
            "eigenvalue": float(spectrum.eigenvalues[i]),
            "landmark_shift_px": shifts[i],
            "retained": i in retained,
            "plausible": i in plausible,
        } for i in range(spectrum.num_modes)]
        self.output(TableRepository(path)).save(SPECTRUM_HEADER, rows)
        logger.info(f"Wrote spectrum of {spectrum.num_modes} modes to {path}")

    def save_snapshots(self, model: ShapeModel, alpha: Sequence[float], spectrum: FlexibilitySpectrum,
                       directory: PathLike, modes: Optional[Sequence[int]] = None) -> List[Path]:
        """OBJ meshes of alpha + w * mode for w in {-1, 0, +1}; defaults to the retained modes."""
        directory = Path(directory)
        modes = spectrum.retained if modes is None else modes
        written = []
        for i in modes or []:
            for name, w in SNAPSHOT_WEIGHTS.items():
                path = directory / f"mode_{i:03d}_{name}.obj"
                self.output(MeshRepository(path)).save(apply_mode(model, alpha, spectrum.mode(i), w), model.topology)
                written.append(path)
        logger.info(f"Wrote {len(written)} mode snapshots to {directory}")
        return written
