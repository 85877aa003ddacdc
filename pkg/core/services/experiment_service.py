from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import settings
from core.analysis import experiments
from core.analysis.diagnostics import JACOBIAN_TOLERANCE, RODRIGUES_TOLERANCE, jacobian_errors
from core.models.fit import OrthoFitConfig, PerspFitConfig
from core.models.observations import Landmarks2D
from core.models.shape_model import ShapeModel
from core.services.base_service import BaseService
from core.storage.repositories.base_repository import PathLike
from core.storage.repositories.table_repository import TableRepository
from utils.logger import get_logger

logger = get_logger(__name__)

HEADERS = {
    "ortho_limit": ["t_z", "d_l_mean", "d_l_max"],
    "ambiguity": ["gen", "fit", "d_l", "d_s_mm"],
    "distance_bias": ["alpha", "true_t_z", "estimated_t_z", "relative_error", "low_confidence", "d_l"],
    "compare_als": ["seed", "snls_objective", "als_objective", "snls_d_s_mm", "als_d_s_mm",
                    "snls_iterations", "als_rounds", "snls_not_worse"],
    "distance_sweep": ["kind", "t_z", "d_l", "objective", "alpha_norm", "d_s_mm"],
    "pose_sweep": ["yaw_deg", "d_s_mm", "d_l", "samples"],
    "jacobians": ["trial", "rodrigues", "ortho", "persp_dlt"],
}

class ExperimentService(BaseService):
    def __init__(self, threads: Optional[int] = None):
        super().__init__()
        self.threads = threads or settings.THREADS

    def save_table(self, kind: str, rows: List[Dict], path: PathLike):
        self.output(TableRepository(path)).save(HEADERS[kind], rows)
        logger.info(f"Wrote {len(rows)} {kind} rows to {path}")

    def ortho_limit(self, model: ShapeModel, seeds: Sequence[int], distances: Sequence[float]) -> List[Dict]:
        try:
            rows = experiments.persp_vs_ortho_sweep(model, experiments.sample_alphas(model, seeds), distances,
                                                    self.threads)
            logger.info(f"Perspective departure at {distances[-1]} m: {rows[-1]['d_l_mean']:.4f}%")
            return rows
        except Exception as e:
            logger.error(f"Error running the orthographic-limit sweep: {str(e)}")
            raise

    def ambiguity(self, model: ShapeModel, seeds: Sequence[int], gen_distances: Sequence,
                  fit_distances: Sequence, config: Optional[PerspFitConfig] = None) -> List[Dict]:
        try:
            gen = [experiments.parse_distance(d) for d in gen_distances]
            fit = [experiments.parse_distance(d) for d in fit_distances]
            rows = experiments.ambiguity_table(model, experiments.sample_alphas(model, seeds), gen, fit,
                                               config, self.threads)
            logger.info(f"Ambiguity table: {len(gen)} x {len(fit)} cells over {len(seeds)} shapes")
            return rows
        except Exception as e:
            logger.error(f"Error building the ambiguity table: {str(e)}")
            raise

    def distance_bias(self, model: ShapeModel, seeds: Sequence[int], distances: Sequence[float],
                      config: Optional[PerspFitConfig] = None) -> List[Dict]:
        try:
            rows = experiments.distance_bias_experiment(model, experiments.sample_alphas(model, seeds), distances,
                                                        config, self.threads)
            bias = np.mean([row["relative_error"] for row in rows])
            logger.info(f"Distance estimates over {len(rows)} instances: mean relative error {bias:+.3f}")
            return rows
        except Exception as e:
            logger.error(f"Error running the distance-bias experiment: {str(e)}")
            raise

    def compare_als(self, model: ShapeModel, seeds: Sequence[int], noise_px: float,
                    config: Optional[OrthoFitConfig] = None) -> List[Dict]:
        try:
            rows = experiments.snls_vs_als(model, seeds, noise_px, config, self.threads)
            wins = sum(row["snls_not_worse"] for row in rows)
            logger.info(f"SNLS objective <= ALS objective on {wins}/{len(rows)} seeds")
            return rows
        except Exception as e:
            logger.error(f"Error comparing SNLS with ALS: {str(e)}")
            raise

    def distance_sweep(self, model: ShapeModel, landmarks: Landmarks2D, distances: Sequence[float],
                       config: Optional[PerspFitConfig] = None) -> List[Dict]:
        try:
            rows = experiments.distance_sweep(model, landmarks, distances, config, self.threads)
            logger.info(f"Distance sweep over {len(distances)} distances; free estimate {rows[-1]['t_z']:.4f} m")
            return rows
        except Exception as e:
            logger.error(f"Error running the distance sweep: {str(e)}")
            raise

    def pose_sweep(self, model: ShapeModel, seeds: Sequence[int], yaw_degrees: Sequence[float],
                   noise_px: float, seed: int = 0, config: Optional[OrthoFitConfig] = None) -> List[Dict]:
        try:
            return experiments.pose_sweep(model, experiments.sample_alphas(model, seeds), yaw_degrees, noise_px,
                                          seed, config, self.threads)
        except Exception as e:
            logger.error(f"Error running the pose sweep: {str(e)}")
            raise

    def check_jacobians(self, model: ShapeModel, trials: int, seed: int = 0) -> Tuple[List[Dict], bool]:
        """Per-trial Jacobian errors and whether every one is within tolerance."""
        rows = []
        for trial in range(trials):
            errors = jacobian_errors(model, np.random.default_rng([seed, trial]))
            rows.append({"trial": trial, **errors})
        ok = all(row["ortho"] < JACOBIAN_TOLERANCE and row["persp_dlt"] < JACOBIAN_TOLERANCE
                 and row["rodrigues"] < RODRIGUES_TOLERANCE for row in rows)
        worst = {key: max(row[key] for row in rows) for key in HEADERS["jacobians"][1:]} if rows else {}
        if ok:
            logger.info(f"Jacobian checks passed over {trials} trials: {worst}")
        else:
            logger.warning(f"Jacobian check failed: worst errors {worst}")
        return rows, ok
