from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, validator

from config import settings
from core.models.base import ArrayModel, frozen_array
from core.models.camera import OrthoPose, PerspCamera
from core.models.observations import Landmarks2D
from core.models.solver import SolveReport, SolverOptions

# Flags attached to fit results
FLAG_RANK_DEFICIENT = "rank-deficient"
FLAG_FD_JACOBIAN = "fd-jacobian"
FLAG_RESTARTS_USED = "restarts-used"
FLAG_LOW_CONFIDENCE = "low-confidence-distance"
FLAG_NO_CORRESPONDENCES = "no-correspondences"
FLAG_CLAMPED = "coefficients-clamped"

class OrthoFitConfig(BaseModel):
    tikhonov_weight: float = Field(default_factory=lambda: settings.TIKHONOV_WEIGHT, ge=0)
    coeff_bound_sigmas: Optional[float] = Field(None, gt=0)  # None: sparse/dense default
    dense: bool = False
    init_rotation: Optional[Tuple[float, float, float]] = None
    init_scale: Optional[float] = Field(None, gt=0)
    restarts: bool = True
    max_outer_iters: int = Field(100, ge=1)  # ALS rounds
    solver: SolverOptions = Field(default_factory=SolverOptions)

    class Config:
        allow_mutation = False

    @property
    def bound_sigmas(self) -> float:
        if self.coeff_bound_sigmas is not None:
            return self.coeff_bound_sigmas
        return settings.DENSE_BOUND_SIGMAS if self.dense else settings.SPARSE_BOUND_SIGMAS

def resolve_principal_point(principal_point: Optional[Tuple[float, float]] = None,
                            image_size: Optional[Tuple[int, int]] = None) -> Tuple[float, float]:
    '''Principal point: explicit, else image centre, else origin.'''
    if principal_point is not None:
        return tuple(float(c) for c in principal_point)
    if image_size is not None:
        return (image_size[0] / 2.0, image_size[1] / 2.0)
    return (0.0, 0.0)

class PerspFitConfig(OrthoFitConfig):
    init_focal: Optional[float] = Field(None, gt=0)
    init_distance: float = Field(default_factory=lambda: settings.INITIAL_DISTANCE, gt=0)
    principal_point: Optional[Tuple[float, float]] = None
    image_size: Optional[Tuple[int, int]] = None
    refine: bool = True
    fd_jacobian: bool = False
    curvature_threshold: float = 1e-3

    @property
    def centre(self) -> Tuple[float, float]:
        return resolve_principal_point(self.principal_point, self.image_size)

class ContourFitConfig(BaseModel):
    max_rounds: int = Field(default_factory=lambda: settings.CONTOUR_MAX_ROUNDS, ge=0)
    percentile: Optional[float] = Field(default_factory=lambda: settings.CONTOUR_PERCENTILE)
    max_distance: Optional[float] = Field(None, gt=0)
    stability: float = 0.01
    image_size: Tuple[int, int] = (512, 512)
    landmark_fit: PerspFitConfig = Field(default_factory=PerspFitConfig)

    class Config:
        allow_mutation = False

    @validator("percentile")
    def _check_percentile(cls, v):
        if v is not None and not 0 < v <= 100:
            raise ValueError("percentile must be in (0, 100]")
        return v

class FitResult(ArrayModel):
    camera: str  # "ortho" | "persp"
    alpha: np.ndarray
    alpha_normalized: np.ndarray
    pose: Union[OrthoPose, PerspCamera]
    residuals: np.ndarray
    objective: float
    report: SolveReport
    landmarks: Landmarks2D
    stage1: Optional[SolveReport] = None
    flags: List[str] = []
    restarts_used: int = 0
    rounds: int = 0
    round_objectives: List[float] = []

    @validator("alpha", "alpha_normalized", "residuals", pre=True)
    def _as_vector(cls, v, field):
        return frozen_array(np.asarray(v, dtype=float).ravel(), name=field.name)

    @property
    def iterations(self) -> int:
        return self.report.iterations

class FitReport(BaseModel):
    '''Serialised fit, stable across releases of the same schema tag.'''
    schema_tag: str = Field(default_factory=lambda: settings.REPORT_SCHEMA, alias="schema")
    camera: str
    alpha: List[float]
    alpha_normalized: List[float]
    sigma: List[float]
    pose: Dict[str, Any]
    objective: float
    d_l: Optional[float] = None
    iterations: Dict[str, int] = {}
    flags: List[str] = []
    restarts_used: int = 0
    landmarks: List[Tuple[int, float, float]] = []

    class Config:
        allow_population_by_field_name = True
        schema_extra = {
            "example": {
                "schema": "geofit3d/1",
                "camera": "persp",
                "alpha": [0.0012, -0.0004],
                "alpha_normalized": [0.31, -0.12],
                "sigma": [0.0039, 0.0033],
                "pose": {"r": [0.0, 0.1, 0.0], "t3d": [0.0, 0.0, 0.6], "f": 1200.0, "principal_point": [256.0, 256.0]},
                "objective": 1.2e-9,
                "d_l": 1.4e-6,
                "iterations": {"stage1": 9, "stage2": 3},
                "flags": [],
                "restarts_used": 0,
                "landmarks": [[12, 301.5, 220.25]]
            }
        }

    @validator("schema_tag")
    def _check_schema(cls, v):
        if v != settings.REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema '{v}'")
        return v

    @validator("camera")
    def _check_camera(cls, v):
        if v not in ("ortho", "persp"):
            raise ValueError(f"unknown camera kind '{v}'")
        return v

    @classmethod
    def from_result(cls, result: FitResult, sigma: np.ndarray, d_l: Optional[float] = None) -> "FitReport":
        iterations = {"stage1": result.stage1.iterations, "stage2": result.report.iterations} \
            if result.stage1 is not None else {"stage1": result.report.iterations}
        if result.rounds:
            iterations["contour_rounds"] = result.rounds
        return cls(
            camera=result.camera,
            alpha=result.alpha.tolist(),
            alpha_normalized=result.alpha_normalized.tolist(),
            sigma=np.asarray(sigma, dtype=float).tolist(),
            pose=result.pose.to_dict(),
            objective=result.objective,
            d_l=d_l,
            iterations=iterations,
            flags=list(result.flags),
            restarts_used=result.restarts_used,
            landmarks=[(int(i), float(x), float(y))
                       for i, (x, y) in zip(result.landmarks.vertex_indices, result.landmarks.points)],
        )

    def camera_model(self) -> Union[OrthoPose, PerspCamera]:
        '''Rebuild the fitted pose or camera.'''
        if self.camera == "ortho":
            return OrthoPose(**self.pose)
        pose = dict(self.pose)
        pose["principal_point"] = tuple(pose.get("principal_point", (0.0, 0.0)))
        return PerspCamera(**pose)

    def observations(self) -> Landmarks2D:
        if not self.landmarks:
            raise ValueError("report carries no landmark observations")
        return Landmarks2D(vertex_indices=[row[0] for row in self.landmarks],
                           points=[(row[1], row[2]) for row in self.landmarks])
