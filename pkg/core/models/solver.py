from enum import Enum
from typing import List

import numpy as np
from pydantic import BaseModel, Field, validator

from config import settings
from core.models.base import ArrayModel, frozen_array

class TerminationReason(str, Enum):
    GRADIENT = "gradient"
    STEP = "step"
    OBJECTIVE_CHANGE = "objective-change"
    MAX_ITER = "max-iter"

class SolverOptions(BaseModel):
    max_iterations: int = Field(default_factory=lambda: settings.MAX_ITERATIONS, ge=0)
    ftol: float = Field(default_factory=lambda: settings.FTOL, ge=0)
    gtol: float = Field(default_factory=lambda: settings.GTOL, ge=0)
    xtol: float = Field(default_factory=lambda: settings.XTOL, ge=0)
    initial_radius: float = Field(default_factory=lambda: settings.INITIAL_RADIUS, gt=0)
    expand_ratio: float = 0.75
    shrink_ratio: float = 0.25
    accept_ratio: float = 1e-4

    class Config:
        allow_mutation = False

class SolveReport(ArrayModel):
    x: np.ndarray
    objective: float
    iterations: int
    reason: TerminationReason
    trace: List[float] = []
    nfev: int = 0
    njev: int = 0

    @validator("x", pre=True)
    def _as_x(cls, v):
        return frozen_array(np.asarray(v, dtype=float).ravel(), name="x")

    @property
    def converged(self) -> bool:
        return self.reason != TerminationReason.MAX_ITER
