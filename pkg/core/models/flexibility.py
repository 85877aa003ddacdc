from typing import List, Optional

import numpy as np
from pydantic import Field, root_validator, validator

from core.models.base import ArrayModel, frozen_array

class FlexibilitySpectrum(ArrayModel):
    '''
    Flexibility modes sorted by generalised eigenvalue (descending).

    modes[:, i] is scaled so that alpha + modes[:, i] moves the surface by k1
    metres on average (mean per-vertex Euclidean displacement).
    '''
    modes: np.ndarray  # (S, S), columns are modes
    eigenvalues: np.ndarray
    k1: float = Field(..., gt=0)
    retained: Optional[List[int]] = None
    plausible: Optional[List[int]] = None
    landmark_shift: Optional[List[float]] = None  # pixels, per mode at k1

    @validator("modes", pre=True)
    def _as_modes(cls, v):
        return frozen_array(v, shape=(None, None), name="modes")

    @validator("eigenvalues", pre=True)
    def _as_eigenvalues(cls, v):
        return frozen_array(np.asarray(v, dtype=float).ravel(), name="eigenvalues")

    @root_validator(skip_on_failure=True)
    def _check_order(cls, values):
        lam = values["eigenvalues"]
        if values["modes"].shape[1] != lam.size:
            raise ValueError("one eigenvalue per mode required")
        if np.any(np.diff(lam) > 1e-12 * max(1.0, float(np.max(np.abs(lam))))):
            raise ValueError("eigenvalues must be sorted in descending order")
        return values

    @property
    def num_modes(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def retained_count(self) -> Optional[int]:
        return None if self.retained is None else len(self.retained)

    @property
    def plausible_count(self) -> Optional[int]:
        return None if self.plausible is None else len(self.plausible)

    def mode(self, i: int) -> np.ndarray:
        return self.modes[:, i]
