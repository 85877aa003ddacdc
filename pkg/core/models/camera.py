from typing import Tuple

import numpy as np
from pydantic import Field, validator

from core.models.base import ArrayModel, frozen_array

class OrthoPose(ArrayModel):
    r: np.ndarray  # axis-angle, radians
    t2d: np.ndarray  # model units (pre-scale)
    s: float = Field(..., gt=0)  # pixels per metre

    @validator("r", pre=True)
    def _as_r(cls, v):
        return frozen_array(v, shape=(3,), name="r")

    @validator("t2d", pre=True)
    def _as_t2d(cls, v):
        return frozen_array(v, shape=(2,), name="t2d")

    @property
    def kind(self) -> str:
        return "ortho"

    def to_dict(self) -> dict:
        return {"r": self.r.tolist(), "t2d": self.t2d.tolist(), "s": float(self.s)}

class PerspCamera(ArrayModel):
    r: np.ndarray
    t3d: np.ndarray  # [t_x, t_y, t_z], metres
    f: float = Field(..., gt=0)  # pixels
    principal_point: Tuple[float, float] = (0.0, 0.0)

    @validator("r", pre=True)
    def _as_r(cls, v):
        return frozen_array(v, shape=(3,), name="r")

    @validator("t3d", pre=True)
    def _as_t3d(cls, v):
        arr = frozen_array(v, shape=(3,), name="t3d")
        if arr[2] <= 0:
            raise ValueError("t_z must be positive (subject in front of the camera)")
        return arr

    @property
    def kind(self) -> str:
        return "persp"

    @property
    def t_z(self) -> float:
        return float(self.t3d[2])

    def intrinsics(self) -> np.ndarray:
        cx, cy = self.principal_point
        return np.array([[self.f, 0.0, cx], [0.0, self.f, cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {
            "r": self.r.tolist(),
            "t3d": self.t3d.tolist(),
            "f": float(self.f),
            "principal_point": [float(c) for c in self.principal_point],
        }
