from typing import Optional, Sequence

import numpy as np
from pydantic import Field, root_validator, validator

from core.models.base import ArrayModel, frozen_array

class Landmarks2D(ArrayModel):
    '''Ordered 2D observations of model vertices, in pixels.'''
    vertex_indices: np.ndarray
    points: np.ndarray  # (L, 2)

    @validator("vertex_indices", pre=True)
    def _as_indices(cls, v):
        arr = np.asarray(v, dtype=np.int64).ravel()
        if arr.size and arr.min() < 0:
            raise ValueError("vertex indices must be non-negative")
        return frozen_array(arr, dtype=np.int64, name="vertex_indices")

    @validator("points", pre=True)
    def _as_points(cls, v):
        return frozen_array(np.asarray(v, dtype=float).reshape(-1, 2), shape=(None, 2), name="points")

    @root_validator(skip_on_failure=True)
    def _check_counts(cls, values):
        idx, pts = values["vertex_indices"], values["points"]
        if idx.size < 1:
            raise ValueError("at least one landmark is required")
        if idx.size != pts.shape[0]:
            raise ValueError(f"{idx.size} indices but {pts.shape[0]} points")
        if np.unique(idx).size != idx.size:
            raise ValueError("landmark vertex indices must be distinct")
        return values

    @property
    def count(self) -> int:
        return int(self.vertex_indices.size)

    def stacked(self) -> np.ndarray:
        '''Observations as [x1, y1, ..., xL, yL].'''
        return self.points.reshape(-1)

    def extended(self, vertex_indices: Sequence[int], points: np.ndarray) -> "Landmarks2D":
        '''Append observations for vertices not already present.'''
        present = set(self.vertex_indices.tolist())
        keep = [k for k, v in enumerate(vertex_indices) if int(v) not in present]
        if not keep:
            return self
        extra_idx = np.asarray(vertex_indices, dtype=np.int64)[keep]
        extra_pts = np.asarray(points, dtype=float).reshape(-1, 2)[keep]
        return Landmarks2D(
            vertex_indices=np.concatenate([self.vertex_indices, extra_idx]),
            points=np.vstack([self.points, extra_pts]),
        )

class EdgeMap(ArrayModel):
    '''Set of edge pixels {(x, y)} inside a width x height image.'''
    pixels: np.ndarray  # (K, 2) integer x, y
    width: int = Field(..., gt=0)
    height: int = Field(..., gt=0)

    @validator("pixels", pre=True)
    def _as_pixels(cls, v):
        arr = np.asarray(v, dtype=np.int64).reshape(-1, 2)
        if arr.size:
            arr = np.unique(arr, axis=0)
        return frozen_array(arr, dtype=np.int64, name="pixels")

    @root_validator(skip_on_failure=True)
    def _check_bounds(cls, values):
        px = values["pixels"]
        if px.size:
            if px.min() < 0 or px[:, 0].max() >= values["width"] or px[:, 1].max() >= values["height"]:
                raise ValueError("edge pixel outside the image")
        return values

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "EdgeMap":
        rows, cols = np.nonzero(np.asarray(mask))
        height, width = np.asarray(mask).shape
        return cls(pixels=np.column_stack([cols, rows]), width=width, height=height)

    @classmethod
    def empty(cls, width: int = 512, height: int = 512) -> "EdgeMap":
        return cls(pixels=np.zeros((0, 2), dtype=np.int64), width=width, height=height)

    @property
    def count(self) -> int:
        return int(self.pixels.shape[0])

    def to_mask(self) -> np.ndarray:
        mask = np.zeros((self.height, self.width), dtype=bool)
        if self.count:
            mask[self.pixels[:, 1], self.pixels[:, 0]] = True
        return mask

class BoundarySet(ArrayModel):
    vertex_indices: np.ndarray

    @validator("vertex_indices", pre=True)
    def _as_indices(cls, v):
        return frozen_array(np.unique(np.asarray(v, dtype=np.int64).ravel()), dtype=np.int64, name="vertex_indices")

    @property
    def count(self) -> int:
        return int(self.vertex_indices.size)

class Correspondences(ArrayModel):
    '''Mutual nearest-neighbour pairs between boundary vertices and edge pixels.'''
    vertex_indices: np.ndarray
    pixels: np.ndarray  # (K, 2)
    distances: np.ndarray

    @validator("vertex_indices", pre=True)
    def _as_indices(cls, v):
        return frozen_array(np.asarray(v, dtype=np.int64).ravel(), dtype=np.int64, name="vertex_indices")

    @validator("pixels", pre=True)
    def _as_pixels(cls, v):
        return frozen_array(np.asarray(v, dtype=float).reshape(-1, 2), name="pixels")

    @validator("distances", pre=True)
    def _as_distances(cls, v):
        return frozen_array(np.asarray(v, dtype=float).ravel(), name="distances")

    @property
    def count(self) -> int:
        return int(self.vertex_indices.size)

    def pairs(self) -> set:
        return {(int(i), int(x), int(y)) for i, (x, y) in zip(self.vertex_indices, np.rint(self.pixels).astype(int))}
