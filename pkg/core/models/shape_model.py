from typing import Dict, List, Optional, Set, Tuple

import numpy as np
from pydantic import Field, root_validator, validator

from core.models.base import ArrayModel, frozen_array

class MeshTopology(ArrayModel):
    triangles: np.ndarray  # (T, 3) vertex indices, consistent winding

    @validator("triangles", pre=True)
    def _as_triangles(cls, v):
        arr = np.array(v, dtype=np.int64).reshape(-1, 3)
        if arr.size and arr.min() < 0:
            raise ValueError("triangle indices must be non-negative")
        degenerate = (arr[:, 0] == arr[:, 1]) | (arr[:, 1] == arr[:, 2]) | (arr[:, 0] == arr[:, 2])
        if np.any(degenerate):
            raise ValueError(f"degenerate triangle at index {int(np.argmax(degenerate))}")
        return frozen_array(arr, dtype=np.int64, name="triangles")

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def edge_faces(self) -> Dict[Tuple[int, int], List[int]]:
        '''Map each undirected edge (i < j) to the triangles that contain it.'''
        faces: Dict[Tuple[int, int], List[int]] = {}
        for t, (a, b, c) in enumerate(self.triangles.tolist()):
            for i, j in ((a, b), (b, c), (c, a)):
                key = (i, j) if i < j else (j, i)
                faces.setdefault(key, []).append(t)
        return faces

    def boundary_edges(self) -> Set[Tuple[int, int]]:
        '''Edges that belong to exactly one triangle.'''
        return {edge for edge, tris in self.edge_faces().items() if len(tris) == 1}

    def boundary_vertices(self) -> Set[int]:
        return {v for edge in self.boundary_edges() for v in edge}

class ShapeModel(ArrayModel):
    '''
    Linear shape model: shape(alpha) = mean + basis @ alpha.

    Vertices are interleaved [u1, v1, w1, u2, ...] in metres. Basis columns are
    raw principal directions; sigma holds the per-mode standard deviations.
    '''
    mean: np.ndarray
    basis: np.ndarray
    sigma: np.ndarray
    topology: Optional[MeshTopology] = None
    landmark_indices: np.ndarray = Field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @validator("mean", "sigma", pre=True)
    def _as_vector(cls, v, field):
        return frozen_array(np.asarray(v, dtype=float).ravel(), name=field.name)

    @validator("basis", pre=True)
    def _as_matrix(cls, v):
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        return frozen_array(arr, shape=(None, None), name="basis")

    @validator("landmark_indices", pre=True, always=True)
    def _as_indices(cls, v):
        return frozen_array(np.asarray(v, dtype=np.int64).ravel(), dtype=np.int64, name="landmark_indices")

    @root_validator(skip_on_failure=True)
    def _check_dimensions(cls, values):
        mean, basis, sigma = values["mean"], values["basis"], values["sigma"]
        if mean.size == 0 or mean.size % 3:
            raise ValueError(f"mean length {mean.size} is not a positive multiple of 3")
        n = mean.size // 3
        if basis.shape[0] != 3 * n:
            raise ValueError(f"basis has {basis.shape[0]} rows, expected {3 * n}")
        if basis.shape[1] < 1:
            raise ValueError("basis must have at least one mode")
        if sigma.size != basis.shape[1]:
            raise ValueError(f"sigma length {sigma.size} does not match {basis.shape[1]} modes")
        if np.any(sigma <= 0):
            raise ValueError("sigma entries must be positive")
        idx = values["landmark_indices"]
        if idx.size:
            if idx.min() < 0 or idx.max() >= n:
                raise ValueError("landmark index out of range")
            if np.unique(idx).size != idx.size:
                raise ValueError("landmark indices must be distinct")
        topology = values.get("topology")
        if topology is not None and topology.num_triangles and topology.triangles.max() >= n:
            raise ValueError("triangle index out of range")
        return values

    @property
    def num_vertices(self) -> int:
        return self.mean.size // 3

    @property
    def num_modes(self) -> int:
        return self.basis.shape[1]

    @property
    def scaled_basis(self) -> np.ndarray:
        '''Basis with columns multiplied by sigma (unit-variance coefficients).'''
        return self.basis * self.sigma

class ShapeCoefficients(ArrayModel):
    alpha: np.ndarray

    @validator("alpha", pre=True)
    def _as_alpha(cls, v):
        return frozen_array(np.asarray(v, dtype=float).ravel(), name="alpha")
