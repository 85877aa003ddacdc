"""
SMM1 shape model files.

Layout (little-endian): magic "SMM1"; u32 N, u32 S, u32 P; f64 mean (3N),
f64 basis column-major (3N * S), f64 sigma (S); u32 T and u32 triangles (3T);
u32 landmark indices (P).
"""
import numpy as np
from pydantic import ValidationError

from core.models.shape_model import MeshTopology, ShapeModel
from core.storage.repositories.base_repository import BaseRepository
from utils.errors import FormatError

MAGIC = b"SMM1"

class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, dtype: str, count: int, what: str) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        if self.offset + size > len(self.data):
            raise FormatError(f"truncated {what}: need {size} bytes, {len(self.data) - self.offset} left",
                              offset=self.offset)
        out = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.offset).copy()
        self.offset += size
        return out

class ModelRepository(BaseRepository):
    def load(self) -> ShapeModel:
        reader = _Reader(self.read_bytes())
        if reader.data[:4] != MAGIC:
            raise FormatError(f"bad magic {reader.data[:4]!r}, expected {MAGIC!r}", offset=0)
        reader.offset = 4
        n, s, p = (int(v) for v in reader.take("<u4", 3, "header"))
        if n == 0 or s == 0:
            raise FormatError(f"model needs vertices and modes, header says N={n} S={s}", offset=4)

        mean = reader.take("<f8", 3 * n, "mean")
        basis = reader.take("<f8", 3 * n * s, "basis").reshape(s, 3 * n).T
        sigma_offset = reader.offset
        sigma = reader.take("<f8", s, "sigma")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(basis))):
            raise FormatError("non-finite mean or basis entry", offset=16)
        if np.any(~np.isfinite(sigma)) or np.any(sigma <= 0):
            raise FormatError("sigma entries must be positive", offset=sigma_offset)

        t = int(reader.take("<u4", 1, "triangle count")[0])
        triangle_offset = reader.offset
        triangles = reader.take("<u4", 3 * t, "triangles").reshape(t, 3).astype(np.int64)
        if t and triangles.max() >= n:
            raise FormatError(f"triangle index {int(triangles.max())} out of range for {n} vertices",
                              offset=triangle_offset)
        landmark_offset = reader.offset
        landmarks = reader.take("<u4", p, "landmarks").astype(np.int64)
        if p and (landmarks.max() >= n or np.unique(landmarks).size != p):
            raise FormatError("landmark indices must be distinct and in range", offset=landmark_offset)
        if reader.offset != len(reader.data):
            raise FormatError(f"{len(reader.data) - reader.offset} trailing bytes", offset=reader.offset)

        try:
            return ShapeModel(
                mean=mean,
                basis=basis,
                sigma=sigma,
                topology=MeshTopology(triangles=triangles) if t else None,
                landmark_indices=landmarks,
            )
        except ValidationError as e:
            raise FormatError(f"invalid model: {e.errors()[0]['msg']}", offset=triangle_offset)

    def save(self, model: ShapeModel):
        triangles = model.topology.triangles if model.topology is not None else np.zeros((0, 3), dtype=np.int64)
        parts = [
            MAGIC,
            np.array([model.num_vertices, model.num_modes, model.landmark_indices.size], dtype="<u4").tobytes(),
            model.mean.astype("<f8").tobytes(),
            np.asarray(model.basis, dtype="<f8").T.tobytes(),
            model.sigma.astype("<f8").tobytes(),
            np.array([triangles.shape[0]], dtype="<u4").tobytes(),
            triangles.astype("<u4").tobytes(),
            model.landmark_indices.astype("<u4").tobytes(),
        ]
        self.write_bytes(b"".join(parts))
