from typing import Iterable, Optional

import numpy as np

from core.geometry.shape import synthesize_vertices
from core.models.shape_model import MeshTopology, ShapeModel
from core.storage.repositories.base_repository import BaseRepository
from core.storage.repositories.landmark_repository import format_float
from utils.errors import FormatError

class MeshRepository(BaseRepository):
    """ASCII OBJ with `v` and `f` records only; faces are 1-based."""

    def save(self, vertices: np.ndarray, topology: Optional[MeshTopology]):
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        lines = [f"v {format_float(u)} {format_float(v)} {format_float(w)}" for u, v, w in vertices]
        if topology is not None:
            lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in topology.triangles.tolist()]
        self.write_text("\n".join(lines) + "\n")

    def load(self):
        """(vertices (N, 3), MeshTopology or None) of an OBJ written by save()."""
        vertices, faces = [], []
        for number, line in enumerate(self.read_text().splitlines(), start=1):
            fields = line.split()
            if not fields or fields[0].startswith("#"):
                continue
            try:
                if fields[0] == "v":
                    vertices.append([float(c) for c in fields[1:4]])
                elif fields[0] == "f":
                    faces.append([int(c.split("/")[0]) - 1 for c in fields[1:4]])
            except ValueError:
                raise FormatError(f"malformed OBJ record {line!r}", row=number)
        return np.array(vertices).reshape(-1, 3), (MeshTopology(triangles=faces) if faces else None)

    def save_boundary(self, vertex_indices: Iterable[int]):
        """Sidecar file: one boundary vertex index per line."""
        self.write_text("".join(f"{int(i)}\n" for i in vertex_indices))

def export_obj(model: ShapeModel, alpha, path) -> MeshRepository:
    repository = MeshRepository(path)
    repository.save(synthesize_vertices(model, alpha), model.topology)
    return repository
