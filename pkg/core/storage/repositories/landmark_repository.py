import csv
import io

import numpy as np
from pydantic import ValidationError

from core.models.observations import Landmarks2D
from core.storage.repositories.base_repository import BaseRepository
from utils.errors import FormatError

HEADER = ["vertex_index", "x", "y"]

def format_float(value: float) -> str:
    return format(float(value), ".17g")

class LandmarkRepository(BaseRepository):
    """`vertex_index,x,y` CSV, one landmark per row."""

    def load(self) -> Landmarks2D:
        rows = list(csv.reader(io.StringIO(self.read_text())))
        if not rows or [c.strip() for c in rows[0]] != HEADER:
            raise FormatError(f"expected header {','.join(HEADER)}", row=1)
        indices, points = [], []
        for line, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise FormatError(f"expected 3 fields, got {len(row)}", row=line)
            try:
                index = int(row[0])
                x, y = float(row[1]), float(row[2])
            except ValueError:
                raise FormatError(f"malformed landmark row {row!r}", row=line)
            if index < 0 or not (np.isfinite(x) and np.isfinite(y)):
                raise FormatError("negative vertex index or non-finite coordinate", row=line)
            if index in indices:
                raise FormatError(f"duplicate vertex index {index}", row=line)
            indices.append(index)
            points.append((x, y))
        if not indices:
            raise FormatError("no landmarks in file", row=len(rows))
        try:
            return Landmarks2D(vertex_indices=indices, points=np.array(points))
        except ValidationError as e:
            raise FormatError(f"invalid landmarks: {e.errors()[0]['msg']}")

    def save(self, landmarks: Landmarks2D):
        lines = [",".join(HEADER)]
        for index, (x, y) in zip(landmarks.vertex_indices, landmarks.points):
            lines.append(f"{int(index)},{format_float(x)},{format_float(y)}")
        self.write_text("\n".join(lines) + "\n")
