import csv
import io
from typing import Any, Dict, List, Sequence

import numpy as np

from config import settings
from core.storage.repositories.base_repository import BaseRepository
from utils.errors import FormatError

def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), f".{settings.FLOAT_DIGITS}g")
    return str(value)

class TableRepository(BaseRepository):
    """CSV tables with a fixed header row."""

    def save(self, header: Sequence[str], rows: Sequence[Dict[str, Any]]):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            missing = [column for column in header if column not in row]
            if missing:
                raise ValueError(f"row lacks columns {missing}")
            writer.writerow([format_cell(row[column]) for column in header])
        self.write_text(buffer.getvalue())

    def load(self) -> List[Dict[str, str]]:
        rows = list(csv.DictReader(io.StringIO(self.read_text())))
        if rows and None in rows[0]:
            raise FormatError("row has more fields than the header", row=2)
        return rows

    def load_vector(self) -> np.ndarray:
        """A single column of numbers (header optional), e.g. a coefficient file."""
        values = []
        for number, row in enumerate(csv.reader(io.StringIO(self.read_text())), start=1):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            try:
                values.extend(float(c) for c in cells)
            except ValueError:
                if number == 1 and not values:
                    continue
                raise FormatError(f"non-numeric entry in {row!r}", row=number)
        if not values:
            raise FormatError("no numbers in file")
        return np.array(values)
