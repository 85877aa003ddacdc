"""
Edge masks (PBM/PGM, binary P4/P5 or ASCII P1/P2; nonzero = edge) and
`x,y` CSV edge lists. CSV files start with a `# width,height` line unless the
dimensions are supplied by the caller.
"""
import csv
import io
import re
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from core.models.observations import EdgeMap
from core.storage.repositories.base_repository import BaseRepository
from utils.errors import FormatError

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")

def _header(data: bytes, count: int) -> Tuple[List[bytes], int]:
    """First `count` whitespace-separated tokens (comments skipped) and the offset after them."""
    tokens, offset = [], 0
    for _ in range(count):
        match = _TOKEN.match(data, offset)
        if match is None:
            raise FormatError("truncated PNM header", offset=offset)
        tokens.append(match.group(1))
        offset = match.end()
    return tokens, offset

def _positive(token: bytes, offset: int, what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise FormatError(f"bad {what} {token!r}", offset=offset)
    if value <= 0:
        raise FormatError(f"{what} must be positive", offset=offset)
    return value

def parse_pnm(data: bytes) -> np.ndarray:
    """Raster of a P1/P2/P4/P5 file as a float array (height, width)."""
    magic = data[:2]
    if magic not in (b"P1", b"P2", b"P4", b"P5"):
        raise FormatError(f"unsupported PNM magic {magic!r}", offset=0)
    bitmap = magic in (b"P1", b"P4")
    tokens, offset = _header(data, 3 if bitmap else 4)
    width = _positive(tokens[1], 2, "width")
    height = _positive(tokens[2], 2, "height")
    maxval = 1 if bitmap else _positive(tokens[3], 2, "maxval")

    if magic in (b"P1", b"P2"):
        body = data[offset:]
        if bitmap:
            digits = re.sub(rb"#[^\n]*", b"", body)
            values = np.array([c - ord("0") for c in digits if c in b"01"], dtype=float)
        else:
            values = np.array(re.sub(rb"#[^\n]*", b"", body).split(), dtype=float)
        if values.size < width * height:
            raise FormatError(f"expected {width * height} samples, found {values.size}", offset=offset)
        return values[:width * height].reshape(height, width)

    offset += 1  # single whitespace byte after the header
    if magic == b"P4":
        row_bytes = (width + 7) // 8
        need = row_bytes * height
        if len(data) - offset < need:
            raise FormatError(f"truncated bitmap: need {need} bytes", offset=offset)
        packed = np.frombuffer(data, dtype=np.uint8, count=need, offset=offset).reshape(height, row_bytes)
        return np.unpackbits(packed, axis=1)[:, :width].astype(float)
    dtype = ">u2" if maxval > 255 else "u1"
    need = np.dtype(dtype).itemsize * width * height
    if len(data) - offset < need:
        raise FormatError(f"truncated graymap: need {need} bytes", offset=offset)
    return np.frombuffer(data, dtype=dtype, count=width * height, offset=offset).reshape(height, width).astype(float)

class EdgeRepository(BaseRepository):
    def load(self, width: Optional[int] = None, height: Optional[int] = None) -> EdgeMap:
        data = self.read_bytes()
        if data[:1] == b"P" and data[1:2] in (b"1", b"2", b"4", b"5"):
            return EdgeMap.from_mask(parse_pnm(data) != 0)
        return self._load_csv(width, height)

    def load_image(self) -> np.ndarray:
        """Grayscale raster (height, width) from a PGM/PBM file."""
        return parse_pnm(self.read_bytes())

    def _load_csv(self, width: Optional[int], height: Optional[int]) -> EdgeMap:
        rows = list(csv.reader(io.StringIO(self.read_text())))
        line = 0
        if rows and rows[0] and rows[0][0].lstrip().startswith("#"):
            try:
                width, height = int(rows[0][0].lstrip("# ")), int(rows[0][1])
            except (ValueError, IndexError):
                raise FormatError("expected '# width,height' dimension line", row=1)
            line = 1
        if width is None or height is None:
            raise FormatError("edge list needs image dimensions ('# width,height' line)", row=1)
        if line < len(rows) and [c.strip() for c in rows[line]] == ["x", "y"]:
            line += 1

        pixels = []
        for number, row in enumerate(rows[line:], start=line + 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                x, y = int(row[0]), int(row[1])
            except (ValueError, IndexError):
                raise FormatError(f"malformed edge row {row!r}", row=number)
            if not (0 <= x < width and 0 <= y < height):
                raise FormatError(f"edge pixel ({x}, {y}) outside {width}x{height} image", row=number)
            pixels.append((x, y))
        try:
            return EdgeMap(pixels=np.array(pixels, dtype=np.int64).reshape(-1, 2), width=width, height=height)
        except ValidationError as e:
            raise FormatError(f"invalid edge map: {e.errors()[0]['msg']}")

    def save(self, edges: EdgeMap):
        suffix = self.path.suffix.lower()
        if suffix == ".csv":
            lines = [f"# {edges.width},{edges.height}", "x,y"]
            lines += [f"{int(x)},{int(y)}" for x, y in edges.pixels]
            self.write_text("\n".join(lines) + "\n")
        elif suffix == ".pbm":
            header = f"P4\n{edges.width} {edges.height}\n".encode("ascii")
            self.write_bytes(header + np.packbits(edges.to_mask(), axis=1).tobytes())
        else:
            header = f"P5\n{edges.width} {edges.height}\n255\n".encode("ascii")
            self.write_bytes(header + (edges.to_mask().astype(np.uint8) * 255).tobytes())
