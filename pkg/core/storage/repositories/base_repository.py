import os
import tempfile
from pathlib import Path
from typing import Union

from utils.errors import FormatError
from utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

class BaseRepository:
    """
    One file on disk. Writes go through a temporary file in the same directory
    and an atomic rename, so a failed write never leaves a truncated file.
    """

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.written = False

    def exists(self) -> bool:
        return self.path.is_file()

    def read_bytes(self) -> bytes:
        try:
            return self.path.read_bytes()
        except FileNotFoundError:
            raise FormatError(f"file not found: {self.path}")
        except IsADirectoryError:
            raise FormatError(f"expected a file, got a directory: {self.path}")

    def read_text(self) -> str:
        data = self.read_bytes()
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"{self.path} is not UTF-8 text", offset=e.start)

    def write_bytes(self, data: bytes):
        directory = self.path.parent if str(self.path.parent) else Path(".")
        directory.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{self.path.name}.", dir=directory)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
        self.written = True
        logger.debug(f"Wrote {len(data)} bytes to {self.path}")

    def write_text(self, text: str):
        self.write_bytes(text.encode("utf-8"))

    def remove_partial(self) -> bool:
        """Delete the file if this repository wrote it; used when a command fails after writing."""
        if self.written and self.path.exists():
            self.path.unlink()
            self.written = False
            logger.info(f"Removed partial output {self.path}")
            return True
        return False
