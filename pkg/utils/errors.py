from typing import Any, Optional

import numpy as np

EXIT_OK = 0
EXIT_INVALID_ARGUMENT = 2
EXIT_NUMERIC_FAILURE = 3

class GeofitError(Exception):
    '''Base error; exit_code is what the CLI returns when it escapes a command.'''
    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

class InvalidArgumentError(GeofitError, ValueError):
    exit_code = EXIT_INVALID_ARGUMENT

class UnderDeterminedError(InvalidArgumentError):
    pass

class DegenerateConfigurationError(InvalidArgumentError):
    pass

class FormatError(GeofitError):
    exit_code = EXIT_INVALID_ARGUMENT

    def __init__(self, detail: str, offset: Optional[int] = None, row: Optional[int] = None):
        if offset is not None:
            detail = f"{detail} (at byte offset {offset})"
        if row is not None:
            detail = f"{detail} (at row {row})"
        super().__init__(detail)
        self.offset = offset
        self.row = row

class NumericError(GeofitError):
    exit_code = EXIT_NUMERIC_FAILURE

    def __init__(self, detail: str, snapshot: Any = None):
        super().__init__(detail)
        self.snapshot = None if snapshot is None else np.array(snapshot, dtype=float, copy=True)

class BehindCameraError(NumericError):
    def __init__(self, vertex: int, depth: float):
        super().__init__(f"Vertex {vertex} is behind the camera (depth {depth:.6g})")
        self.vertex = vertex
        self.depth = depth

class FitError(NumericError):
    pass
