from typing import Any, Optional, Tuple

import numpy as np
from pydantic import BaseModel

def frozen_array(value: Any, dtype=float, shape: Optional[Tuple[Optional[int], ...]] = None, name: str = "array") -> np.ndarray:
    '''Coerce to a read-only ndarray, optionally checking the shape (None = any size).'''
    arr = np.array(value, dtype=dtype, copy=True)
    if shape is not None:
        if arr.ndim != len(shape) or any(s is not None and s != a for s, a in zip(shape, arr.shape)):
            raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr

class ArrayModel(BaseModel):
    '''Immutable model whose fields may hold numpy arrays.'''

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False
        smart_union = True
        json_encoders = {
            np.ndarray: lambda a: a.tolist()
        }
