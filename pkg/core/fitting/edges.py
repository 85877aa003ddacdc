'''
Sobel gradient + non-maximum suppression + hysteresis edge detection.
'''
from typing import Optional

import numpy as np
import scipy.ndimage as ndimage

from core.models.observations import EdgeMap
from utils.errors import InvalidArgumentError

DEFAULT_LOW_FRACTION = 0.1
DEFAULT_HIGH_FRACTION = 0.2

# (row, col) offsets of the two neighbours across the edge for each gradient direction bin
_ACROSS = {
    0: ((0, -1), (0, 1)),
    1: ((-1, -1), (1, 1)),
    2: ((-1, 0), (1, 0)),
    3: ((-1, 1), (1, -1)),
}

def _shifted(a: np.ndarray, dr: int, dc: int) -> np.ndarray:
    '''out[i, j] = a[i + dr, j + dc], zero outside the image.'''
    padded = np.pad(a, 1)
    h, w = a.shape
    return padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]

def gradient_magnitude(image: np.ndarray):
    gx = ndimage.sobel(image, axis=1)
    gy = ndimage.sobel(image, axis=0)
    return np.hypot(gx, gy), np.arctan2(gy, gx)

def thin_edges(magnitude: np.ndarray, angle: np.ndarray) -> np.ndarray:
    '''
    Keep pixels that are maximal across the edge. Ties go to the pixel further
    along the gradient so a plateau two pixels wide yields one pixel.
    '''
    direction = np.rint(np.mod(angle, np.pi) / (np.pi / 4)).astype(int) % 4
    keep = np.zeros(magnitude.shape, dtype=bool)
    for d, (before, after) in _ACROSS.items():
        local = (magnitude >= _shifted(magnitude, *before)) & (magnitude > _shifted(magnitude, *after))
        keep |= (direction == d) & local
    return keep & (magnitude > 0)

def detect_edges(image: np.ndarray, low: Optional[float] = None, high: Optional[float] = None) -> EdgeMap:
    '''
    Edge pixels of a grayscale raster.

    Thresholds apply to the Sobel gradient magnitude; they default to 0.1 and
    0.2 of the largest magnitude in the image.
    '''
    image = np.asarray(image, dtype=float)
    if image.ndim != 2 or image.size == 0:
        raise InvalidArgumentError("edge detection needs a non-empty 2D grayscale image")
    height, width = image.shape
    magnitude, angle = gradient_magnitude(image)
    peak = float(magnitude.max())
    low = DEFAULT_LOW_FRACTION * peak if low is None else float(low)
    high = DEFAULT_HIGH_FRACTION * peak if high is None else float(high)
    if peak == 0:
        return EdgeMap.empty(width, height)
    if not (high >= low > 0):
        raise InvalidArgumentError(f"thresholds must satisfy high >= low > 0, got low={low} high={high}")

    thinned = np.where(thin_edges(magnitude, angle), magnitude, 0.0)
    strong = thinned >= high
    weak = thinned >= low
    if not strong.any():
        return EdgeMap.empty(width, height)
    edges = ndimage.binary_dilation(strong, structure=np.ones((3, 3)), iterations=-1, mask=weak)
    return EdgeMap.from_mask(edges)
