'''
Evaluation metrics: surface distance after similarity alignment and landmark
reprojection error as a percentage of the interocular distance.
'''
from typing import NamedTuple, Optional, Tuple

import numpy as np

from core.models.observations import Landmarks2D
from utils.errors import DegenerateConfigurationError, InvalidArgumentError

class SimilarityTransform(NamedTuple):
    rotation: np.ndarray  # (3, 3), det +1
    translation: np.ndarray  # (3,)
    scale: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(points, dtype=float) @ self.rotation.T + self.translation

def procrustes_align(source: np.ndarray, target: np.ndarray,
                     with_scale: bool = True) -> Tuple[np.ndarray, SimilarityTransform]:
    '''
    Kabsch-Umeyama alignment of source onto target: c * R @ b_i + t ~ a_i.

    Reflections are never returned. With with_scale=False the transform is rigid.
    '''
    src = np.asarray(source, dtype=float).reshape(-1, 3)
    dst = np.asarray(target, dtype=float).reshape(-1, 3)
    if src.shape != dst.shape:
        raise InvalidArgumentError(f"vertex counts differ: {src.shape[0]} vs {dst.shape[0]}")
    n = src.shape[0]
    if n < 3:
        raise DegenerateConfigurationError("Procrustes alignment needs at least 3 points")

    mean_src, mean_dst = src.mean(axis=0), dst.mean(axis=0)
    src_c, dst_c = src - mean_src, dst - mean_dst
    var_src = np.mean(np.sum(src_c ** 2, axis=1))
    sv_src = np.linalg.svd(src_c, compute_uv=False)
    if var_src == 0 or sv_src[1] <= 1e-12 * sv_src[0]:
        raise DegenerateConfigurationError("source points are collinear or coincident")

    H = dst_c.T @ src_c / n
    U, D, VT = np.linalg.svd(H)
    d = np.sign(np.linalg.det(U) * np.linalg.det(VT))
    S = np.diag([1.0, 1.0, d if d != 0 else 1.0])
    R = U @ S @ VT
    c = float(np.trace(np.diag(D) @ S) / var_src) if with_scale else 1.0
    t = mean_dst - c * R @ mean_src
    transform = SimilarityTransform(rotation=R, translation=t, scale=c)
    return transform.apply(src), transform

def surface_distance(recon: np.ndarray, truth: np.ndarray, with_scale: bool = True) -> float:
    '''Mean per-vertex Euclidean distance (metres) after aligning recon to truth.'''
    recon = np.asarray(recon, dtype=float).reshape(-1, 3)
    truth = np.asarray(truth, dtype=float).reshape(-1, 3)
    if recon.shape != truth.shape:
        raise InvalidArgumentError(f"vertex counts differ: {recon.shape[0]} vs {truth.shape[0]}")
    aligned, _ = procrustes_align(recon, truth, with_scale=with_scale)
    return float(np.mean(np.linalg.norm(aligned - truth, axis=1)))

def interocular_distance(landmarks: Landmarks2D, eyes: Tuple[int, int],
                         fallback: Optional[np.ndarray] = None) -> float:
    '''
    Pixel distance between the two eye vertices.

    Observed positions are used when both eyes are among the landmarks,
    otherwise the (2, 2) fallback positions (typically the fitted projection).
    '''
    position = {int(v): k for k, v in enumerate(landmarks.vertex_indices)}
    if eyes[0] in position and eyes[1] in position:
        a, b = landmarks.points[position[eyes[0]]], landmarks.points[position[eyes[1]]]
    elif fallback is not None:
        a, b = np.asarray(fallback, dtype=float).reshape(2, 2)
    else:
        raise DegenerateConfigurationError("eye landmarks are not observed and no fallback was given")
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))

def landmark_distance(observed: Landmarks2D, projected: np.ndarray, interocular: float) -> float:
    '''Mean landmark pixel error as a percentage of the interocular distance.'''
    projected = np.asarray(projected, dtype=float).reshape(-1, 2)
    if projected.shape[0] != observed.count:
        raise InvalidArgumentError(f"{projected.shape[0]} projected points for {observed.count} landmarks")
    if not interocular > 0:
        raise DegenerateConfigurationError("interocular distance is zero")
    return float(np.mean(np.linalg.norm(projected - observed.points, axis=1)) / interocular * 100.0)

def mean_displacement(before: np.ndarray, after: np.ndarray, dim: int = 3) -> float:
    '''Mean Euclidean displacement between corresponding points of dimension dim.'''
    before = np.asarray(before, dtype=float).reshape(-1, dim)
    after = np.asarray(after, dtype=float).reshape(-1, dim)
    if before.shape != after.shape:
        raise InvalidArgumentError(f"{before.shape[0]} points before but {after.shape[0]} after")
    return float(np.mean(np.linalg.norm(after - before, axis=1)))
