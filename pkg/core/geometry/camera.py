'''
Rotation parameterisation and the two camera models.

Rotations are axis-angle vectors r (angle = |r| about r/|r|), never wrapped.
Image coordinates are pixels; model coordinates are metres.
'''
from typing import Optional, Sequence, Tuple

import numpy as np

from core.models.camera import OrthoPose, PerspCamera
from utils.errors import BehindCameraError

# Selects the first two rows of a rotated point
P_ORTHO = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

# dK/df
DK_DF = np.diag([1.0, 1.0, 0.0])

# Below this norm the exact limit [e_i]x is used for dR/dr_i
ZERO_ROTATION_EPS = 1e-9

def skew(a: Sequence[float]) -> np.ndarray:
    '''Cross-product matrix: skew(a) @ b == cross(a, b).'''
    x, y, z = np.asarray(a, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])

def rodrigues(r: Sequence[float]) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    theta = np.linalg.norm(r)
    if theta == 0.0:
        return np.eye(3)
    axis = r / theta
    return (np.cos(theta) * np.eye(3)
            + np.sin(theta) * skew(axis)
            + (1.0 - np.cos(theta)) * np.outer(axis, axis))

def rodrigues_derivative(r: Sequence[float], i: int) -> np.ndarray:
    '''dR/dr_i for axis index i in {0, 1, 2}.'''
    if i not in (0, 1, 2):
        raise ValueError(f"axis index must be 0, 1 or 2, got {i}")
    r = np.asarray(r, dtype=float)
    e_i = np.zeros(3)
    e_i[i] = 1.0
    theta_sq = float(r @ r)
    if np.sqrt(theta_sq) < ZERO_ROTATION_EPS:
        return skew(e_i)
    R = rodrigues(r)
    v = np.cross(r, (np.eye(3) - R) @ e_i)
    return (r[i] * skew(r) + skew(v)) / theta_sq @ R

def rodrigues_derivatives(r: Sequence[float]) -> np.ndarray:
    '''All three derivatives stacked, shape (3, 3, 3).'''
    return np.stack([rodrigues_derivative(r, i) for i in range(3)])

def intrinsics(f: float, principal_point: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    cx, cy = principal_point
    return np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])

def sop_project_points(points: np.ndarray, r: Sequence[float], t2d: Sequence[float], s: float) -> np.ndarray:
    '''Scaled orthographic projection of (N, 3) points: s * (P R v + t2d).'''
    R = rodrigues(r)
    return s * ((np.asarray(points, dtype=float).reshape(-1, 3) @ R.T)[:, :2] + np.asarray(t2d, dtype=float))

def sop_project(v: Sequence[float], pose: OrthoPose) -> np.ndarray:
    return sop_project_points(np.asarray(v, dtype=float).reshape(1, 3), pose.r, pose.t2d, pose.s)[0]

def camera_points(points: np.ndarray, r: Sequence[float], t3d: Sequence[float]) -> np.ndarray:
    '''Points in camera coordinates, R v + t.'''
    return np.asarray(points, dtype=float).reshape(-1, 3) @ rodrigues(r).T + np.asarray(t3d, dtype=float)

def pinhole_project_points(points: np.ndarray, r: Sequence[float], t3d: Sequence[float], f: float,
                           principal_point: Tuple[float, float] = (0.0, 0.0),
                           vertex_ids: Optional[Sequence[int]] = None) -> np.ndarray:
    X = camera_points(points, r, t3d)
    depth = X[:, 2]
    bad = np.nonzero(depth <= 0)[0]
    if bad.size:
        k = int(bad[0])
        vertex = int(vertex_ids[k]) if vertex_ids is not None else k
        raise BehindCameraError(vertex, float(depth[k]))
    return f * X[:, :2] / depth[:, None] + np.asarray(principal_point, dtype=float)

def pinhole_project(v: Sequence[float], cam: PerspCamera) -> np.ndarray:
    return pinhole_project_points(np.asarray(v, dtype=float).reshape(1, 3), cam.r, cam.t3d, cam.f,
                                  cam.principal_point)[0]

def dlt_rows(x: Sequence[float], cam: PerspCamera, v: Sequence[float]) -> np.ndarray:
    '''Collinearity residual [x; 1]x K [R t] [v; 1]; zero iff v projects onto x.'''
    x_h = np.array([x[0], x[1], 1.0])
    X = camera_points(np.asarray(v, dtype=float).reshape(1, 3), cam.r, cam.t3d)[0]
    return skew(x_h) @ cam.intrinsics() @ X
