'''
Remaining flexibility of a fitted shape.

A flexibility mode f maximises the 3D change |Q f|^2 for a fixed 2D change
|Pi f|^2, where Pi maps shape coefficients to (linearised) landmark motion.
The modes are the generalised eigenvectors of (Q^T Q, Pi^T Pi).
'''
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sl
from scipy.stats import chi

from core.analysis.metrics import mean_displacement
from core.fitting.landmarks import project_points
from core.geometry.camera import P_ORTHO, rodrigues, skew
from core.geometry.shape import landmark_submatrix, synthesize_vertices
from core.models.camera import OrthoPose, PerspCamera
from core.models.flexibility import FlexibilitySpectrum
from core.models.observations import Landmarks2D
from core.models.shape_model import ShapeModel
from utils.errors import InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

RIDGE = 1e-10
DEFAULT_K1 = 0.002  # metres

def _indices(landmarks: Union[Landmarks2D, Sequence[int]]) -> np.ndarray:
    if isinstance(landmarks, Landmarks2D):
        return landmarks.vertex_indices
    return np.asarray(landmarks, dtype=np.int64).ravel()

def projection_matrix_ortho(model: ShapeModel, landmarks: Union[Landmarks2D, Sequence[int]], r) -> np.ndarray:
    '''(I kron P R) Q_L: landmark image motion per unit coefficient, without scale or translation.'''
    Q, _ = landmark_submatrix(model, _indices(landmarks))
    L = Q.shape[0] // 3
    PR = P_ORTHO @ rodrigues(r)
    return np.einsum("ij,ljs->lis", PR, Q.reshape(L, 3, -1)).reshape(2 * L, -1)

def projection_matrix_persp(model: ShapeModel, landmarks: Landmarks2D, camera: PerspCamera) -> np.ndarray:
    '''D (I kron K [R t] S) Q_L, S = [I_3; 0] dropping the translation column.'''
    Q, _ = landmark_submatrix(model, landmarks.vertex_indices)
    L = landmarks.count
    selector = np.vstack([np.eye(3), np.zeros((1, 3))])
    KRS = camera.intrinsics() @ np.hstack([rodrigues(camera.r), camera.t3d[:, None]]) @ selector
    blocks = np.einsum("ij,ljs->lis", KRS, Q.reshape(L, 3, -1))
    D = np.stack([skew([x, y, 1.0]) for x, y in landmarks.points])
    return np.einsum("lij,ljs->lis", D, blocks).reshape(3 * L, -1)

def _sign_convention(modes: np.ndarray) -> np.ndarray:
    '''Flip each column so its first entry of significant magnitude is positive.'''
    out = modes.copy()
    for i in range(out.shape[1]):
        col = out[:, i]
        significant = np.nonzero(np.abs(col) > 1e-12 * max(np.max(np.abs(col)), 1e-300))[0]
        if significant.size and col[significant[0]] < 0:
            out[:, i] = -col
    return out

def _cholesky_eigh(A: np.ndarray, B: np.ndarray):
    '''
    Solve A f = lambda B f through the Cholesky factor of B; B receives a small
    ridge when it is singular.
    '''
    S = B.shape[0]
    eig_B = np.linalg.eigvalsh(B)
    if eig_B[0] <= RIDGE * max(eig_B[-1], 1e-300):
        ridge = RIDGE * np.trace(B) / S if np.trace(B) > 0 else RIDGE
        logger.debug(f"Projected metric is singular; adding ridge {ridge:.3e}")
        B = B + ridge * np.eye(S)
    L = sl.cholesky(B, lower=True)
    A_new = sl.solve_triangular(L, sl.solve_triangular(L, A, lower=True).T, lower=True).T
    eigvals, eigvecs = sl.eigh((A_new + A_new.T) / 2)
    modes = sl.solve_triangular(L.T, eigvecs, lower=False)
    order = np.argsort(eigvals)[::-1]
    return eigvals[order], modes[:, order]

def flexibility_modes(model: ShapeModel, projection: np.ndarray, k1: float = DEFAULT_K1) -> FlexibilitySpectrum:
    projection = np.asarray(projection, dtype=float)
    if projection.ndim != 2 or projection.shape[0] < 1 or projection.shape[1] != model.num_modes:
        raise InvalidArgumentError(f"projection must be (rows >= 1) x {model.num_modes}, got {projection.shape}")
    if not k1 > 0:
        raise InvalidArgumentError("k1 must be positive")
    QtQ = model.basis.T @ model.basis
    eigvals, modes = _cholesky_eigh(QtQ, projection.T @ projection)

    zero = model.mean
    for i in range(modes.shape[1]):
        change = mean_displacement(zero, zero + model.basis @ modes[:, i])
        modes[:, i] *= k1 / change
    return FlexibilitySpectrum(modes=_sign_convention(modes), eigenvalues=eigvals, k1=k1)

def landmark_shifts(spectrum: FlexibilitySpectrum, model: ShapeModel, landmarks: Union[Landmarks2D, Sequence[int]],
                    camera: Union[OrthoPose, PerspCamera], k1: Optional[float] = None,
                    alpha: Optional[np.ndarray] = None) -> np.ndarray:
    '''Mean projected landmark displacement (pixels) of each mode at k1 mean surface change.'''
    k1 = spectrum.k1 if k1 is None else k1
    alpha = np.zeros(model.num_modes) if alpha is None else np.asarray(alpha, dtype=float)
    idx = _indices(landmarks)
    base = project_points(synthesize_vertices(model, alpha)[idx], camera, idx)
    shifts = []
    for i in range(spectrum.num_modes):
        moved = apply_mode(model, alpha, spectrum.mode(i), k1 / spectrum.k1)
        shifts.append(mean_displacement(base, project_points(moved[idx], camera, idx), dim=2))
    return np.array(shifts)

def truncate_modes(spectrum: FlexibilitySpectrum, model: ShapeModel, landmarks: Union[Landmarks2D, Sequence[int]],
                   camera: Union[OrthoPose, PerspCamera], k1: float, k2: float,
                   alpha: Optional[np.ndarray] = None) -> List[int]:
    '''Indices of modes that change the surface by k1 while moving landmarks by less than k2 pixels.'''
    if not (k1 > 0 and k2 > 0):
        raise InvalidArgumentError("k1 and k2 must be positive")
    shifts = landmark_shifts(spectrum, model, landmarks, camera, k1, alpha)
    return [i for i, shift in enumerate(shifts) if shift < k2]

def plausibility_filter(modes: Union[FlexibilitySpectrum, np.ndarray], alpha, sigma, n_sigmas: float = 3.0,
                        indices: Optional[Sequence[int]] = None, weight: float = 1.0) -> List[int]:
    '''
    Keep modes whose displaced coefficients stay within n_sigmas standard
    deviations of the expected Mahalanobis length (chi distribution, S dof).
    '''
    columns = modes.modes if isinstance(modes, FlexibilitySpectrum) else np.asarray(modes, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if columns.shape[0] != alpha.size or sigma.size != alpha.size:
        raise InvalidArgumentError("modes, alpha and sigma dimensions differ")
    dist = chi(alpha.size)
    limit = dist.mean() + n_sigmas * dist.std()
    candidates = range(columns.shape[1]) if indices is None else indices
    return [i for i in candidates if np.linalg.norm((alpha + weight * columns[:, i]) / sigma) <= limit]

def apply_mode(model: ShapeModel, alpha, mode, w: float) -> np.ndarray:
    '''Vertex positions (N, 3) of alpha + w * mode.'''
    alpha = np.asarray(alpha, dtype=float).ravel()
    mode = np.asarray(mode, dtype=float).ravel()
    if mode.size != alpha.size:
        raise InvalidArgumentError(f"mode has {mode.size} entries, alpha has {alpha.size}")
    return synthesize_vertices(model, alpha + w * mode)
