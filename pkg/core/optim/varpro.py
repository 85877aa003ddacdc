'''
Variable projection helpers shared by the orthographic and DLT fitters.

Both reduced problems have the form d(x) = M(x) M(x)^+ v(x) - v(x), where the
linear parameters have been eliminated through the pseudoinverse. Tikhonov
regularisation is handled by stacking sqrt(weight) * diag(1/sigma) rows under
the shape columns of M (and zeros under v).
'''
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sl

from config import settings

class LinearSolution(NamedTuple):
    alpha: np.ndarray
    translation: np.ndarray
    rank_deficient: bool

def pseudoinverse(M: np.ndarray, rcond: Optional[float] = None) -> Tuple[np.ndarray, int]:
    '''Rank-revealing pseudoinverse; singular values below rcond * sigma_max are dropped.'''
    rcond = settings.PINV_RCOND if rcond is None else rcond
    U, sv, Vt = sl.svd(M, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.zeros((M.shape[1], M.shape[0])), 0
    keep = sv > rcond * sv[0]
    inv = np.zeros_like(sv)
    inv[keep] = 1.0 / sv[keep]
    return (Vt.T * inv) @ U.T, int(np.count_nonzero(keep))

def regularize(M: np.ndarray, v: np.ndarray, n_shape: int, weight: float,
               sigma: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    '''Append prior rows sqrt(weight) * [diag(1/sigma) 0] to M and zeros to v.'''
    if weight <= 0:
        return M, v
    inv_sigma = np.ones(n_shape) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    prior = np.zeros((n_shape, M.shape[1]))
    prior[:, :n_shape] = np.sqrt(weight) * np.diag(inv_sigma)
    return np.vstack([M, prior]), np.concatenate([v, np.zeros(n_shape)])

def solve_linear(A: np.ndarray, b: np.ndarray, sigma: Sequence[float], tikhonov_weight: float = 0.0,
                 rcond: Optional[float] = None) -> LinearSolution:
    '''
    Minimise |A p - b|^2 + weight * |alpha / sigma|^2 with p = [alpha; translation].

    The first len(sigma) columns of A multiply alpha; the remaining ones are
    unregularised translation columns. Rank deficiency is resolved by the
    minimum-norm convention and reported.
    '''
    sigma = np.asarray(sigma, dtype=float)
    n_shape = sigma.size
    M, v = regularize(A, np.asarray(b, dtype=float), n_shape, tikhonov_weight, sigma)
    M_pinv, rank = pseudoinverse(M, rcond)
    p = M_pinv @ v
    return LinearSolution(alpha=p[:n_shape], translation=p[n_shape:], rank_deficient=rank < M.shape[1])

def projected_residual(M: np.ndarray, v: np.ndarray, M_pinv: np.ndarray) -> np.ndarray:
    return M @ (M_pinv @ v) - v

def projected_jacobian(M: np.ndarray, dM: List[np.ndarray], v: np.ndarray, dv: List[np.ndarray],
                       M_pinv: np.ndarray) -> np.ndarray:
    '''
    Columns d/dx_k of M M^+ v - v.

    Uses the pseudoinverse derivative
        dM^+ = -M^+ dM M^+ + M^+ M^+T dM^T (I - M M^+) + (I - M^+ M) dM^T M^+T M^+
    contracted with v, which collapses to (I - M M^+)(dM q - dv) - M^+T dM^T d
    with q = M^+ v and d the residual.
    '''
    q = M_pinv @ v
    d = M @ q - v
    columns = []
    for dMk, dvk in zip(dM, dv):
        w = dMk @ q - dvk
        w = w - M @ (M_pinv @ w)
        columns.append(w - M_pinv.T @ (dMk.T @ d))
    return np.column_stack(columns)
