'''
Landmark fitting under scaled orthographic projection.

The residual for landmark i is x_i - s (P R (Q_i alpha + mean_i) + t2d).
Stacked, it is -(A p + y) with p = [alpha; t2d], A = s [(I kron P R) Q_L, 1 kron I_2]
and y = s (I kron P R) mean_L - x. The linear parameters are eliminated as
p* = -A^+ y, which leaves the reduced residual A A^+ y - y over (r, s) only.

Internally alpha is carried in sigma-normalised form (basis columns scaled by
sigma), so Tikhonov regularisation and coefficient bounds act on a unit cube.
'''
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from config import settings
from core.fitting.common import clamp_coefficients, fit_landmark_error, require_landmarks
from core.geometry.camera import P_ORTHO, rodrigues, rodrigues_derivatives, sop_project_points
from core.geometry.shape import landmark_submatrix, synthesize_vertices
from core.models.camera import OrthoPose
from core.models.fit import FLAG_CLAMPED, FLAG_FD_JACOBIAN, FLAG_RANK_DEFICIENT, FLAG_RESTARTS_USED, \
    FitResult, OrthoFitConfig
from core.models.observations import Landmarks2D
from core.models.shape_model import ShapeModel
from core.models.solver import SolveReport, TerminationReason
from core.optim.least_squares import LeastSquaresProblem, finite_difference_jacobian, solve
from core.optim.varpro import LinearSolution, projected_jacobian, projected_residual, pseudoinverse, regularize
from utils.logger import get_logger

logger = get_logger(__name__)

# Extra starting rotations tried when the frontal start ends above the restart threshold
RESTART_ROTATIONS = (
    (0.0, np.pi / 4, 0.0),
    (0.0, -np.pi / 4, 0.0),
    (np.pi / 4, 0.0, 0.0),
)

ALS_RELATIVE_TOL = 1e-10

class OrthoSystem:
    '''Per-fit cache of the landmark rows of the model.'''

    def __init__(self, model: ShapeModel, landmarks: Landmarks2D, tikhonov_weight: float = 0.0,
                 normalized: bool = True):
        Q, mean = landmark_submatrix(model, landmarks.vertex_indices)
        self.L = landmarks.count
        self.S = model.num_modes
        self.sigma = model.sigma
        columns = Q * model.sigma if normalized else Q
        self.Q = columns.reshape(self.L, 3, self.S)
        self.mean = mean.reshape(self.L, 3)
        self.x = landmarks.stacked()
        self.weight = tikhonov_weight
        # prior rows act on normalised coefficients, or on alpha / sigma for raw columns
        self.prior_sigma = None if normalized else model.sigma
        self.fd_fallback = False
        self.rank_deficient = False

    def _blocks(self, M: np.ndarray) -> np.ndarray:
        '''(I kron P M) Q_L as a 2L x S matrix.'''
        return np.einsum("ij,ljs->lis", (P_ORTHO @ M), self.Q).reshape(2 * self.L, self.S)

    def _translation(self) -> np.ndarray:
        return np.tile(np.eye(2), (self.L, 1))

    def matrix(self, r, s: float) -> np.ndarray:
        R = rodrigues(r)
        return s * np.hstack([self._blocks(R), self._translation()])

    def vector(self, r, s: float) -> np.ndarray:
        R = rodrigues(r)
        return s * (self.mean @ (P_ORTHO @ R).T).ravel() - self.x

    def derivatives(self, r, s: float) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        '''dA and dy with respect to (r_0, r_1, r_2, s).'''
        R = rodrigues(r)
        dA, dy = [], []
        zeros = np.zeros((2 * self.L, 2))
        for dR in rodrigues_derivatives(r):
            dA.append(np.hstack([s * self._blocks(dR), zeros]))
            dy.append(s * (self.mean @ (P_ORTHO @ dR).T).ravel())
        dA.append(np.hstack([self._blocks(R), self._translation()]))
        dy.append((self.mean @ (P_ORTHO @ R).T).ravel())
        return dA, dy

    def _augmented(self, A: np.ndarray, y: np.ndarray):
        return regularize(A, y, self.S, self.weight, self.prior_sigma)

    def linear(self, r, s: float) -> LinearSolution:
        M, v = self._augmented(self.matrix(r, s), self.vector(r, s))
        M_pinv, rank = pseudoinverse(M)
        p = -(M_pinv @ v)
        return LinearSolution(alpha=p[:self.S], translation=p[self.S:], rank_deficient=rank < M.shape[1])

    def residual(self, params: np.ndarray) -> np.ndarray:
        '''Reduced residual including prior rows; the first 2L entries are the data residual.'''
        r, s = params[:3], params[3]
        M, v = self._augmented(self.matrix(r, s), self.vector(r, s))
        M_pinv, _ = pseudoinverse(M)
        return projected_residual(M, v, M_pinv)

    def jacobian(self, params: np.ndarray) -> np.ndarray:
        r, s = params[:3], params[3]
        M, v = self._augmented(self.matrix(r, s), self.vector(r, s))
        M_pinv, rank = pseudoinverse(M)
        if rank < M.shape[1]:
            if not self.fd_fallback:
                logger.warning("Landmark system is rank deficient; using finite-difference Jacobian")
            self.fd_fallback = True
            self.rank_deficient = True
            return finite_difference_jacobian(self.residual, params)
        dA, dy = self.derivatives(r, s)
        pad = M.shape[0] - 2 * self.L
        dM = [np.vstack([d, np.zeros((pad, d.shape[1]))]) for d in dA]
        dv = [np.concatenate([d, np.zeros(pad)]) for d in dy]
        return projected_jacobian(M, dM, v, dv, M_pinv)

    def penalized_objective(self, r, s: float, alpha_n: np.ndarray, t2d: np.ndarray) -> float:
        d = -(self.matrix(r, s) @ np.concatenate([alpha_n, t2d]) + self.vector(r, s))
        prior = alpha_n if self.prior_sigma is None else alpha_n / self.prior_sigma
        return float(d @ d + self.weight * prior @ prior)

    def shape_points(self, alpha_n: np.ndarray) -> np.ndarray:
        return self.mean + self.Q @ alpha_n

def assemble_A(model: ShapeModel, landmarks: Landmarks2D, r, s: float) -> np.ndarray:
    '''2L x (S+2) matrix s [(I kron P R) Q_L, 1 kron I_2] on raw coefficients.'''
    return OrthoSystem(model, landmarks, normalized=False).matrix(r, s)

def assemble_y(model: ShapeModel, landmarks: Landmarks2D, r, s: float) -> np.ndarray:
    '''Projected landmark rows of the mean minus the observations.'''
    return OrthoSystem(model, landmarks, normalized=False).vector(r, s)

def reduced_residual(model: ShapeModel, landmarks: Landmarks2D, r, s: float,
                     config: Optional[OrthoFitConfig] = None) -> np.ndarray:
    '''A A^+ y - y: the landmark residual at the optimal (alpha, t2d) for fixed (r, s).'''
    weight = config.tikhonov_weight if config is not None else 0.0
    system = OrthoSystem(model, landmarks, weight)
    return system.residual(np.concatenate([np.asarray(r, dtype=float), [s]]))[:2 * landmarks.count]

def jacobian_ortho(model: ShapeModel, landmarks: Landmarks2D, r, s: float,
                   tikhonov_weight: float = 0.0) -> np.ndarray:
    '''2L x 4 Jacobian of reduced_residual with respect to (r_0, r_1, r_2, s).'''
    system = OrthoSystem(model, landmarks, tikhonov_weight)
    return system.jacobian(np.concatenate([np.asarray(r, dtype=float), [s]]))[:2 * landmarks.count]

def initial_scale(model: ShapeModel, landmarks: Landmarks2D, r) -> float:
    '''Observed landmark bounding-box diagonal over that of the projected mean.'''
    _, mean = landmark_submatrix(model, landmarks.vertex_indices)
    projected = sop_project_points(mean, r, np.zeros(2), 1.0)
    model_diag = np.linalg.norm(np.ptp(projected, axis=0))
    observed_diag = np.linalg.norm(np.ptp(landmarks.points, axis=0))
    if model_diag <= 0 or observed_diag <= 0:
        return 1.0
    return float(observed_diag / model_diag)

def sop_pose_from_points(points: np.ndarray, observed: np.ndarray) -> Tuple[np.ndarray, float, np.ndarray]:
    '''
    Scaled-orthographic Procrustes: best (r, s, t2d) mapping 3D points onto 2D observations.

    Solves the affine 2x3 camera by least squares and projects it onto the
    nearest scaled pair of orthonormal rows.
    '''
    V = np.asarray(points, dtype=float).reshape(-1, 3)
    X = np.asarray(observed, dtype=float).reshape(-1, 2)
    v_bar, x_bar = V.mean(axis=0), X.mean(axis=0)
    Vc, Xc = V - v_bar, X - x_bar
    affine_T, *_ = np.linalg.lstsq(Vc, Xc, rcond=None)
    U, sv, Wt = np.linalg.svd(affine_T.T, full_matrices=False)
    rows = U @ Wt
    R = np.vstack([rows, np.cross(rows[0], rows[1])])
    projected = Vc @ rows.T
    denom = float(np.sum(projected ** 2))
    s = float(np.sum(Xc * projected) / denom) if denom > 0 else 0.0
    if s <= 0:
        s = float(np.mean(sv)) if np.mean(sv) > 0 else 1.0
    t2d = x_bar / s - rows @ v_bar
    return Rotation.from_matrix(R).as_rotvec(), s, t2d

def _solve_from(system: OrthoSystem, r0, s0: float, config: OrthoFitConfig) -> SolveReport:
    problem = LeastSquaresProblem(
        residual=system.residual,
        jacobian=system.jacobian,
        x0=np.concatenate([np.asarray(r0, dtype=float), [s0]]),
        lower=np.array([-np.inf, -np.inf, -np.inf, 1e-6 * s0]),
    )
    return solve(problem, config.solver)

def _finish(model: ShapeModel, landmarks: Landmarks2D, system: OrthoSystem, config: OrthoFitConfig,
            report: SolveReport, flags: List[str], restarts_used: int = 0,
            linear: Optional[LinearSolution] = None) -> FitResult:
    r, s = report.x[:3], float(report.x[3])
    linear = linear or system.linear(r, s)
    if linear.rank_deficient and FLAG_RANK_DEFICIENT not in flags:
        logger.warning("Linear landmark solve is rank deficient; minimum-norm solution used")
        flags.append(FLAG_RANK_DEFICIENT)
    alpha_n, t2d = linear.alpha, linear.translation
    alpha_n, clamped = clamp_coefficients(alpha_n, config.bound_sigmas)
    if clamped:
        flags.append(FLAG_CLAMPED)
        A, y = system.matrix(r, s), system.vector(r, s)
        t_cols = A[:, system.S:]
        t2d = -np.linalg.lstsq(t_cols, y + A[:, :system.S] @ alpha_n, rcond=None)[0]

    alpha = alpha_n * model.sigma
    vertices = synthesize_vertices(model, alpha)
    projected = sop_project_points(vertices[landmarks.vertex_indices], r, t2d, s)
    residuals = landmarks.stacked() - projected.ravel()
    return FitResult(
        camera="ortho",
        alpha=alpha,
        alpha_normalized=alpha_n,
        pose=OrthoPose(r=r, t2d=t2d, s=s),
        residuals=residuals,
        objective=float(residuals @ residuals),
        report=report,
        landmarks=landmarks,
        flags=flags,
        restarts_used=restarts_used,
    )

def _start(model: ShapeModel, landmarks: Landmarks2D, config: OrthoFitConfig):
    r0 = np.asarray(config.init_rotation if config.init_rotation is not None else np.zeros(3), dtype=float)
    s0 = config.init_scale or initial_scale(model, landmarks, r0)
    return r0, s0

def _orthographic_error(model: ShapeModel, landmarks: Landmarks2D, result: FitResult) -> Optional[float]:
    pose = result.pose
    vertices = synthesize_vertices(model, result.alpha)
    return fit_landmark_error(model, landmarks, vertices,
                              lambda pts: sop_project_points(pts, pose.r, pose.t2d, pose.s))

def fit_landmarks_ortho(model: ShapeModel, landmarks: Landmarks2D,
                        config: Optional[OrthoFitConfig] = None) -> FitResult:
    config = config or OrthoFitConfig()
    require_landmarks(landmarks, 2, "orthographic fitting")
    r0, s0 = _start(model, landmarks, config)

    system = OrthoSystem(model, landmarks, config.tikhonov_weight)
    report = _solve_from(system, r0, s0, config)
    flags: List[str] = []
    result = _finish(model, landmarks, system, config, report, list(flags))
    restarts_used = 0

    d_l = _orthographic_error(model, landmarks, result)
    if config.restarts and d_l is not None and d_l > settings.RESTART_THRESHOLD:
        logger.info(f"Frontal start ended at d_L={d_l:.3f}%; trying {len(RESTART_ROTATIONS)} restarts")
        for start in RESTART_ROTATIONS:
            restarts_used += 1
            candidate_report = _solve_from(system, start, initial_scale(model, landmarks, start), config)
            if candidate_report.objective < report.objective:
                report = candidate_report
        flags.append(FLAG_RESTARTS_USED)

    if system.fd_fallback:
        flags.append(FLAG_FD_JACOBIAN)
    if system.rank_deficient:
        flags.append(FLAG_RANK_DEFICIENT)
    result = _finish(model, landmarks, system, config, report, flags, restarts_used)
    logger.debug(f"Orthographic fit: objective={result.objective:.6e} iterations={report.iterations} "
                 f"reason={report.reason.value}")
    return result

def fit_landmarks_ortho_als(model: ShapeModel, landmarks: Landmarks2D,
                            config: Optional[OrthoFitConfig] = None) -> FitResult:
    '''
    Alternating baseline: pose by scaled-orthographic Procrustes against the
    current shape, then the linear shape + translation solve at fixed (r, s).
    Rounds that would increase the objective are discarded.
    '''
    config = config or OrthoFitConfig()
    require_landmarks(landmarks, 2, "orthographic fitting")
    r, s = _start(model, landmarks, config)
    system = OrthoSystem(model, landmarks, config.tikhonov_weight)

    linear = system.linear(r, s)
    f = system.penalized_objective(r, s, linear.alpha, linear.translation)
    trace = [f]
    reason = TerminationReason.MAX_ITER
    rounds = 0
    while rounds < config.max_outer_iters:
        r_new, s_new, _ = sop_pose_from_points(system.shape_points(linear.alpha), landmarks.points)
        linear_new = system.linear(r_new, s_new)
        f_new = system.penalized_objective(r_new, s_new, linear_new.alpha, linear_new.translation)
        rounds += 1
        if f_new > f:
            reason = TerminationReason.OBJECTIVE_CHANGE
            break
        change = (f - f_new) / f if f > 0 else 0.0
        r, s, linear, f = r_new, s_new, linear_new, f_new
        trace.append(f)
        if change < ALS_RELATIVE_TOL:
            reason = TerminationReason.OBJECTIVE_CHANGE
            break

    report = SolveReport(x=np.concatenate([r, [s]]), objective=f, iterations=rounds, reason=reason, trace=trace)
    result = _finish(model, landmarks, system, config, report, [], linear=linear)
    logger.debug(f"ALS fit: objective={result.objective:.6e} rounds={rounds}")
    return result
