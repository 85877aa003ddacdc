'''
Landmark fitting under perspective projection.

Stage 1 linearises the pinhole model through the collinearity constraint
[x_i; 1] x K (R v_i + t) = 0. Stacked over landmarks this reads B p - z with
B = D (I kron K) [(I kron R) Q_L, 1 kron I_3], z = -D (I kron K R) mean_L and
p = [alpha; t3d], so the linear parameters are eliminated exactly as in the
orthographic case and only (r, f) remain nonlinear. Stage 2 refines every
parameter against the true reprojection error.
'''
from typing import List, Optional, Tuple

import numpy as np

from config import settings
from core.fitting.common import clamp_coefficients, fit_landmark_error, require_landmarks
from core.fitting.ortho import fit_landmarks_ortho
from core.geometry.camera import DK_DF, intrinsics, pinhole_project_points, rodrigues, rodrigues_derivatives, skew
from core.geometry.shape import landmark_submatrix, synthesize_vertices
from core.models.camera import PerspCamera
from core.models.fit import FLAG_CLAMPED, FLAG_FD_JACOBIAN, FLAG_LOW_CONFIDENCE, FLAG_RANK_DEFICIENT, \
    FitResult, PerspFitConfig
from core.models.observations import Landmarks2D
from core.models.shape_model import ShapeModel
from core.models.solver import SolveReport
from core.optim.least_squares import LeastSquaresProblem, finite_difference_jacobian, solve
from core.optim.varpro import LinearSolution, projected_jacobian, projected_residual, pseudoinverse, regularize
from utils.errors import BehindCameraError, FitError, InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

# Smallest admissible focal length or distance when the stage-1 value gives no usable scale
POSITIVE_FLOOR = 1e-9

class DLTSystem:
    '''Collinearity rows of the landmarks for a fixed principal point.'''

    def __init__(self, model: ShapeModel, landmarks: Landmarks2D, principal_point=(0.0, 0.0),
                 tikhonov_weight: float = 0.0, normalized: bool = True, fixed_tz: Optional[float] = None):
        Q, mean = landmark_submatrix(model, landmarks.vertex_indices)
        self.L = landmarks.count
        self.S = model.num_modes
        columns = Q * model.sigma if normalized else Q
        self.Q = columns.reshape(self.L, 3, self.S)
        self.mean = mean.reshape(self.L, 3)
        self.principal_point = tuple(float(c) for c in principal_point)
        homogeneous = np.hstack([landmarks.points, np.ones((self.L, 1))])
        self.D = np.stack([skew(xh) for xh in homogeneous])
        self.weight = tikhonov_weight
        self.prior_sigma = None if normalized else model.sigma
        self.fixed_tz = fixed_tz
        self.fd_fallback = False
        self.rank_deficient = False

    def _stack(self, blocks: np.ndarray) -> np.ndarray:
        '''Apply D to per-landmark (3, k) blocks, giving a 3L x k matrix.'''
        return np.einsum("lij,ljk->lik", self.D, blocks).reshape(3 * self.L, -1)

    def _columns(self, M: np.ndarray, T: np.ndarray) -> np.ndarray:
        shape = np.einsum("ij,ljs->lis", M, self.Q)
        return self._stack(np.concatenate([shape, np.broadcast_to(T, (self.L, 3, 3))], axis=2))

    def _points(self, M: np.ndarray) -> np.ndarray:
        return -self._stack((self.mean @ M.T)[:, :, None]).ravel()

    def matrix(self, r, f: float) -> np.ndarray:
        K = intrinsics(f, self.principal_point)
        return self._columns(K @ rodrigues(r), K)

    def vector(self, r, f: float) -> np.ndarray:
        return self._points(intrinsics(f, self.principal_point) @ rodrigues(r))

    def derivatives(self, r, f: float) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        '''dB and dz with respect to (r_0, r_1, r_2, f).'''
        K = intrinsics(f, self.principal_point)
        R = rodrigues(r)
        dB, dz = [], []
        for dR in rodrigues_derivatives(r):
            dB.append(self._columns(K @ dR, np.zeros((3, 3))))
            dz.append(self._points(K @ dR))
        dB.append(self._columns(DK_DF @ R, DK_DF))
        dz.append(self._points(DK_DF @ R))
        return dB, dz

    def _system(self, B: np.ndarray, z: np.ndarray):
        '''Move a fixed t_z column to the right-hand side, then append prior rows.'''
        if self.fixed_tz is not None:
            tz_col = self.S + 2
            z = z - B[:, tz_col] * self.fixed_tz
            B = np.delete(B, tz_col, axis=1)
        return regularize(B, z, self.S, self.weight, self.prior_sigma)

    def linear(self, r, f: float) -> LinearSolution:
        M, v = self._system(self.matrix(r, f), self.vector(r, f))
        M_pinv, rank = pseudoinverse(M)
        p = M_pinv @ v
        translation = p[self.S:]
        if self.fixed_tz is not None:
            translation = np.append(translation, self.fixed_tz)
        return LinearSolution(alpha=p[:self.S], translation=translation, rank_deficient=rank < M.shape[1])

    def residual(self, params: np.ndarray) -> np.ndarray:
        r, f = params[:3], params[3]
        M, v = self._system(self.matrix(r, f), self.vector(r, f))
        M_pinv, _ = pseudoinverse(M)
        return projected_residual(M, v, M_pinv)

    def jacobian(self, params: np.ndarray) -> np.ndarray:
        r, f = params[:3], params[3]
        B, z = self.matrix(r, f), self.vector(r, f)
        M, v = self._system(B, z)
        M_pinv, rank = pseudoinverse(M)
        if rank < M.shape[1]:
            if not self.fd_fallback:
                logger.warning("DLT system is rank deficient; using finite-difference Jacobian")
            self.fd_fallback = True
            self.rank_deficient = True
            return finite_difference_jacobian(self.residual, params)
        dB, dz = self.derivatives(r, f)
        pad = M.shape[0] - 3 * self.L
        dM, dv = [], []
        for dBk, dzk in zip(dB, dz):
            if self.fixed_tz is not None:
                dzk = dzk - dBk[:, self.S + 2] * self.fixed_tz
                dBk = np.delete(dBk, self.S + 2, axis=1)
            dM.append(np.vstack([dBk, np.zeros((pad, dBk.shape[1]))]))
            dv.append(np.concatenate([dzk, np.zeros(pad)]))
        return projected_jacobian(M, dM, v, dv, M_pinv)

class ReprojectionSystem:
    '''
    True pinhole residual x_i - pi(R v_i(alpha) + t) over theta = [r, t3d, f, alpha_n],
    with sqrt(weight) * alpha_n prior rows appended.
    '''

    def __init__(self, model: ShapeModel, landmarks: Landmarks2D, principal_point=(0.0, 0.0),
                 tikhonov_weight: float = 0.0):
        Q, mean = landmark_submatrix(model, landmarks.vertex_indices)
        self.L = landmarks.count
        self.S = model.num_modes
        self.Q = (Q * model.sigma).reshape(self.L, 3, self.S)
        self.mean = mean.reshape(self.L, 3)
        self.vertex_ids = landmarks.vertex_indices
        self.x = landmarks.stacked()
        self.c = np.asarray(principal_point, dtype=float)
        self.weight = tikhonov_weight

    @staticmethod
    def pack(r, t3d, f: float, alpha_n) -> np.ndarray:
        return np.concatenate([np.asarray(r, dtype=float), np.asarray(t3d, dtype=float), [f],
                               np.asarray(alpha_n, dtype=float)])

    def unpack(self, theta: np.ndarray):
        return theta[:3], theta[3:6], float(theta[6]), theta[7:]

    def _camera_points(self, theta: np.ndarray) -> np.ndarray:
        r, t, _, alpha_n = self.unpack(theta)
        X = (self.mean + self.Q @ alpha_n) @ rodrigues(r).T + t
        bad = np.nonzero(X[:, 2] <= 0)[0]
        if bad.size:
            raise BehindCameraError(int(self.vertex_ids[bad[0]]), float(X[bad[0], 2]))
        return X

    def data_residual(self, theta: np.ndarray) -> np.ndarray:
        X = self._camera_points(theta)
        f = float(theta[6])
        return self.x - (f * X[:, :2] / X[:, 2:3] + self.c).ravel()

    def residual(self, theta: np.ndarray) -> np.ndarray:
        d = self.data_residual(theta)
        if self.weight <= 0:
            return d
        return np.concatenate([d, np.sqrt(self.weight) * theta[7:]])

    def jacobian(self, theta: np.ndarray) -> np.ndarray:
        r, _, f, alpha_n = self.unpack(theta)
        X = self._camera_points(theta)
        Z = X[:, 2]
        # d pi / d X per landmark, (L, 2, 3)
        dpi = np.zeros((self.L, 2, 3))
        dpi[:, 0, 0] = f / Z
        dpi[:, 1, 1] = f / Z
        dpi[:, 0, 2] = -f * X[:, 0] / Z ** 2
        dpi[:, 1, 2] = -f * X[:, 1] / Z ** 2

        shape = self.mean + self.Q @ alpha_n
        columns = [np.einsum("lij,lj->li", dpi, shape @ dR.T).ravel() for dR in rodrigues_derivatives(r)]
        columns += [dpi[:, :, k].ravel() for k in range(3)]
        columns.append((X[:, :2] / Z[:, None]).ravel())
        dshape = np.einsum("ij,ljs->lis", rodrigues(r), self.Q)
        J_alpha = np.einsum("lij,ljs->lis", dpi, dshape).reshape(2 * self.L, self.S)
        J = -np.hstack([np.column_stack(columns), J_alpha])
        if self.weight <= 0:
            return J
        prior = np.zeros((self.S, J.shape[1]))
        prior[:, 7:] = np.sqrt(self.weight) * np.eye(self.S)
        return np.vstack([J, prior])

def assemble_B(model: ShapeModel, landmarks: Landmarks2D, r, f: float, principal_point=(0.0, 0.0)) -> np.ndarray:
    '''3L x (S+3) collinearity matrix on raw coefficients.'''
    return DLTSystem(model, landmarks, principal_point, normalized=False).matrix(r, f)

def assemble_z(model: ShapeModel, landmarks: Landmarks2D, r, f: float, principal_point=(0.0, 0.0)) -> np.ndarray:
    return DLTSystem(model, landmarks, principal_point, normalized=False).vector(r, f)

def dlt_reduced_residual(model: ShapeModel, landmarks: Landmarks2D, r, f: float, principal_point=(0.0, 0.0),
                         tikhonov_weight: float = 0.0) -> np.ndarray:
    '''B B^+ z - z over the 3L collinearity rows.'''
    system = DLTSystem(model, landmarks, principal_point, tikhonov_weight)
    return system.residual(np.concatenate([np.asarray(r, dtype=float), [f]]))[:3 * landmarks.count]

def jacobian_persp_dlt(model: ShapeModel, landmarks: Landmarks2D, r, f: float, principal_point=(0.0, 0.0),
                       tikhonov_weight: float = 0.0) -> np.ndarray:
    '''3L x 4 Jacobian of the DLT reduced residual with respect to (r_0, r_1, r_2, f).'''
    system = DLTSystem(model, landmarks, principal_point, tikhonov_weight)
    return system.jacobian(np.concatenate([np.asarray(r, dtype=float), [f]]))[:3 * landmarks.count]

def _reprojection_objective(system: ReprojectionSystem, theta: np.ndarray) -> float:
    try:
        d = system.data_residual(theta)
    except BehindCameraError:
        return np.inf
    return float(d @ d)

def _stage_one(model: ShapeModel, landmarks: Landmarks2D, config: PerspFitConfig,
               fixed_tz: Optional[float], flags: List[str]):
    c = config.centre
    k0 = fixed_tz if fixed_tz is not None else config.init_distance
    ortho = fit_landmarks_ortho(model, landmarks, config)
    r0, s0 = ortho.pose.r, ortho.pose.s
    f0 = config.init_focal or s0 * k0

    dlt = DLTSystem(model, landmarks, c, config.tikhonov_weight, fixed_tz=fixed_tz)
    problem = LeastSquaresProblem(
        residual=dlt.residual,
        jacobian=dlt.jacobian,
        x0=np.concatenate([r0, [f0]]),
        lower=np.array([-np.inf, -np.inf, -np.inf, 1e-6 * f0]),
    )
    report = solve(problem, config.solver)
    r, f = report.x[:3], float(report.x[3])
    linear = dlt.linear(r, f)
    if linear.rank_deficient or dlt.rank_deficient:
        flags.append(FLAG_RANK_DEFICIENT)
    if dlt.fd_fallback:
        flags.append(FLAG_FD_JACOBIAN)

    alpha_n, clamped = clamp_coefficients(linear.alpha, config.bound_sigmas)
    if clamped:
        flags.append(FLAG_CLAMPED)
    theta = ReprojectionSystem.pack(r, linear.translation, f, alpha_n)

    reprojection = ReprojectionSystem(model, landmarks, c, config.tikhonov_weight)
    if not np.isfinite(_reprojection_objective(reprojection, theta)):
        # collinearity is blind to the sign of depth; fall back to the orthographic pose at distance k0
        logger.info("DLT solution places landmarks behind the camera; starting from the orthographic pose")
        t_xy = ortho.pose.t2d - np.asarray(c) / s0
        theta = ReprojectionSystem.pack(r0, np.append(t_xy, k0), s0 * k0, ortho.alpha_normalized)
        report = SolveReport(x=np.concatenate([r0, [s0 * k0]]), objective=report.objective,
                             iterations=report.iterations, reason=report.reason, trace=report.trace,
                             nfev=report.nfev, njev=report.njev)
        if not np.isfinite(_reprojection_objective(reprojection, theta)):
            raise FitError(f"no feasible starting camera: landmarks lie behind a camera at distance {k0} m")
    return report, theta, reprojection

def stage_two_box(theta0: np.ndarray, bound_sigmas: float,
                  fixed_tz: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''Bounds f > 0, t_z > 0 (or t_z frozen) and |alpha_i| <= bound, with theta0 clipped into them.'''
    theta0 = np.asarray(theta0, dtype=float)
    n = theta0.size
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[6] = max(1e-6 * abs(theta0[6]), POSITIVE_FLOOR)
    if fixed_tz is not None:
        lower[5] = upper[5] = fixed_tz
    else:
        lower[5] = max(1e-6 * abs(theta0[5]), POSITIVE_FLOOR)
    lower[7:], upper[7:] = -bound_sigmas, bound_sigmas
    return np.clip(theta0, lower, upper), lower, upper

def _stage_two(system: ReprojectionSystem, theta0: np.ndarray, config: PerspFitConfig,
               fixed_tz: Optional[float], flags: List[str]) -> SolveReport:
    x0, lower, upper = stage_two_box(theta0, config.bound_sigmas, fixed_tz)
    jacobian = None if config.fd_jacobian else system.jacobian
    if config.fd_jacobian:
        flags.append(FLAG_FD_JACOBIAN)
    problem = LeastSquaresProblem(residual=system.residual, jacobian=jacobian, x0=x0, lower=lower, upper=upper)
    return solve(problem, config.solver)

def _compose(model: ShapeModel, landmarks: Landmarks2D, system: ReprojectionSystem, theta: np.ndarray,
             report: SolveReport, stage1: Optional[SolveReport], flags: List[str]) -> FitResult:
    r, t, f, alpha_n = system.unpack(theta)
    residuals = system.data_residual(theta)
    return FitResult(
        camera="persp",
        alpha=alpha_n * model.sigma,
        alpha_normalized=alpha_n,
        pose=PerspCamera(r=r, t3d=t, f=f, principal_point=tuple(system.c)),
        residuals=residuals,
        objective=float(residuals @ residuals),
        report=report,
        stage1=stage1,
        landmarks=landmarks,
        flags=sorted(set(flags), key=flags.index),
    )

def fit_landmarks_persp(model: ShapeModel, landmarks: Landmarks2D, config: Optional[PerspFitConfig] = None,
                        fixed_tz: Optional[float] = None) -> FitResult:
    config = config or PerspFitConfig()
    require_landmarks(landmarks, 4, "perspective fitting")
    if fixed_tz is not None and not fixed_tz > 0:
        raise InvalidArgumentError(f"fixed distance must be positive, got {fixed_tz}")

    flags: List[str] = []
    stage1, theta, system = _stage_one(model, landmarks, config, fixed_tz, flags)
    stage1_objective = _reprojection_objective(system, theta)
    report = stage1
    if config.refine:
        report = _stage_two(system, theta, config, fixed_tz, flags)
        refined_objective = _reprojection_objective(system, report.x)
        if refined_objective <= stage1_objective:
            theta = report.x
        else:
            logger.debug("Refinement traded reprojection error for the prior; keeping the stage-1 camera")
            report = stage1
    result = _compose(model, landmarks, system, theta, report, stage1, flags)
    logger.debug(f"Perspective fit: objective={result.objective:.6e} t_z={result.pose.t_z:.4f} "
                 f"f={result.pose.f:.2f} stage1={stage1.iterations} stage2={report.iterations}")
    return result

def fit_landmarks_persp_fixed_tz(model: ShapeModel, landmarks: Landmarks2D, k: float,
                                 config: Optional[PerspFitConfig] = None) -> FitResult:
    '''alpha*(k): the best perspective fit with the subject-camera distance frozen at k metres.'''
    return fit_landmarks_persp(model, landmarks, config, fixed_tz=k)

def distance_curvature(model: ShapeModel, result: FitResult, config: Optional[PerspFitConfig] = None) -> float:
    '''
    Gauss-Newton curvature of the profiled objective in relative distance,
    per landmark: eps(t_z (1 + delta)) ~ eps* + L * curvature * delta^2.
    '''
    config = config or PerspFitConfig()
    camera = result.pose
    system = ReprojectionSystem(model, result.landmarks, camera.principal_point, config.tikhonov_weight)
    theta = ReprojectionSystem.pack(camera.r, camera.t3d, camera.f, result.alpha_normalized)
    J = system.jacobian(theta)
    # Schur complement of the t_z column against the others, columns scaled to unit norm first
    tz_column = camera.t_z * J[:, 5]
    others = np.delete(J, 5, axis=1)
    norms = np.linalg.norm(others, axis=0)
    others = others[:, norms > 0] / norms[norms > 0]
    coef, *_ = np.linalg.lstsq(others, tz_column, rcond=settings.PINV_RCOND)
    leftover = tz_column - others @ coef
    return float(leftover @ leftover / result.landmarks.count)

def estimate_distance(model: ShapeModel, landmarks: Landmarks2D,
                      config: Optional[PerspFitConfig] = None) -> Tuple[float, FitResult]:
    '''Unconstrained perspective fit; returns its t_z and the fit, flagged when t_z is poorly determined.'''
    config = config or PerspFitConfig()
    result = fit_landmarks_persp(model, landmarks, config)
    curvature = distance_curvature(model, result, config)
    if curvature < config.curvature_threshold:
        logger.warning(f"Distance estimate {result.pose.t_z:.4f} m is poorly determined "
                       f"(curvature {curvature:.3e} < {config.curvature_threshold:.1e})")
        result = result.copy(update={"flags": result.flags + [FLAG_LOW_CONFIDENCE]})
    return result.pose.t_z, result

def persp_landmark_error(model: ShapeModel, result: FitResult) -> Optional[float]:
    camera = result.pose
    vertices = synthesize_vertices(model, result.alpha)
    return fit_landmark_error(model, result.landmarks, vertices,
                              lambda pts: pinhole_project_points(pts, camera.r, camera.t3d, camera.f,
                                                                 camera.principal_point))
