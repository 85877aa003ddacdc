'''
Bounded trust-region nonlinear least squares.

Minimises eps(p) = d(p).T d(p) subject to lower <= p <= upper. Each iteration
solves the scaled trust-region subproblem exactly (SVD + secular equation),
reflects the trial point into the box, and accepts it only if the objective
decreases, so the objective trace is non-increasing and every accepted
iterate is feasible. Parameters with lower == upper never move.
'''
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg as sl
from pydantic import validator
from scipy.optimize import brentq

from core.models.base import ArrayModel, frozen_array
from core.models.solver import SolveReport, SolverOptions, TerminationReason
from utils.errors import BehindCameraError, InvalidArgumentError, NumericError
from utils.logger import get_logger

logger = get_logger(__name__)

FD_RELATIVE_STEP = 1e-7

class LeastSquaresProblem(ArrayModel):
    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    x0: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    @validator("x0", pre=True)
    def _as_x0(cls, v):
        arr = np.asarray(v, dtype=float).ravel()
        if arr.size < 1:
            raise ValueError("at least one parameter is required")
        return frozen_array(arr, name="x0")

    @validator("lower", "upper", pre=True, always=True)
    def _as_bound(cls, v, values, field):
        if "x0" not in values:
            return v
        n = values["x0"].size
        fill = -np.inf if field.name == "lower" else np.inf
        arr = np.full(n, fill) if v is None else np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
        arr.flags.writeable = False
        return arr

    @validator("upper")
    def _check_box(cls, v, values):
        if "x0" in values and "lower" in values:
            x0, lo = values["x0"], values["lower"]
            if np.any(lo > v) or np.any(x0 < lo) or np.any(x0 > v):
                raise ValueError("bounds must satisfy lower <= x0 <= upper")
        return v

    @property
    def free(self) -> np.ndarray:
        return self.lower < self.upper

def finite_difference_jacobian(residual: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                               lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None,
                               step: Optional[float] = None) -> np.ndarray:
    '''Central differences, h = 1e-7 * max(1, |x_i|) unless step is given; one-sided at bounds.'''
    x = np.asarray(x, dtype=float)
    n = x.size
    lo = np.full(n, -np.inf) if lower is None else lower
    hi = np.full(n, np.inf) if upper is None else upper
    d0 = None
    columns = []
    for i in range(n):
        h = step if step is not None else FD_RELATIVE_STEP * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        if lo[i] == hi[i]:
            d0 = residual(x) if d0 is None else d0
            columns.append(np.zeros_like(d0))
            continue
        if x[i] + h <= hi[i] and x[i] - h >= lo[i]:
            xp[i] += h
            xm[i] -= h
            columns.append((residual(xp) - residual(xm)) / (2 * h))
        elif x[i] + h <= hi[i]:
            d0 = residual(x) if d0 is None else d0
            xp[i] += h
            columns.append((residual(xp) - d0) / h)
        else:
            d0 = residual(x) if d0 is None else d0
            xm[i] -= h
            columns.append((d0 - residual(xm)) / h)
    return np.column_stack(columns)

def check_jacobian(problem: LeastSquaresProblem, p: np.ndarray, step: float = 1e-6) -> float:
    '''Max relative error between the analytic Jacobian and central differences.'''
    p = np.asarray(p, dtype=float)
    if problem.jacobian is None:
        raise InvalidArgumentError("problem has no analytic Jacobian to check")
    analytic = np.asarray(problem.jacobian(p), dtype=float)
    numeric = finite_difference_jacobian(problem.residual, p, step=step)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))

def _trust_region_step(J: np.ndarray, d: np.ndarray, scale: np.ndarray, radius: float) -> np.ndarray:
    '''argmin |d + J delta| subject to |scale * delta| <= radius.'''
    Js = J / scale
    U, sv, Vt = sl.svd(Js, full_matrices=False)
    beta = U.T @ d
    keep = sv > sv[0] * 1e-15 if sv.size and sv[0] > 0 else np.zeros_like(sv, dtype=bool)

    def y_of(mu):
        coef = np.zeros_like(sv)
        coef[keep] = sv[keep] / (sv[keep] ** 2 + mu)
        return -Vt.T @ (coef * beta)

    y = y_of(0.0)
    if np.linalg.norm(y) > radius:
        upper = np.linalg.norm(Js.T @ d) / radius
        mu = brentq(lambda m: np.linalg.norm(y_of(m)) - radius, 0.0, max(upper, 1e-300), xtol=1e-14, rtol=1e-10)
        y = y_of(mu)
    return y / scale

def _reflect(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    below = x < lower
    x = np.where(below, 2 * lower - x, x)
    above = x > upper
    x = np.where(above, 2 * upper - x, x)
    return np.clip(x, lower, upper)

def _feasible_trial(x, x_trial, d, J, lower, upper) -> np.ndarray:
    '''Reflected or truncated trial point, whichever the linear model prefers.'''
    if np.all((x_trial >= lower) & (x_trial <= upper)):
        return x_trial
    reflected = _reflect(x_trial, lower, upper)
    truncated = np.clip(x_trial, lower, upper)
    model = [float(np.sum((d + J @ (c - x)) ** 2)) for c in (reflected, truncated)]
    return reflected if model[0] < model[1] else truncated

def _evaluate(fun, x, what: str) -> np.ndarray:
    value = np.asarray(fun(x), dtype=float)
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite {what} at iterate", snapshot=x)
    return value

def solve(problem: LeastSquaresProblem, options: Optional[SolverOptions] = None,
          callback: Optional[Callable[[np.ndarray, float], None]] = None) -> SolveReport:
    options = options or SolverOptions()
    lo, hi = problem.lower, problem.upper
    free = problem.free
    x = problem.x0.copy()
    jac = problem.jacobian or (lambda p: finite_difference_jacobian(problem.residual, p, lo, hi))

    d = _evaluate(problem.residual, x, "residual")
    J = _evaluate(jac, x, "Jacobian")
    nfev, njev = 1, 1
    f = float(d @ d)
    trace: List[float] = [f]

    scale = np.linalg.norm(J, axis=0)
    scale[scale == 0] = 1.0
    radius = options.initial_radius * max(np.linalg.norm(scale[free] * x[free]), np.linalg.norm(scale[free]), 1e-12)

    iterations = 0
    reason = TerminationReason.MAX_ITER
    while iterations < options.max_iterations:
        g = J.T @ d
        blocked = ((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0))
        active = free & ~blocked
        if f == 0.0 or not np.any(active) or 2 * np.max(np.abs(g[active])) < options.gtol:
            reason = TerminationReason.GRADIENT
            break

        accepted = False
        while True:
            delta = _trust_region_step(J[:, active], d, scale[active], radius)
            x_trial = x.copy()
            x_trial[active] += delta
            x_trial = _feasible_trial(x, x_trial, d, J, lo, hi)
            step = x_trial - x
            step_norm = np.linalg.norm(scale * step)
            if step_norm <= options.xtol * (np.linalg.norm(scale * x) + options.xtol):
                reason = TerminationReason.STEP
                break

            predicted = f - float(np.sum((d + J @ step) ** 2))
            try:
                d_trial = np.asarray(problem.residual(x_trial), dtype=float)
                nfev += 1
                f_trial = float(d_trial @ d_trial) if np.all(np.isfinite(d_trial)) else np.inf
            except BehindCameraError as e:
                logger.debug(f"Rejected step: {e.detail}")
                f_trial = np.inf
            actual = f - f_trial
            rho = actual / predicted if predicted > 0 else -np.inf

            if rho < options.shrink_ratio:
                radius = options.shrink_ratio * min(radius, step_norm)
            elif rho > options.expand_ratio and step_norm >= 0.99 * radius:
                radius *= 2.0

            if rho > options.accept_ratio and f_trial <= f:
                accepted = True
                break
            if radius <= options.xtol * (np.linalg.norm(scale * x) + options.xtol):
                reason = TerminationReason.STEP
                break

        if not accepted:
            break

        x, d = x_trial, d_trial
        J = _evaluate(jac, x, "Jacobian")
        njev += 1
        scale = np.maximum(scale, np.linalg.norm(J, axis=0))
        iterations += 1
        relative_change = (f - f_trial) / f if f > 0 else 0.0
        f = f_trial
        trace.append(f)
        logger.debug(f"iteration {iterations}: objective={f:.6e} radius={radius:.3e}")
        if callback is not None:
            callback(x.copy(), f)
        if relative_change < options.ftol:
            reason = TerminationReason.OBJECTIVE_CHANGE
            break

    return SolveReport(x=x, objective=f, iterations=iterations, reason=reason,
                       trace=trace, nfev=nfev, njev=njev)
