'''
Synthetic experiments on a shape model: how far perspective departs from
orthography, how well other distances explain the same landmarks, how well
the distance can be estimated, and how SNLS compares with alternation.

Every function returns plain row dicts (one per table line) and is a
deterministic function of its arguments.
'''
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from core.analysis.metrics import surface_distance
from core.fitting.landmarks import fit_landmarks, landmark_error, project_landmarks, project_points
from core.fitting.ortho import fit_landmarks_ortho, fit_landmarks_ortho_als
from core.fitting.persp import estimate_distance, fit_landmarks_persp
from core.geometry.camera import sop_project_points
from core.geometry.shape import eye_indices, sample_coefficients, synthesize_vertices
from core.models.camera import OrthoPose, PerspCamera
from core.models.fit import FLAG_LOW_CONFIDENCE, FitResult, OrthoFitConfig, PerspFitConfig
from core.models.observations import Landmarks2D
from core.models.shape_model import ShapeModel
from utils.errors import InvalidArgumentError
from utils.parallel import map_ordered

ORTHO = "ortho"
INTEROCULAR_PX = 200.0
IMAGE_CENTRE = (256.0, 256.0)
ALS_TIE_TOLERANCE = 1e-8

Distance = Union[float, str]

def sample_alphas(model: ShapeModel, seeds: Sequence[int], bound_sigmas: float = 2.0) -> List[np.ndarray]:
    return [sample_coefficients(model, np.random.default_rng(seed), bound_sigmas) for seed in seeds]

def parse_distance(value: Union[str, float]) -> Distance:
    '''A distance in metres, or the orthographic pseudo-distance.'''
    if isinstance(value, str) and value.strip().lower() == ORTHO:
        return ORTHO
    try:
        distance = float(value)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"distance must be a number or '{ORTHO}', got {value!r}")
    if not distance > 0:
        raise InvalidArgumentError(f"distance must be positive, got {distance}")
    return distance

def _eye_span(model: ShapeModel, alpha, project) -> float:
    eyes = list(eye_indices(model))
    a, b = project(synthesize_vertices(model, alpha)[eyes])
    span = float(np.linalg.norm(a - b))
    if span <= 0:
        raise InvalidArgumentError("eye landmarks coincide in the image")
    return span

def normalized_camera(model: ShapeModel, alpha, distance: float, rotation=(0.0, 0.0, 0.0),
                      interocular_px: float = INTEROCULAR_PX) -> PerspCamera:
    '''Camera on the optical axis at `distance` with f set so the eyes are interocular_px apart.'''
    unit = PerspCamera(r=rotation, t3d=[0.0, 0.0, distance], f=1.0)
    f = interocular_px / _eye_span(model, alpha, lambda pts: project_points(pts, unit))
    return PerspCamera(r=rotation, t3d=[0.0, 0.0, distance], f=f)

def normalized_pose(model: ShapeModel, alpha, rotation=(0.0, 0.0, 0.0),
                    interocular_px: float = INTEROCULAR_PX, centre=IMAGE_CENTRE) -> OrthoPose:
    '''Scaled orthographic pose with the eyes interocular_px apart around the image centre.'''
    s = interocular_px / _eye_span(model, alpha, lambda pts: sop_project_points(pts, rotation, np.zeros(2), 1.0))
    return OrthoPose(r=rotation, t2d=np.asarray(centre) / s, s=s)

def _require_alphas(alphas: Sequence[np.ndarray]):
    if len(alphas) == 0:
        raise InvalidArgumentError("at least one shape instance is required")

def _truth_landmarks(model: ShapeModel, alpha, generator: Distance) -> Landmarks2D:
    camera = normalized_pose(model, alpha) if generator == ORTHO else normalized_camera(model, alpha, generator)
    return project_landmarks(model, alpha, camera)

def _surface_mm(model: ShapeModel, result: FitResult, alpha) -> float:
    return 1000.0 * surface_distance(synthesize_vertices(model, result.alpha), synthesize_vertices(model, alpha))

def _fit_at(model: ShapeModel, landmarks: Landmarks2D, distance: Distance, config: PerspFitConfig) -> FitResult:
    if distance == ORTHO:
        return fit_landmarks_ortho(model, landmarks, OrthoFitConfig(**config.dict(include=set(OrthoFitConfig.__fields__))))
    return fit_landmarks_persp(model, landmarks, config, fixed_tz=distance)

def perspective_departure(model: ShapeModel, alpha, distance: float) -> float:
    '''
    d_L (%) between the perspective projection of the landmarks at `distance`
    and their orthographic projection, after the best scale and translation.
    '''
    camera = normalized_camera(model, alpha, distance)
    idx = model.landmark_indices
    points = synthesize_vertices(model, alpha)[idx]
    persp = project_points(points, camera, idx)
    ortho = sop_project_points(points, camera.r, np.zeros(2), 1.0)

    ortho_c, persp_c = ortho - ortho.mean(axis=0), persp - persp.mean(axis=0)
    scale = np.sum(ortho_c * persp_c) / np.sum(ortho_c ** 2)
    fitted = scale * ortho_c + persp.mean(axis=0)
    iod = np.linalg.norm(persp[0] - persp[1])
    return float(100.0 * np.mean(np.linalg.norm(persp - fitted, axis=1)) / iod)

def persp_vs_ortho_sweep(model: ShapeModel, alphas: Sequence[np.ndarray], distances: Sequence[float],
                         threads: Optional[int] = None) -> List[Dict]:
    if any(d <= 0 for d in distances):
        raise InvalidArgumentError("distances must be positive")
    if list(distances) != sorted(distances):
        raise InvalidArgumentError("distances must be ascending")
    _require_alphas(alphas)
    if model.landmark_indices.size < 2:
        raise InvalidArgumentError("the sweep needs the model's landmark set (eyes first)")

    def row(distance):
        errors = [perspective_departure(model, alpha, distance) for alpha in alphas]
        return {"t_z": distance, "d_l_mean": float(np.mean(errors)), "d_l_max": float(np.max(errors))}

    return map_ordered(row, distances, threads)

def ambiguity_cell(model: ShapeModel, alpha, generator: Distance, fitted: Distance,
                   config: Optional[PerspFitConfig] = None) -> Dict:
    config = config or PerspFitConfig()
    landmarks = _truth_landmarks(model, alpha, generator)
    result = _fit_at(model, landmarks, fitted, config)
    return {"d_l": landmark_error(model, result), "d_s_mm": _surface_mm(model, result, alpha)}

def ambiguity_table(model: ShapeModel, alphas: Sequence[np.ndarray], gen_distances: Sequence[Distance],
                    fit_distances: Sequence[Distance], config: Optional[PerspFitConfig] = None,
                    threads: Optional[int] = None) -> List[Dict]:
    '''One row per (generating, fitting) distance: d_L and d_S averaged over alphas.'''
    _require_alphas(alphas)
    cells = [(g, f) for g in gen_distances for f in fit_distances]
    jobs = [(g, f, k) for g, f in cells for k in range(len(alphas))]
    values = map_ordered(lambda job: ambiguity_cell(model, alphas[job[2]], job[0], job[1], config), jobs, threads)

    rows = []
    for n, (g, f) in enumerate(cells):
        chunk = values[n * len(alphas):(n + 1) * len(alphas)]
        d_l = [c["d_l"] for c in chunk if c["d_l"] is not None]
        rows.append({
            "gen": g,
            "fit": f,
            "d_l": float(np.mean(d_l)) if d_l else None,
            "d_s_mm": float(np.mean([c["d_s_mm"] for c in chunk])),
        })
    return rows

def distance_bias_experiment(model: ShapeModel, alphas: Sequence[np.ndarray], distances: Sequence[float],
                             config: Optional[PerspFitConfig] = None, threads: Optional[int] = None) -> List[Dict]:
    '''Estimated against true distance, starting from the true rotation and focal length.'''
    config = config or PerspFitConfig()
    jobs = [(d, k) for d in distances for k in range(len(alphas))]

    def row(job):
        distance, k = job
        camera = normalized_camera(model, alphas[k], distance)
        landmarks = project_landmarks(model, alphas[k], camera)
        start = config.copy(update={"init_rotation": tuple(camera.r.tolist()), "init_focal": camera.f})
        estimate, result = estimate_distance(model, landmarks, start)
        return {
            "alpha": k,
            "true_t_z": distance,
            "estimated_t_z": estimate,
            "relative_error": (estimate - distance) / distance,
            "low_confidence": FLAG_LOW_CONFIDENCE in result.flags,
            "d_l": landmark_error(model, result),
        }

    return map_ordered(row, jobs, threads)

def snls_vs_als(model: ShapeModel, seeds: Sequence[int], noise_px: float,
                config: Optional[OrthoFitConfig] = None, threads: Optional[int] = None) -> List[Dict]:
    '''
    Paired orthographic fits of one noisy instance per seed. Both fitters start
    from the same frontal pose; restarts are off so neither gets extra starts.
    '''
    if noise_px < 0:
        raise InvalidArgumentError("noise must be non-negative")
    config = (config or OrthoFitConfig()).copy(update={"restarts": False})

    def row(seed):
        rng = np.random.default_rng(seed)
        alpha = sample_coefficients(model, rng, 2.0)
        rotation = np.radians([rng.uniform(-10, 10), rng.uniform(-30, 30), 0.0])
        landmarks = project_landmarks(model, alpha, normalized_pose(model, alpha, rotation),
                                      noise_px=noise_px, rng=rng)
        snls = fit_landmarks_ortho(model, landmarks, config)
        als = fit_landmarks_ortho_als(model, landmarks, config)
        snls_obj, als_obj = snls.objective, als.objective
        return {
            "seed": seed,
            "snls_objective": snls_obj,
            "als_objective": als_obj,
            "snls_d_s_mm": _surface_mm(model, snls, alpha),
            "als_d_s_mm": _surface_mm(model, als, alpha),
            "snls_iterations": snls.report.iterations,
            "als_rounds": als.report.iterations,
            "snls_not_worse": snls_obj <= als_obj + ALS_TIE_TOLERANCE * max(als_obj, 1.0),
        }

    return map_ordered(row, seeds, threads)

def distance_sweep(model: ShapeModel, landmarks: Landmarks2D, distances: Sequence[float],
                   config: Optional[PerspFitConfig] = None, threads: Optional[int] = None) -> List[Dict]:
    '''
    The family alpha*(k) for one observation set: the best fit with the
    distance frozen at each k, compared with the free-distance fit.
    '''
    config = config or PerspFitConfig()
    free_tz, free = estimate_distance(model, landmarks, config)
    reference = synthesize_vertices(model, free.alpha)

    def describe(kind: str, distance: float, result: FitResult) -> Dict:
        return {
            "kind": kind,
            "t_z": distance,
            "d_l": landmark_error(model, result),
            "objective": result.objective,
            "alpha_norm": float(np.linalg.norm(result.alpha_normalized)),
            "d_s_mm": 1000.0 * surface_distance(synthesize_vertices(model, result.alpha), reference),
        }

    rows = map_ordered(
        lambda k: describe("fixed", k, fit_landmarks_persp(model, landmarks, config, fixed_tz=k)),
        distances, threads,
    )
    rows.append(describe("free", free_tz, free))
    return rows

def pose_sweep(model: ShapeModel, alphas: Sequence[np.ndarray], yaw_degrees: Sequence[float], noise_px: float,
               seed: int = 0, config: Optional[OrthoFitConfig] = None, threads: Optional[int] = None) -> List[Dict]:
    '''Orthographic SNLS accuracy per yaw angle, averaged over alphas.'''
    _require_alphas(alphas)
    config = config or OrthoFitConfig()
    jobs = [(i, k) for i in range(len(yaw_degrees)) for k in range(len(alphas))]

    def cell(job):
        i, k = job
        rng = np.random.default_rng([seed, i, k])
        pose = normalized_pose(model, alphas[k], (0.0, np.radians(yaw_degrees[i]), 0.0))
        landmarks = project_landmarks(model, alphas[k], pose, noise_px=noise_px, rng=rng)
        result = fit_landmarks(model, landmarks, ORTHO, config)
        return _surface_mm(model, result, alphas[k]), landmark_error(model, result)

    values = map_ordered(cell, jobs, threads)
    rows = []
    for i, yaw in enumerate(yaw_degrees):
        chunk = values[i * len(alphas):(i + 1) * len(alphas)]
        d_l = [v[1] for v in chunk if v[1] is not None]
        rows.append({
            "yaw_deg": float(yaw),
            "d_s_mm": float(np.mean([v[0] for v in chunk])),
            "d_l": float(np.mean(d_l)) if d_l else None,
            "samples": len(chunk),
        })
    return rows
