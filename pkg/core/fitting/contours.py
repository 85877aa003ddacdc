'''
Shape from occluding contours.

Boundary vertices lie on interior mesh edges whose two triangles face opposite
ways relative to the viewing ray. Candidates hidden behind other parts of the
surface are removed by a depth test at the candidate's image position. Each
round pairs visible boundary vertices with edge pixels by mutual nearest
neighbours and refits with those pairs added to the landmarks.
'''
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from core.fitting.landmarks import fit_landmarks, project_points
from core.geometry.camera import rodrigues
from core.geometry.shape import synthesize_vertices
from core.models.camera import OrthoPose, PerspCamera
from core.models.fit import FLAG_NO_CORRESPONDENCES, ContourFitConfig, FitResult
from core.models.observations import BoundarySet, Correspondences, EdgeMap, Landmarks2D
from core.models.shape_model import MeshTopology, ShapeModel
from utils.errors import InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

DEPTH_TOLERANCE = 1e-4  # fraction of the bounding-box depth
INSIDE_EPS = 1e-9

def _camera_frame(vertices: np.ndarray, camera: Union[OrthoPose, PerspCamera]) -> np.ndarray:
    R = rodrigues(camera.r)
    if isinstance(camera, OrthoPose):
        return vertices @ R.T
    return vertices @ R.T + camera.t3d

def _screen(X: np.ndarray, perspective: bool) -> np.ndarray:
    return X[:, :2] / X[:, 2:3] if perspective else X[:, :2]

def facing(X: np.ndarray, triangles: np.ndarray, perspective: bool) -> np.ndarray:
    '''Sign of normal . viewing ray per triangle (negative: towards the camera).'''
    p0, p1, p2 = (X[triangles[:, k]] for k in range(3))
    normals = np.cross(p1 - p0, p2 - p0)
    if perspective:
        return np.sign(np.sum(normals * p0, axis=1))
    return np.sign(normals[:, 2])

def occluding_edges(X: np.ndarray, topology: MeshTopology, perspective: bool) -> List[Tuple[int, int]]:
    '''Interior edges whose two triangles face opposite ways.'''
    signs = facing(X, topology.triangles, perspective)
    return [edge for edge, faces in topology.edge_faces().items()
            if len(faces) == 2 and signs[faces[0]] * signs[faces[1]] < 0]

def silhouette_candidates(X: np.ndarray, topology: MeshTopology, perspective: bool) -> np.ndarray:
    '''Endpoints of occluding edges, minus mesh-boundary vertices.'''
    chosen = {v for edge in occluding_edges(X, topology, perspective) for v in edge}
    chosen -= topology.boundary_vertices()
    return np.array(sorted(chosen), dtype=np.int64)

def visible(X: np.ndarray, triangles: np.ndarray, candidates: np.ndarray, perspective: bool) -> np.ndarray:
    '''
    Depth test of each candidate against every triangle not incident to it.

    A candidate is hidden if its screen position falls strictly inside a
    triangle whose interpolated depth is nearer by more than the tolerance.
    '''
    if candidates.size == 0:
        return np.zeros(0, dtype=bool)
    depth = X[:, 2]
    tol = DEPTH_TOLERANCE * max(float(np.ptp(depth)), 1e-12)
    uv = _screen(X, perspective)
    a, b, c = (uv[triangles[:, k]] for k in range(3))
    v0, v1 = b - a, c - a
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    usable = np.abs(det) > 0
    det = np.where(usable, det, 1.0)

    q = uv[candidates][:, None, :] - a[None, :, :]
    l1 = (q[..., 0] * v1[None, :, 1] - q[..., 1] * v1[None, :, 0]) / det
    l2 = (v0[None, :, 0] * q[..., 1] - v0[None, :, 1] * q[..., 0]) / det
    l0 = 1.0 - l1 - l2
    inside = (l0 > INSIDE_EPS) & (l1 > INSIDE_EPS) & (l2 > INSIDE_EPS) & usable[None, :]

    z0, z1, z2 = (depth[triangles[:, k]] for k in range(3))
    if perspective:
        hit = 1.0 / (l0 / z0 + l1 / z1 + l2 / z2)
    else:
        hit = l0 * z0 + l1 * z1 + l2 * z2
    incident = np.any(triangles[None, :, :] == candidates[:, None, None], axis=2)
    occluded = inside & ~incident & (hit < depth[candidates][:, None] - tol)
    return ~np.any(occluded, axis=1)

def occluding_boundary(model: ShapeModel, alpha, camera: Union[OrthoPose, PerspCamera],
                       topology: Optional[MeshTopology] = None) -> BoundarySet:
    topology = topology or model.topology
    if topology is None:
        raise InvalidArgumentError("occluding boundary needs a triangulated model")
    perspective = isinstance(camera, PerspCamera)
    X = _camera_frame(synthesize_vertices(model, alpha), camera)
    candidates = silhouette_candidates(X, topology, perspective)
    keep = visible(X, topology.triangles, candidates, perspective)
    return BoundarySet(vertex_indices=candidates[keep])

def render_contour_edges(model: ShapeModel, alpha, camera: Union[OrthoPose, PerspCamera],
                         width: int, height: int, spacing: float = 0.5) -> EdgeMap:
    '''
    Rasterise the visible occluding edges of a shape into an edge map
    (segments sampled every `spacing` pixels and rounded).
    '''
    topology = model.topology
    if topology is None:
        raise InvalidArgumentError("contour rendering needs a triangulated model")
    perspective = isinstance(camera, PerspCamera)
    vertices = synthesize_vertices(model, alpha)
    X = _camera_frame(vertices, camera)
    boundary = set(occluding_boundary(model, alpha, camera).vertex_indices.tolist())
    segments = [(a, b) for a, b in occluding_edges(X, topology, perspective) if a in boundary and b in boundary]
    if not segments:
        return EdgeMap.empty(width, height)
    image = project_points(vertices, camera)
    samples = []
    for a, b in segments:
        n = max(2, int(np.ceil(np.linalg.norm(image[b] - image[a]) / spacing)) + 1)
        t = np.linspace(0.0, 1.0, n)[:, None]
        samples.append(image[a] + t * (image[b] - image[a]))
    pixels = np.rint(np.vstack(samples)).astype(np.int64)
    inside = (pixels[:, 0] >= 0) & (pixels[:, 0] < width) & (pixels[:, 1] >= 0) & (pixels[:, 1] < height)
    return EdgeMap(pixels=pixels[inside], width=width, height=height)

def mutual_nearest_pairs(points: np.ndarray, vertex_ids: Sequence[int], edges: EdgeMap,
                         percentile: Optional[float] = None, max_distance: Optional[float] = None) -> Correspondences:
    '''
    Pairs (vertex, pixel) where each is the other's nearest neighbour in the image,
    then optionally drops pairs beyond an absolute distance or a distance percentile.
    '''
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    ids = np.asarray(vertex_ids, dtype=np.int64).ravel()
    if points.shape[0] == 0 or edges.count == 0:
        return Correspondences(vertex_indices=[], pixels=np.zeros((0, 2)), distances=[])

    pixels = edges.pixels.astype(float)
    distance, nearest_pixel = cKDTree(pixels).query(points)
    _, nearest_vertex = cKDTree(points).query(pixels[nearest_pixel])
    mutual = nearest_vertex == np.arange(points.shape[0])

    keep = mutual.copy()
    if max_distance is not None:
        keep &= distance <= max_distance
    if percentile is not None and np.count_nonzero(keep) > 1:
        keep &= distance <= np.percentile(distance[keep], percentile)
    return Correspondences(vertex_indices=ids[keep], pixels=pixels[nearest_pixel[keep]], distances=distance[keep])

def _warm_config(config: ContourFitConfig, result: FitResult):
    pose = result.pose
    update = {"init_rotation": tuple(pose.r.tolist()), "restarts": False}
    if isinstance(pose, OrthoPose):
        update["init_scale"] = pose.s
    else:
        update.update(init_scale=pose.f / pose.t_z, init_focal=pose.f, init_distance=pose.t_z)
    return config.landmark_fit.copy(update=update)

def contour_correspondences(model: ShapeModel, result: FitResult, landmarks: Landmarks2D, edges: EdgeMap,
                            config: ContourFitConfig) -> Correspondences:
    boundary = occluding_boundary(model, result.alpha, result.pose)
    ids = np.setdiff1d(boundary.vertex_indices, landmarks.vertex_indices)
    vertices = synthesize_vertices(model, result.alpha)
    projected = project_points(vertices[ids], result.pose, ids) if ids.size else np.zeros((0, 2))
    return mutual_nearest_pairs(projected, ids, edges, config.percentile, config.max_distance)

def fit_contours(model: ShapeModel, landmarks: Landmarks2D, edges: EdgeMap,
                 config: Optional[ContourFitConfig] = None, camera_kind: str = "persp") -> FitResult:
    '''
    Landmark fit followed by rounds of boundary extraction, correspondence and
    refitting. The original landmarks are kept in every round.
    '''
    config = config or ContourFitConfig()
    initial = fit_landmarks(model, landmarks, camera_kind, config.landmark_fit)
    if config.max_rounds == 0:
        return initial

    result = initial

    round_objectives: List[float] = [result.objective]
    previous: Optional[set] = None
    rounds = 0
    for rounds in range(1, config.max_rounds + 1):
        correspondences = contour_correspondences(model, result, landmarks, edges, config)
        if correspondences.count == 0:
            logger.warning(f"No contour correspondences in round {rounds}; returning the landmark-only fit")
            return initial.copy(update={"flags": initial.flags + [FLAG_NO_CORRESPONDENCES]})

        combined = landmarks.extended(correspondences.vertex_indices, correspondences.pixels)
        result = fit_landmarks(model, combined, camera_kind, _warm_config(config, result))
        round_objectives.append(result.objective)
        logger.debug(f"Contour round {rounds}: {correspondences.count} pairs, objective={result.objective:.6e}")

        pairs = correspondences.pairs()
        if previous is not None and len(pairs ^ previous) < config.stability * max(len(pairs), 1):
            break
        previous = pairs

    if any(b > a for a, b in zip(round_objectives, round_objectives[1:])):
        logger.info("Contour objective increased between rounds (correspondences changed)")
    return result.copy(update={"rounds": rounds, "round_objectives": round_objectives})
