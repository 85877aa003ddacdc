'''
Deterministic face-like shape models for desk-scale experiments.

The mean is an elliptical patch of a half-ellipsoid facing the camera (-w),
with a nose and two shallow eye sockets. Basis columns are orthonormal smooth
deformation fields: depth-coupled width/height (first and second order in
depth) and a nose field first, then seeded combinations of polynomial and
radial bump fields. Every column is kept orthogonal to the mean and to the
rigid motions of the patch, so no shape coefficient can reproduce a change
of scale, translation or rotation.
'''
from typing import List, Sequence

import numpy as np
from scipy.spatial import Delaunay

from core.models.shape_model import MeshTopology, ShapeModel
from utils.errors import InvalidArgumentError
from utils.logger import get_logger

logger = get_logger(__name__)

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
SIGMA_RMS_FRACTION = 0.04  # RMS vertex displacement of the first mode at 1 sigma, as a fraction of scale
SIGMA_DECAY = 0.75

def face_patch(n_vertices: int, scale: float):
    '''Vertex positions (N, 3) and consistently wound triangles of the mean face.'''
    a, b = 0.42 * scale, 0.5 * scale
    k = np.arange(n_vertices)
    rho = np.sqrt((k + 0.5) / n_vertices)
    phi = k * GOLDEN_ANGLE
    u, v = a * rho * np.cos(phi), b * rho * np.sin(phi)

    depth = 0.5 * scale * np.sqrt(np.clip(1.0 - rho ** 2, 0.0, None))
    nose = 0.18 * scale * np.exp(-(u ** 2 + (v - 0.05 * scale) ** 2) / (2 * (0.08 * scale) ** 2))
    sockets = sum(0.03 * scale * np.exp(-((u - ex) ** 2 + (v + 0.12 * scale) ** 2) / (2 * (0.05 * scale) ** 2))
                  for ex in (-0.15 * scale, 0.15 * scale))
    w = -(depth + nose) + sockets
    w = w - w.mean()

    triangles = Delaunay(np.column_stack([u, v])).simplices.astype(np.int64)
    p0, p1, p2 = (np.column_stack([u, v])[triangles[:, j]] for j in range(3))
    signed = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    flip = signed < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return np.column_stack([u, v, w]), triangles

def _field(components) -> np.ndarray:
    return np.column_stack(components).ravel()

def _similarity_fields(verts: np.ndarray) -> List[np.ndarray]:
    '''The mean itself (global scale), then translations and infinitesimal rotations.'''
    u, v, w = verts[:, 0], verts[:, 1], verts[:, 2]
    zero, one = np.zeros_like(u), np.ones_like(u)
    return [
        verts.ravel(),
        _field([one, zero, zero]),
        _field([zero, one, zero]),
        _field([zero, zero, one]),
        _field([zero, -w, v]),
        _field([w, zero, -u]),
        _field([-v, u, zero]),
    ]

def _candidate_fields(verts: np.ndarray, scale: float, rng: np.random.Generator, count: int) -> List[np.ndarray]:
    u, v, w = (verts[:, j] / scale for j in range(3))
    zero = np.zeros_like(u)
    nose = np.exp(-(u ** 2 + (v - 0.05) ** 2) / (2 * 0.08 ** 2))
    fields = [
        _field([u * w, v * w, zero]),
        _field([u * nose, v * nose, nose]),
        _field([u * w ** 2, v * w ** 2, zero]),
    ]
    monomials = [u ** p * v ** q for p in range(4) for q in range(4 - p) if p + q > 0]
    while len(fields) < count:
        mix = rng.standard_normal((3, len(monomials))) / np.sqrt(len(monomials))
        c = rng.uniform([-0.4, -0.5], [0.4, 0.5])
        width = rng.uniform(0.08, 0.25)
        bump = np.exp(-((u - c[0]) ** 2 + (v - c[1]) ** 2) / (2 * width ** 2))
        comps = [np.column_stack(monomials) @ mix[j] + rng.standard_normal() * bump for j in range(3)]
        fields.append(_field(comps))
    return fields

def _orthonormal_columns(candidates: List[np.ndarray], n_modes: int, rng: np.random.Generator,
                         excluded: Sequence[np.ndarray] = ()) -> np.ndarray:
    '''
    Order-preserving Gram-Schmidt (two passes), skipping dependent candidates.
    The excluded directions are projected out of every column but are not returned.
    '''
    dim = candidates[0].size
    span: List[np.ndarray] = []
    basis: List[np.ndarray] = []

    def take(vec):
        for _ in range(2):
            for q in span:
                vec = vec - (q @ vec) * q
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 1e-8 else None

    for vec in excluded:
        q = take(vec / max(np.linalg.norm(vec), 1e-300))
        if q is not None:
            span.append(q)

    pool = iter(candidates)
    while len(basis) < n_modes:
        vec = next(pool, None)
        if vec is None:
            vec = rng.standard_normal(dim)
        q = take(vec / max(np.linalg.norm(vec), 1e-300))
        if q is not None:
            span.append(q)
            basis.append(q)
    return np.column_stack(basis)

def _landmarks(verts: np.ndarray, scale: float, count: int) -> np.ndarray:
    '''Eye centres first, then farthest-point samples over the patch.'''
    uv = verts[:, :2]
    chosen: List[int] = []
    for eye in ((-0.15 * scale, -0.12 * scale), (0.15 * scale, -0.12 * scale)):
        order = np.argsort(np.linalg.norm(uv - np.array(eye), axis=1))
        chosen.append(int(next(i for i in order if int(i) not in chosen)))
    dist = np.min(np.linalg.norm(uv[:, None, :] - uv[chosen][None, :, :], axis=2), axis=1)
    while len(chosen) < count:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(uv - uv[nxt], axis=1))
    return np.array(chosen[:count], dtype=np.int64)

def make_synthetic_model(seed: int, n_vertices: int, n_modes: int, scale: float = 0.16,
                         n_landmarks: int = 20) -> ShapeModel:
    if n_vertices < 4:
        raise InvalidArgumentError(f"need at least 4 vertices, got {n_vertices}")
    if n_modes < 1:
        raise InvalidArgumentError(f"need at least one mode, got {n_modes}")
    if n_modes > 3 * n_vertices:
        raise InvalidArgumentError(f"{n_modes} modes exceed 3N = {3 * n_vertices}")
    if scale <= 0:
        raise InvalidArgumentError("scale must be positive")

    rng = np.random.default_rng(seed)
    verts, triangles = face_patch(n_vertices, scale)
    # keep as many of the similarity directions out of the span as the mode count leaves room for
    excluded = _similarity_fields(verts)[:max(3 * n_vertices - n_modes, 0)]
    basis = _orthonormal_columns(_candidate_fields(verts, scale, rng, n_modes), n_modes, rng, excluded)
    signs = np.where(rng.random(n_modes) < 0.5, -1.0, 1.0)
    basis = basis * signs
    sigma = SIGMA_RMS_FRACTION * scale * np.sqrt(n_vertices) * SIGMA_DECAY ** np.arange(n_modes)
    landmarks = _landmarks(verts, scale, min(max(n_landmarks, 2), n_vertices))

    logger.debug(f"Synthetic model: seed={seed} N={n_vertices} S={n_modes} triangles={len(triangles)}")
    return ShapeModel(
        mean=verts.ravel(),
        basis=basis,
        sigma=sigma,
        topology=MeshTopology(triangles=triangles),
        landmark_indices=landmarks,
    )
