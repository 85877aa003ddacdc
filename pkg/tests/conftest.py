import numpy as np
import pytest

from core.geometry.synthetic import make_synthetic_model
from core.models.shape_model import MeshTopology, ShapeModel

# Hand-written N=4, S=2 model: a unit tetrahedron-like patch
TOY_MEAN = np.array([
    0.0, 0.0, 0.0,
    0.1, 0.0, 0.01,
    0.0, 0.1, 0.02,
    0.1, 0.1, -0.03,
])
TOY_BASIS = np.array([
    [1.0, 0.0], [0.0, 0.5], [0.0, 0.0],
    [0.0, 1.0], [1.0, 0.0], [0.5, 0.0],
    [0.0, 0.0], [0.0, 1.0], [0.0, 0.5],
    [0.5, 0.0], [0.0, 0.0], [1.0, 1.0],
]) * 0.01
TOY_SIGMA = np.array([2.0, 1.0])
TOY_TRIANGLES = [[0, 1, 2], [1, 3, 2]]

@pytest.fixture
def toy_model() -> ShapeModel:
    return ShapeModel(
        mean=TOY_MEAN,
        basis=TOY_BASIS,
        sigma=TOY_SIGMA,
        topology=MeshTopology(triangles=TOY_TRIANGLES),
        landmark_indices=[0, 3],
    )

@pytest.fixture(scope="session")
def face_model() -> ShapeModel:
    '''Small seeded synthetic face (N=120, S=6, 20 landmarks).'''
    return make_synthetic_model(seed=7, n_vertices=120, n_modes=6, n_landmarks=20)

@pytest.fixture(scope="session")
def dense_face_model() -> ShapeModel:
    return make_synthetic_model(seed=11, n_vertices=300, n_modes=5, n_landmarks=20)

@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
