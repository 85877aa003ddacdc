import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st
from numpy.testing import assert_allclose
from scipy.spatial.transform import Rotation

from core.analysis.metrics import (interocular_distance, landmark_distance, mean_displacement, procrustes_align,
                                   surface_distance)
from core.models.observations import Landmarks2D
from utils.errors import DegenerateConfigurationError, InvalidArgumentError

CLOUD = np.random.default_rng(3).standard_normal((30, 3))

@hypothesis_settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2 ** 32 - 1),
    scale=st.floats(0.1, 10.0),
    shift=st.tuples(*[st.floats(-5.0, 5.0)] * 3),
)
def test_procrustes_recovers_a_similarity(seed, scale, shift):
    R = Rotation.from_rotvec(np.random.default_rng(seed).uniform(-1.5, 1.5, 3)).as_matrix()
    target = scale * CLOUD @ R.T + np.array(shift)

    aligned, transform = procrustes_align(CLOUD, target)
    assert_allclose(aligned, target, atol=1e-8 * max(scale, 1.0))
    assert transform.scale == pytest.approx(scale, rel=1e-9)
    assert_allclose(transform.rotation, R, atol=1e-9)

def test_procrustes_never_reflects():
    mirrored = CLOUD * np.array([-1.0, 1.0, 1.0])
    _, transform = procrustes_align(CLOUD, mirrored)
    assert np.linalg.det(transform.rotation) == pytest.approx(1.0)

def test_rigid_alignment_keeps_unit_scale():
    _, transform = procrustes_align(CLOUD, 2.0 * CLOUD, with_scale=False)
    assert transform.scale == 1.0

def test_collinear_source_is_degenerate():
    line = np.outer(np.linspace(0, 1, 5), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateConfigurationError):
        procrustes_align(line, line)

def test_too_few_points_are_degenerate():
    with pytest.raises(DegenerateConfigurationError):
        procrustes_align(CLOUD[:2], CLOUD[:2])

def test_mismatched_vertex_counts_are_rejected():
    with pytest.raises(InvalidArgumentError):
        surface_distance(CLOUD, CLOUD[:10])

def test_surface_distance_ignores_similarity():
    R = Rotation.from_rotvec([0.3, -0.2, 0.9]).as_matrix()
    assert surface_distance(0.5 * CLOUD @ R.T + 1.0, CLOUD) < 1e-12

def test_surface_distance_of_a_local_bump():
    bumped = CLOUD.copy()
    bumped[0] += [0.0, 0.0, 0.3]
    assert 0 < surface_distance(bumped, CLOUD) < 0.3

def test_interocular_distance_from_observations():
    landmarks = Landmarks2D(vertex_indices=[4, 9, 2], points=[[0.0, 0.0], [3.0, 4.0], [1.0, 1.0]])
    assert interocular_distance(landmarks, (4, 9)) == 5.0

def test_interocular_distance_falls_back_to_fitted_eyes():
    landmarks = Landmarks2D(vertex_indices=[2], points=[[1.0, 1.0]])
    assert interocular_distance(landmarks, (4, 9), fallback=[[0.0, 0.0], [0.0, 2.0]]) == 2.0
    with pytest.raises(DegenerateConfigurationError):
        interocular_distance(landmarks, (4, 9))

def test_landmark_distance_is_percent_of_interocular():
    landmarks = Landmarks2D(vertex_indices=[0, 1], points=[[0.0, 0.0], [100.0, 0.0]])
    projected = np.array([[0.0, 1.0], [100.0, -3.0]])
    assert landmark_distance(landmarks, projected, 100.0) == pytest.approx(2.0)

def test_landmark_distance_needs_positive_interocular():
    landmarks = Landmarks2D(vertex_indices=[0, 1], points=[[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(DegenerateConfigurationError):
        landmark_distance(landmarks, landmarks.points, 0.0)

def test_mean_displacement():
    before = np.zeros((2, 3))
    after = np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 1.0]])
    assert mean_displacement(before, after) == pytest.approx(3.0)
    assert mean_displacement(np.zeros(4), [3.0, 4.0, 0.0, 0.0], dim=2) == pytest.approx(2.5)

def test_mean_displacement_accepts_flat_and_stacked_points():
    before = np.zeros(6)
    after = np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 1.0]])
    assert mean_displacement(before, after) == pytest.approx(3.0)
    assert mean_displacement(after, before) == pytest.approx(3.0)

def test_mean_displacement_rejects_different_point_counts():
    with pytest.raises(InvalidArgumentError):
        mean_displacement(np.zeros(9), np.zeros((2, 3)))
