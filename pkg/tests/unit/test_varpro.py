import numpy as np
from numpy.testing import assert_allclose

from core.optim.least_squares import finite_difference_jacobian
from core.optim.varpro import projected_jacobian, projected_residual, pseudoinverse, regularize, solve_linear

def test_solve_linear_matches_normal_equations(rng):
    A = rng.standard_normal((12, 5))
    b = rng.standard_normal(12)
    sigma = np.array([2.0, 1.0, 0.5])
    weight = 0.3
    solution = solve_linear(A, b, sigma, weight)

    prior = np.diag(np.concatenate([weight / sigma ** 2, np.zeros(2)]))
    expected = np.linalg.solve(A.T @ A + prior, A.T @ b)
    assert_allclose(np.concatenate([solution.alpha, solution.translation]), expected, atol=1e-10)
    assert not solution.rank_deficient

def test_solve_linear_reports_rank_deficiency(rng):
    A = rng.standard_normal((8, 3))
    A = np.column_stack([A, A[:, 0]])
    solution = solve_linear(A, rng.standard_normal(8), np.ones(2))
    assert solution.rank_deficient

def test_regularization_removes_rank_deficiency_in_shape_columns(rng):
    A = rng.standard_normal((8, 3))
    A[:, 1] = A[:, 0]
    assert not solve_linear(A, rng.standard_normal(8), np.ones(2), tikhonov_weight=1e-2).rank_deficient

def test_regularize_appends_prior_rows():
    M, v = regularize(np.ones((4, 3)), np.ones(4), 2, 4.0, np.array([1.0, 2.0]))
    assert M.shape == (6, 3)
    assert_allclose(M[4:], [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert_allclose(v[4:], [0.0, 0.0])

def test_pseudoinverse_of_zero_matrix():
    pinv, rank = pseudoinverse(np.zeros((3, 2)))
    assert rank == 0
    assert_allclose(pinv, np.zeros((2, 3)))

def test_projected_residual_is_orthogonal_to_range(rng):
    M = rng.standard_normal((10, 4))
    v = rng.standard_normal(10)
    pinv, _ = pseudoinverse(M)
    d = projected_residual(M, v, pinv)
    assert_allclose(M.T @ d, np.zeros(4), atol=1e-10)

def test_projected_jacobian_matches_finite_differences(rng):
    M0, M1 = rng.standard_normal((2, 10, 4))
    v0, v1 = rng.standard_normal((2, 10))

    def residual(x):
        M = M0 + x[0] * M1 + x[1] ** 2 * M0
        v = v0 + x[1] * v1
        return projected_residual(M, v, pseudoinverse(M)[0])

    x = np.array([0.3, -0.4])
    M = M0 + x[0] * M1 + x[1] ** 2 * M0
    v = v0 + x[1] * v1
    analytic = projected_jacobian(M, [M1, 2 * x[1] * M0], v, [np.zeros(10), v1], pseudoinverse(M)[0])
    assert_allclose(analytic, finite_difference_jacobian(residual, x), atol=1e-6)
