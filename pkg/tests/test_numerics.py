import numpy as np
import pytest

from triceptnn.exceptions import InvalidArgumentError, NumericalError, ShapeError
from triceptnn.numerics import finite_difference_jacobian, least_squares, matmul, solve_spd


def triple_loop(A, B):
    out = [[0.0] * len(B[0]) for _ in A]
    for i in range(len(A)):
        for j in range(len(B[0])):
            for k in range(len(B)):
                out[i][j] += A[i][k] * B[k][j]
    return np.array(out)


def test_matmul_identity_and_zero():
    A = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(matmul(np.eye(2), A), A)
    assert np.array_equal(matmul(A, np.zeros((3, 4))), np.zeros((2, 4)))


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(1)
    A, B = rng.normal(size=(2, 3)), rng.normal(size=(3, 2))
    np.testing.assert_allclose(matmul(A, B), triple_loop(A.tolist(), B.tolist()), atol=1e-12)


def test_matmul_associative():
    rng = np.random.default_rng(2)
    for _ in range(20):
        A, B, C = rng.normal(size=(4, 5)), rng.normal(size=(5, 3)), rng.normal(size=(3, 6))
        left, right = matmul(matmul(A, B), C), matmul(A, matmul(B, C))
        assert np.linalg.norm(left - right) <= 1e-9 * np.linalg.norm(left)


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_solve_spd_small_cases():
    b = np.array([1.5, -2.0, 0.25])
    np.testing.assert_allclose(solve_spd(np.eye(3), b), b)
    np.testing.assert_allclose(solve_spd(np.diag([4.0, 9.0]), np.array([8.0, 27.0])), [2.0, 3.0])


def test_solve_spd_residual():
    rng = np.random.default_rng(3)
    for n in (2, 5, 26):
        M = rng.normal(size=(n, n))
        A = M.T @ M + np.eye(n)
        b = rng.normal(size=n)
        x = solve_spd(A, b)
        assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_solve_spd_jitter_is_applied():
    A = np.diag([1.0, 2.0])
    x = solve_spd(A, np.array([1.0, 1.0]), jitter=1.0)
    np.testing.assert_allclose(x, [0.5, 1.0 / 3.0])


def test_solve_spd_rescues_semidefinite():
    v = np.array([1.0, 2.0, 3.0])
    A = np.outer(v, v)  # rank one
    x = solve_spd(A, v)
    assert np.all(np.isfinite(x))


def test_solve_spd_rejects_indefinite():
    with pytest.raises(NumericalError):
        solve_spd(np.diag([1.0, -5.0]), np.ones(2))


def test_solve_spd_rejects_asymmetric():
    with pytest.raises(InvalidArgumentError):
        solve_spd(np.array([[2.0, 1.0], [0.0, 2.0]]), np.ones(2))


def test_least_squares_square_and_consistent():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    B = rng.normal(size=(4, 2))
    assert np.linalg.norm(A @ least_squares(A, B) - B) <= 1e-10
    A = rng.normal(size=(30, 5))
    X0 = rng.normal(size=(5, 3))
    X = least_squares(A, A @ X0)
    assert np.linalg.norm(X - X0) <= 1e-9 * np.linalg.norm(X0)


def test_least_squares_normal_equation_residual():
    rng = np.random.default_rng(5)
    A, B = rng.normal(size=(50, 6)), rng.normal(size=(50, 2))
    X = least_squares(A, B)
    assert np.linalg.norm(A.T @ (A @ X - B)) <= 1e-8 * np.linalg.norm(A) * np.linalg.norm(B)


def test_least_squares_vector_rhs_and_badly_scaled_columns():
    rng = np.random.default_rng(6)
    A = rng.normal(size=(20, 3)) * np.array([1e-6, 1.0, 1e6])
    x0 = np.array([3.0, -1.0, 2e-6])
    x = least_squares(A, A @ x0)
    assert x.shape == (3,)
    np.testing.assert_allclose(x, x0, rtol=1e-8)


def test_least_squares_underdetermined_rejected():
    with pytest.raises(ShapeError):
        least_squares(np.ones((2, 3)), np.ones(2))


def test_fd_jacobian_linear_and_quadratic():
    M = np.array([[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]])
    np.testing.assert_allclose(finite_difference_jacobian(lambda x: M @ x, np.ones(3)), M, atol=1e-10)
    J = finite_difference_jacobian(lambda x: x**2, np.array([3.0]), h=1e-5)
    assert abs(J[0, 0] - 6.0) <= 1e-9


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_fd_jacobian_non_finite():
    with pytest.raises(NumericalError):
        finite_difference_jacobian(lambda x: np.log(x), np.array([1e-9]), h=1e-6)
