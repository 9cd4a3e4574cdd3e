import numpy as np
import pytest

from eh_sched.linalg import PIVOT_TOL, SingularMatrixError, solve_dense_linear


def test_identity_returns_rhs():
    b = np.array([0.3, -1.0, 2.5])
    assert np.array_equal(solve_dense_linear(np.eye(3), b), b)


def test_diagonal():
    x = solve_dense_linear(np.array([[2.0, 0.0], [0.0, 4.0]]), np.array([1.0, 1.0]))
    assert np.allclose(x, [0.5, 0.25], atol=0, rtol=1e-15)


def test_row_vector_convention():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([5.0, 6.0])
    x = solve_dense_linear(A, b)
    assert np.allclose(x @ A, b, atol=1e-14)
    assert not np.allclose(A @ x, b)


def test_random_well_conditioned(rng):
    A = rng.normal(size=(50, 50)) + 50 * np.eye(50)
    b = rng.normal(size=50)
    x = solve_dense_linear(A, b)
    assert np.abs(x @ A - b).max() <= 1e-9 * np.abs(b).max()


def test_singular_reports_column():
    A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]).T
    with pytest.raises(SingularMatrixError) as err:
        solve_dense_linear(A, np.ones(3), context="demo")
    assert err.value.column == 1
    assert err.value.pivot < PIVOT_TOL
    assert "column 1" in str(err.value) and "demo" in str(err.value)


def test_singular_is_a_linalg_error():
    with pytest.raises(np.linalg.LinAlgError):
        solve_dense_linear(np.zeros((2, 2)), np.ones(2))


@pytest.mark.parametrize(
    "A,b",
    [(np.ones((2, 3)), np.ones(2)), (np.eye(2), np.ones(3)), (np.ones(4), np.ones(2))],
)
def test_shape_errors(A, b):
    with pytest.raises(ValueError):
        solve_dense_linear(A, b)
