import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradkit.fitting import (FitError, covariance_from_jacobian, levenberg_marquardt,
                             numerical_jacobian)


def test_linear_problem_matches_lstsq():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(40, 3))
    y = A @ [1.0, -2.0, 0.5] + rng.normal(scale=0.1, size=40)
    out = levenberg_marquardt(lambda q: A @ q - y, np.zeros(3))
    ref = np.linalg.lstsq(A, y, rcond=None)[0]
    assert np.allclose(out.x, ref, atol=1e-8)
    cov, degenerate = covariance_from_jacobian(out.jac)
    assert not degenerate
    assert np.allclose(cov, np.linalg.inv(A.T @ A), rtol=1e-6)


def test_rosenbrock_residuals():
    out = levenberg_marquardt(lambda q: np.array([10 * (q[1] - q[0] ** 2), 1 - q[0]]),
                              [-1.2, 1.0])
    assert np.allclose(out.x, [1.0, 1.0], atol=1e-8)


def test_degenerate_flag():
    out = levenberg_marquardt(lambda q: np.array([q[0] + q[1] - 1.0, 2 * (q[0] + q[1]) - 2.0]),
                              [0.0, 0.0])
    _, degenerate = covariance_from_jacobian(out.jac)
    assert degenerate


def test_iteration_limit_raises_with_best():
    with pytest.raises(FitError) as exc:
        levenberg_marquardt(lambda q: np.array([10 * (q[1] - q[0] ** 2), 1 - q[0]]),
                            [-1.2, 1.0], max_iter=2)
    assert exc.value.best is not None


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 5))
def test_jacobian_of_exponential(a, b):
    t = np.linspace(0, 1, 7)
    J = numerical_jacobian(lambda q: q[0] * np.exp(-q[1] * t), np.array([a, b]))
    exact = np.column_stack([np.exp(-b * t), -a * t * np.exp(-b * t)])
    assert np.allclose(J, exact, atol=1e-6)
