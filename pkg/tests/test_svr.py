import numpy as np
import pytest

from dayahead.errors import ConfigError, SolverError
from dayahead.numkernel import RngState
from dayahead.svr import svr_fit


def test_flat_solution_when_everything_inside_tube():
    rng = RngState(0)
    X = rng.normal(size=(10, 3))
    y = 5.0 + rng.uniform(-0.05, 0.05, size=10)
    model = svr_fit(X, y, C=10.0, epsilon=0.2)
    assert np.all(model.w == 0.0)
    assert model.slack_upper.sum() + model.slack_lower.sum() == 0.0
    assert abs(model.b - 5.0) < 0.06


def test_exact_line_shrinks_to_tube_edge():
    x = np.linspace(-1, 1, 20)[:, None]
    y = 2.0 * x[:, 0]
    model = svr_fit(x, y, C=1000.0, epsilon=0.1)
    # minimal-norm weight keeping all points inside the tube: |2 - w| <= 0.1
    assert model.w[0] == pytest.approx(1.9, abs=1e-4)
    assert np.max(np.abs(y - model.predict(x))) <= 0.1 + 1e-8


def test_zero_cost_weight_is_zero():
    rng = RngState(1)
    X = rng.normal(size=(12, 2))
    y = rng.normal(size=12) * 10
    model = svr_fit(X, y, C=0.0, epsilon=0.1)
    assert np.all(model.w == 0.0)


def test_slack_matches_tube_violations():
    rng = RngState(2)
    X = rng.normal(size=(30, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 0.3 * rng.normal(size=30)
    model = svr_fit(X, y, C=2.0, epsilon=0.1)
    resid = np.abs(y - model.predict(X))
    assert np.all(resid <= model.epsilon + model.slack_upper + model.slack_lower + 1e-9)
    assert np.all(model.slack_upper >= 0) and np.all(model.slack_lower >= 0)


def test_dual_coefficients_box_and_balance():
    rng = RngState(3)
    X = rng.normal(size=(25, 2))
    y = X @ np.array([2.0, 1.0]) + 0.2 * rng.normal(size=25)
    C = 1.5
    model = svr_fit(X, y, C=C, epsilon=0.05)
    assert np.all(np.abs(model.dual_coef) <= C + 1e-12)
    assert abs(model.dual_coef.sum()) < 1e-10
    assert np.allclose(X.T @ model.dual_coef, model.w)


def test_deterministic():
    rng = RngState(4)
    X = rng.normal(size=(20, 2))
    y = rng.normal(size=20)
    a = svr_fit(X, y, C=1.0, epsilon=0.1)
    b = svr_fit(X, y, C=1.0, epsilon=0.1)
    assert np.array_equal(a.w, b.w) and a.b == b.b


def test_iteration_cap_raises_with_residual():
    rng = RngState(5)
    X = rng.normal(size=(40, 3))
    y = X @ np.array([3.0, -1.0, 2.0]) + rng.normal(size=40)
    with pytest.raises(SolverError) as err:
        svr_fit(X, y, C=100.0, epsilon=0.01, max_iter=3)
    assert err.value.residual is not None and err.value.residual > 0


def test_input_validation():
    with pytest.raises(ConfigError):
        svr_fit(np.ones((3, 2)), np.ones(4), C=1.0, epsilon=0.1)
    with pytest.raises(ConfigError):
        svr_fit(np.ones((3, 2)), np.ones(3), C=-1.0, epsilon=0.1)
