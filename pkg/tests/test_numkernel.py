import numpy as np
import pytest

from dayahead.errors import ShapeError
from dayahead.numkernel import RngState, activate, as_matrix, least_squares, matmul, sigmoid


def test_matmul_identity():
    m = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(matmul(np.eye(2), m), m)


def test_matmul_hand_product():
    out = matmul([[1.0, 2.0], [3.0, 4.0]], [[5.0], [6.0]])
    assert out.tolist() == [[17.0], [39.0]]


def test_matmul_zero():
    z = np.zeros((2, 2))
    out = matmul(z, np.ones((2, 5)))
    assert np.all(out == 0)


def test_matmul_dimension_mismatch():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_rejects_nonfinite():
    with pytest.raises(ShapeError):
        matmul([[np.inf, 1.0]], [[1.0], [1.0]])


def test_matmul_associative_within_tolerance():
    rng = RngState(4)
    for _ in range(20):
        a, b, c = (rng.normal(size=(5, 5)) for _ in range(3))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        scale = np.abs(left).max() + 1e-30
        assert np.abs(left - right).max() / scale < 1e-10


def test_least_squares_identity():
    v = np.array([3.0, -1.0])
    assert np.allclose(least_squares(np.eye(2), v), v)


def test_least_squares_exact_line():
    beta = least_squares([[1.0], [2.0], [3.0]], [2.0, 4.0, 6.0])
    assert beta == pytest.approx([2.0])


def test_least_squares_mean():
    beta = least_squares([[1.0], [1.0]], [1.0, 3.0])
    assert beta == pytest.approx([2.0])


def test_least_squares_rank_deficient_minimum_norm():
    # duplicated column: the minimum-norm solution splits the weight evenly
    a = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    beta = least_squares(a, np.array([2.0, 4.0, 6.0]))
    assert beta == pytest.approx([1.0, 1.0])


def test_least_squares_residual_orthogonal_to_columns():
    rng = RngState(11)
    for _ in range(10):
        a = rng.normal(size=(20, 4))
        y = rng.normal(size=20)
        beta = least_squares(a, y)
        resid = y - a @ beta
        assert np.abs(a.T @ resid).max() < 1e-8


def test_activations():
    assert activate([0.0], "sigmoid")[0] == pytest.approx(0.5)
    assert activate([0.0], "tanh")[0] == 0.0
    big = activate([1000.0], "sigmoid")[0]
    assert big == pytest.approx(1.0) and np.isfinite(big)
    assert np.isfinite(sigmoid(np.array([-1000.0]))).all()
    out = activate(np.linspace(-5, 5, 11), "tanh")
    assert np.all(out > -1) and np.all(out < 1)


def test_activate_unknown_kind():
    with pytest.raises(ShapeError):
        activate([0.0], "relu6")


def test_as_matrix_validates():
    with pytest.raises(ShapeError):
        as_matrix([1.0, 2.0, 3.0])


def test_rng_reproducible_byte_identical():
    a = RngState(42).uniform(size=256)
    b = RngState(42).uniform(size=256)
    assert a.tobytes() == b.tobytes()
    na = RngState(42).normal(size=99)
    nb = RngState(42).normal(size=99)
    assert na.tobytes() == nb.tobytes()


def test_rng_children_are_independent_streams():
    root = RngState(7)
    c0 = root.child(0).uniform(size=50)
    c1 = root.child(1).uniform(size=50)
    again = RngState(7).child(0).uniform(size=50)
    assert not np.array_equal(c0, c1)
    assert np.array_equal(c0, again)


def test_rng_child_path_nesting():
    assert np.array_equal(
        RngState(3).child(1).child(2).normal(size=8),
        RngState(3).child(1).child(2).normal(size=8),
    )
