"""Minimal numeric foundation: dense matrices, seeded RNG, activations, least squares.

Matrices are plain 2-D float64 numpy arrays (row-major). The helpers here
add the shape/finiteness checking the rest of the package relies on, and
a deterministic random stream with reproducible child streams.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def as_matrix(values, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Build a validated float64 matrix from nested sequences or an array."""
    a = np.asarray(values, dtype=np.float64)
    if rows is not None and cols is not None:
        a = a.reshape(rows, cols)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ShapeError("matrix entries must be finite")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with explicit dimension checking."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def least_squares(a, y) -> np.ndarray:
    """Solve min ||a b - y||_2; returns the minimum-norm solution when rank-deficient."""
    a = as_matrix(a)
    y = np.asarray(y, dtype=np.float64)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    if y.shape[0] != a.shape[0]:
        raise ShapeError(f"row mismatch: a has {a.shape[0]} rows, y has {y.shape[0]}")
    beta, _, _, _ = np.linalg.lstsq(a, y, rcond=None)
    return beta[:, 0] if squeeze else beta


def sigmoid(x):
    """Numerically stable logistic function, output in (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activate(x, kind: str):
    """Elementwise activation: 'sigmoid' into (0,1) or 'tanh' into (-1,1)."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    raise ShapeError(f"unknown activation kind {kind!r}")


class RngState:
    """Deterministic random stream.

    Backed by PCG64 keyed by (seed, spawn path), so the same seed always
    reproduces the same draw sequence and child streams are independent
    and reproducible. Single-owner: parallel consumers should each hold
    their own child().
    """

    def __init__(self, seed: int, _path: tuple = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in _path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, key: int) -> "RngState":
        """Independent stream derived from this state's identity, not its position."""
        return RngState(self.seed, self.path + (key,))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = True) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def __repr__(self):
        return f"RngState(seed={self.seed}, path={self.path})"
