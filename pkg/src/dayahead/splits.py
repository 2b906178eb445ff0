"""Chronological data division, walk-forward fold schedules, and windowing.

The initial division is 80-10-10 by floor rule with the remainder going
to the test block. Walk-forward folds then roll the test block forward
one step at a time: each fold trains on all rows before its validation
block, validates on the fixed-length block immediately preceding the
test block, and tests on the next block. Validation and test lengths
stay anchored while the training set expands.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .dataio import TimeSeriesTable


@dataclass(frozen=True)
class Fold:
    train: tuple[int, int]
    validation: tuple[int, int]
    test: tuple[int, int]


@dataclass(frozen=True)
class SplitPlan:
    folds: tuple[Fold, ...]

    def to_json(self) -> str:
        payload = {
            "folds": [
                {"train": list(f.train), "val": list(f.validation), "test": list(f.test)}
                for f in self.folds
            ]
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        payload = json.loads(text)
        return cls(
            tuple(
                Fold(tuple(f["train"]), tuple(f["val"]), tuple(f["test"]))
                for f in payload["folds"]
            )
        )


def initial_division(n_rows: int) -> dict[str, tuple[int, int]]:
    """80-10-10 contiguous chronological split; remainder goes to test."""
    if n_rows < 50:
        raise ConfigError(f"need at least 50 rows for a meaningful split, got {n_rows}")
    n_train = int(0.8 * n_rows)
    n_val = int(0.1 * n_rows)
    return {
        "train": (0, n_train),
        "validation": (n_train, n_train + n_val),
        "test": (n_train + n_val, n_rows),
    }


def walk_forward_folds(n_rows: int, val_len: int | None = None, test_len: int = 1) -> SplitPlan:
    """Walk-forward schedule anchored at the 80-10-10 division.

    Fold k tests the block starting test_len*k rows after the initial
    test boundary; its validation block is the val_len rows immediately
    before, and it trains on everything earlier. The final block is
    truncated if test_len does not divide the test region.
    """
    division = initial_division(n_rows)
    if val_len is None:
        val_len = division["validation"][1] - division["validation"][0]
    if val_len < 1 or test_len < 1:
        raise ConfigError("val_len and test_len must be >= 1")
    first_test = int(0.8 * n_rows) + val_len
    if first_test <= val_len or first_test >= n_rows:
        raise ConfigError(
            f"no room for walk-forward folds: n_rows={n_rows}, val_len={val_len}"
        )
    folds = []
    lo = first_test
    while lo < n_rows:
        hi = min(lo + test_len, n_rows)
        folds.append(Fold(train=(0, lo - val_len), validation=(lo - val_len, lo), test=(lo, hi)))
        lo = hi
    return SplitPlan(tuple(folds))


@dataclass
class WindowedDataset:
    """Fixed-length input windows with next-day targets.

    inputs[i] covers rows [target_rows[i] - window, target_rows[i]) so no
    window ever overlaps its own target's timestamp.
    """

    inputs: np.ndarray  # (n, window, n_features)
    targets: np.ndarray  # (n,)
    target_rows: np.ndarray  # (n,) row index of each target in the source table

    def __len__(self) -> int:
        return len(self.targets)

    def subset(self, row_lo: int, row_hi: int) -> "WindowedDataset":
        """Samples whose target row falls in [row_lo, row_hi)."""
        keep = (self.target_rows >= row_lo) & (self.target_rows < row_hi)
        return WindowedDataset(self.inputs[keep], self.targets[keep], self.target_rows[keep])


def windowize(table: TimeSeriesTable, features=None, window: int = 14) -> WindowedDataset:
    """Cut a daily table into (window x n_features) inputs with day-after targets."""
    if table.granularity != "daily":
        raise ConfigError("windowize expects a daily table")
    if window < 1:
        raise ConfigError("window must be >= 1")
    if table.n_rows <= window:
        raise ConfigError(f"table with {table.n_rows} rows cannot host window {window}")
    X = table.feature_matrix(features)
    y = table.target()
    n = table.n_rows - window
    inputs = np.empty((n, window, X.shape[1]))
    for i in range(n):
        inputs[i] = X[i : i + window]
    return WindowedDataset(inputs, y[window:].copy(), np.arange(window, table.n_rows))
