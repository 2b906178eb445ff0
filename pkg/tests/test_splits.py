import numpy as np
import pytest

from dayahead import dataio, splits
from dayahead.errors import ConfigError
from dayahead.numkernel import RngState


def test_initial_division_exact():
    d = splits.initial_division(100)
    assert d == {"train": (0, 80), "validation": (80, 90), "test": (90, 100)}


def test_initial_division_floor_rule():
    d = splits.initial_division(101)
    assert d == {"train": (0, 80), "validation": (80, 90), "test": (90, 101)}


def test_initial_division_too_small():
    with pytest.raises(ConfigError):
        splits.initial_division(10)


def test_walk_forward_matches_documented_roll():
    plan = splits.walk_forward_folds(100, val_len=10, test_len=1)
    f0, f1 = plan.folds[0], plan.folds[1]
    assert (f0.train, f0.validation, f0.test) == ((0, 80), (80, 90), (90, 91))
    assert (f1.train, f1.validation, f1.test) == ((0, 81), (81, 91), (91, 92))


def test_walk_forward_partitions_test_region():
    plan = splits.walk_forward_folds(107, val_len=9, test_len=3)
    seen = []
    for fold in plan.folds:
        seen.extend(range(*fold.test))
    first = plan.folds[0].test[0]
    assert seen == list(range(first, 107))
    assert len(seen) == len(set(seen))


def test_walk_forward_fold_internal_ordering():
    plan = splits.walk_forward_folds(120, val_len=12, test_len=2)
    for fold in plan.folds:
        assert fold.train[1] == fold.validation[0]
        assert fold.validation[1] == fold.test[0]
        assert fold.train[0] == 0


def test_walk_forward_anchored_lengths_and_monotone_train():
    plan = splits.walk_forward_folds(100, val_len=10, test_len=1)
    train_sizes = [f.train[1] - f.train[0] for f in plan.folds]
    val_sizes = {f.validation[1] - f.validation[0] for f in plan.folds}
    test_sizes = {f.test[1] - f.test[0] for f in plan.folds}
    assert train_sizes == sorted(train_sizes)
    assert val_sizes == {10}
    assert test_sizes == {1}


def test_walk_forward_requires_room():
    with pytest.raises(ConfigError):
        splits.walk_forward_folds(100, val_len=0)


def test_plan_json_round_trip():
    plan = splits.walk_forward_folds(90, val_len=9, test_len=2)
    again = splits.SplitPlan.from_json(plan.to_json())
    assert again == plan


def synthetic(days=80):
    return dataio.generate_synthetic(RngState(3), days)


def test_windowize_single_sample():
    table = synthetic(40).rows(0, 15)
    ds = splits.windowize(table, None, window=14)
    assert len(ds) == 1
    assert ds.inputs.shape == (1, 14, 62)
    assert ds.target_rows.tolist() == [14]


def test_windowize_masked_shape():
    table = synthetic(60)
    names = [f"F{i}" for i in range(1, 31)]
    ds = splits.windowize(table, names, window=14)
    assert ds.inputs.shape == (60 - 14, 14, 30)


def test_windowize_window_one():
    table = synthetic(40).rows(0, 3)
    ds = splits.windowize(table, ["F1"], window=1)
    assert len(ds) == 2
    assert ds.inputs[0, 0, 0] == table.columns["F1"][0]
    assert ds.targets[0] == table.target()[1]


def test_windowize_no_leakage():
    table = synthetic(50)
    ds = splits.windowize(table, None, window=7)
    X = table.feature_matrix()
    for i in range(len(ds)):
        t = ds.target_rows[i]
        assert np.array_equal(ds.inputs[i], X[t - 7 : t])
        assert ds.targets[i] == table.target()[t]


def test_windowize_window_too_long():
    table = synthetic(40).rows(0, 10)
    with pytest.raises(ConfigError):
        splits.windowize(table, None, window=10)


def test_windowed_subset_filters_by_target_row():
    table = synthetic(60)
    ds = splits.windowize(table, None, window=14)
    sub = ds.subset(20, 30)
    assert np.all((sub.target_rows >= 20) & (sub.target_rows < 30))
    assert len(sub) == 10
