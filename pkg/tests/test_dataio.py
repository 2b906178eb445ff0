import math
from datetime import date, timedelta

import numpy as np
import pytest

from dayahead import dataio
from dayahead.errors import (
    ConfigError,
    IncompleteDayError,
    IncompleteSeriesError,
    OrderingError,
    ParseError,
    SchemaError,
)
from dayahead.numkernel import RngState


def daily_table(values_by_col, start=date(2020, 1, 1)):
    n = len(next(iter(values_by_col.values())))
    return dataio.TimeSeriesTable(
        [start + timedelta(days=i) for i in range(n)],
        {k: np.asarray(v, dtype=float) for k, v in values_by_col.items()},
        "daily",
    )


def write_daily_csv(path, rows, header=None):
    header = header or ",".join(dataio.DAILY_HEADER)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def make_daily_row(day, value):
    return day + "," + ",".join(str(value) for _ in range(63))


def test_load_csv_daily_three_rows(tmp_path):
    path = tmp_path / "d.csv"
    write_daily_csv(path, [make_daily_row(f"2020-01-0{i}", i) for i in (1, 2, 3)])
    table = dataio.load_csv(path, "daily")
    assert table.n_rows == 3
    assert table.granularity == "daily"
    assert table.columns["F1"].tolist() == [1.0, 2.0, 3.0]


def test_load_csv_duplicate_daily_timestamp(tmp_path):
    path = tmp_path / "d.csv"
    write_daily_csv(path, [make_daily_row("2020-01-01", 1), make_daily_row("2020-01-01", 2)])
    with pytest.raises(OrderingError):
        dataio.load_csv(path, "daily")


def test_load_csv_unknown_column(tmp_path):
    path = tmp_path / "d.csv"
    header = ",".join(dataio.DAILY_HEADER).replace("F62", "F99")
    write_daily_csv(path, [], header=header)
    with pytest.raises(SchemaError, match="F99"):
        dataio.load_csv(path, "daily")


def test_load_csv_malformed_row_reports_line(tmp_path):
    path = tmp_path / "d.csv"
    write_daily_csv(path, [make_daily_row("2020-01-01", 1), "2020-01-02,oops"])
    with pytest.raises(ParseError, match="line 3"):
        dataio.load_csv(path, "daily")


def test_load_csv_bad_number_reports_line(tmp_path):
    path = tmp_path / "d.csv"
    bad = "2020-01-02," + ",".join(["x"] + ["1"] * 62)
    write_daily_csv(path, [make_daily_row("2020-01-01", 1), bad])
    with pytest.raises(ParseError, match="line 3"):
        dataio.load_csv(path, "daily")


def test_save_load_round_trip(tmp_path):
    table = dataio.generate_synthetic(RngState(3), 40)
    path = tmp_path / "t.csv"
    dataio.save_csv(table, path)
    back = dataio.load_csv(path, "daily")
    assert back.timestamps == table.timestamps
    for name in table.columns:
        assert np.array_equal(back.columns[name], table.columns[name])


def test_clean_midpoint():
    t = daily_table({"F1": [1.0, np.nan, 3.0]})
    assert dataio.clean(t).columns["F1"].tolist() == [1.0, 2.0, 3.0]


def test_clean_three_step_gap():
    t = daily_table({"F1": [1.0, np.nan, np.nan, 4.0]})
    assert dataio.clean(t).columns["F1"].tolist() == [1.0, 2.0, 3.0, 4.0]


def test_clean_dst_duplicate_keeps_first():
    stamps = [(date(2020, 10, 25), h) for h in (0, 1, 2, 2, 3)]
    t = dataio.TimeSeriesTable(
        stamps, {"F1": np.array([1.0, 2.0, 3.0, 99.0, 5.0])}, "hourly"
    )
    cleaned = dataio.clean(t)
    assert cleaned.n_rows == 4
    assert cleaned.columns["F1"].tolist() == [1.0, 2.0, 3.0, 5.0]


def test_clean_leading_missing_rejected():
    with pytest.raises(IncompleteSeriesError):
        dataio.clean(daily_table({"F1": [np.nan, 1.0, 2.0]}))
    with pytest.raises(IncompleteSeriesError):
        dataio.clean(daily_table({"F1": [1.0, 2.0, np.nan]}))


def test_clean_idempotent():
    t = daily_table({"F1": [1.0, np.nan, 3.0, 7.0], "F2": [0.0, 1.0, np.nan, 3.0]})
    once = dataio.clean(t)
    twice = dataio.clean(once)
    assert once.timestamps == twice.timestamps
    for name in once.columns:
        assert np.array_equal(once.columns[name], twice.columns[name])


def hourly_fixture(days=2, price=30.0, flow=10.0, cap=10.0):
    stamps, columns = [], {name: [] for name in dataio.HOURLY_HEADER[2:]}
    for d in range(days):
        for h in range(24):
            stamps.append((date(2020, 3, 1) + timedelta(days=d), h))
            for name in dataio.HOURLY_FEATURES:
                cat = dataio.CATEGORY_BY_ID[name]
                if cat in (dataio.PRICE, dataio.FX_RATE):
                    columns[name].append(price)
                elif cat == dataio.FLOW:
                    columns[name].append(flow)
                else:
                    columns[name].append(100.0)
            for name in dataio.CAPACITY_COLUMNS:
                columns[name].append(cap)
            columns["target"].append(price)
    return dataio.TimeSeriesTable(
        stamps, {k: np.asarray(v, dtype=float) for k, v in columns.items()}, "hourly"
    )


def test_aggregate_daily_category_dispatch():
    daily = dataio.aggregate_daily(hourly_fixture(days=2, price=30.0, flow=10.0))
    assert daily.n_rows == 2
    assert daily.columns["F2"].tolist() == [30.0, 30.0]  # price: mean
    assert daily.columns["F43"].tolist() == [30.0, 30.0]  # fx: mean
    assert daily.columns["F47"].tolist() == [240.0, 240.0]  # flow: sum
    assert daily.columns["F19"].tolist() == [2400.0, 2400.0]  # production: sum
    assert daily.columns["target"].tolist() == [30.0, 30.0]


def test_aggregate_daily_appends_deviation_columns():
    daily = dataio.aggregate_daily(hourly_fixture(flow=15.0, cap=10.0))
    assert set(dataio.DEVIATION_COLUMNS) <= set(daily.column_names)
    assert daily.columns["F55"].tolist() == [5.0, 5.0]
    assert tuple(daily.column_names) == dataio.FEATURE_IDS + ("target",)


def test_aggregate_daily_incomplete_day():
    t = hourly_fixture(days=1)
    short = t.rows(0, 23)
    with pytest.raises(IncompleteDayError):
        dataio.aggregate_daily(short)


def test_aggregate_daily_target_hour():
    t = hourly_fixture(days=1)
    t.columns["target"] = np.arange(24, dtype=float)
    daily = dataio.aggregate_daily(t, target_hour=8)
    assert daily.columns["target"].tolist() == [8.0]


def test_flow_deviation_cases():
    same = np.full(24, 7.0)
    assert dataio.flow_deviation(same, same) == 0.0
    assert dataio.flow_deviation(same + 5.0, same) == pytest.approx(5.0, abs=1e-12)
    one_hour = same.copy()
    one_hour[3] += 24.0
    assert dataio.flow_deviation(one_hour, same) == pytest.approx(math.sqrt(24.0), abs=1e-12)


def test_flow_deviation_permutation_invariant():
    rng = RngState(9)
    flow = rng.uniform(0, 100, size=24)
    cap = rng.uniform(0, 100, size=24)
    perm = rng.permutation(24)
    assert dataio.flow_deviation(flow, cap) == pytest.approx(
        dataio.flow_deviation(flow[perm], cap[perm]), abs=1e-12
    )


def test_fit_normalizer_basic_and_leakage_guard():
    t = daily_table({"F1": [0.0, 5.0, 10.0]})
    params_all = dataio.fit_normalizer(t, (0, 3))
    assert params_all.mins["F1"] == 0.0 and params_all.maxs["F1"] == 10.0
    params_head = dataio.fit_normalizer(t, (0, 2))
    assert params_head.maxs["F1"] == 5.0
    # mutating rows outside the fitting window must not change the fit
    t2 = t.copy()
    t2.columns["F1"][2] = 1e9
    params_head2 = dataio.fit_normalizer(t2, (0, 2))
    assert params_head2.mins == params_head.mins and params_head2.maxs == params_head.maxs


def test_normalizer_constant_column_flagged():
    t = daily_table({"F1": [3.0, 3.0, 3.0]})
    params = dataio.fit_normalizer(t, (0, 3))
    assert "F1" in params.constant
    normalized = dataio.apply_normalizer(t, params)
    assert np.all(normalized.columns["F1"] == 0.0)
    restored = dataio.invert_normalizer(normalized, params)
    assert np.all(restored.columns["F1"] == 3.0)


def test_apply_invert_round_trip_and_clip():
    t = daily_table({"F1": [0.0, 5.0, 10.0]})
    params = dataio.fit_normalizer(t, (0, 3))
    normalized = dataio.apply_normalizer(t, params)
    assert normalized.columns["F1"].tolist() == [0.0, 0.5, 1.0]
    restored = dataio.invert_normalizer(normalized, params)
    assert np.abs(restored.columns["F1"] - t.columns["F1"]).max() < 1e-12
    out_of_range = daily_table({"F1": [12.0, -2.0, 5.0]})
    clipped = dataio.apply_normalizer(out_of_range, params)
    assert clipped.columns["F1"].tolist() == [1.0, 0.0, 0.5]


def test_apply_normalizer_unknown_column():
    t = daily_table({"F1": [0.0, 1.0, 2.0]})
    params = dataio.fit_normalizer(t, (0, 3))
    other = daily_table({"F2": [0.0, 1.0, 2.0]})
    with pytest.raises(SchemaError):
        dataio.apply_normalizer(other, params)


def test_catalog_shape():
    assert len(dataio.FEATURE_CATALOG) == 62
    assert len({f.id for f in dataio.FEATURE_CATALOG}) == 62
    assert {f.category for f in dataio.FEATURE_CATALOG} == set(dataio.CATEGORIES)
    assert [f.id for f in dataio.FEATURE_CATALOG if f.category == dataio.FLOW_DEVIATION] == list(
        dataio.DEVIATION_COLUMNS
    )


def test_synthetic_deterministic():
    a = dataio.generate_synthetic(RngState(5), 60)
    b = dataio.generate_synthetic(RngState(5), 60)
    for name in a.columns:
        assert np.array_equal(a.columns[name], b.columns[name])


def test_synthetic_zero_noise_matches_documented_function():
    spec = dataio.SynthSpec(noise_std=0.0)
    t = dataio.generate_synthetic(RngState(8), 50, spec)
    y = t.target()
    base = spec.base_level
    days = np.arange(50)
    seasonal = spec.seasonal_amplitude * np.sin(
        2 * np.pi * days / spec.seasonal_period + spec.seasonal_phase
    )
    centers = t.meta["feature_centers"]
    scales = t.meta["feature_scales"]
    expected = np.empty(50)
    expected[0] = base + seasonal[0]
    for i in range(1, 50):
        signal = sum(
            t.meta["weights"][fid] * (t.columns[fid][i - 1] - centers[fid]) / scales[fid]
            for fid in spec.relevant
        )
        expected[i] = base + seasonal[i] + signal
    assert np.abs(y - expected).max() < 1e-9


def test_synthetic_metadata_records_relevance():
    spec = dataio.SynthSpec(relevant=("F2", "F17", "F35"))
    t = dataio.generate_synthetic(RngState(1), 40, spec)
    assert t.meta["relevant"] == ["F2", "F17", "F35"]
    assert set(t.meta["weights"]) == {"F2", "F17", "F35"}


def test_synthetic_lag_feature_is_lagged_target():
    t = dataio.generate_synthetic(RngState(2), 45)
    assert np.array_equal(t.columns["F1"][1:], t.target()[:-1])


def test_synthetic_too_short():
    with pytest.raises(ConfigError):
        dataio.generate_synthetic(RngState(0), 10)
