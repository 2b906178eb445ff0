"""Feature-table ingestion: CSV loading, cleaning, daily aggregation,
min-max normalization, and the synthetic fixture generator.

The 62-feature catalog covers eight categories: zone day-ahead prices,
production and its prognosis, consumption and its prognosis, currency
rates, cross-border flows, and flow deviations derived from flow vs.
expected exchange capacity.

CSV schemas (UTF-8, comma separated, decimal point, empty field = missing):

* daily:  ``timestamp,F1,...,F62,target`` with ISO dates.
* hourly: ``timestamp,hour,F1,...,F54,F47_cap,...,F54_cap,target`` with
  ISO dates and an hour column in 0..23. Capacity columns carry the
  expected exchange capacity per interconnector and are consumed by the
  daily aggregation when deriving F55-F62.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .errors import (
    ConfigError,
    IncompleteDayError,
    IncompleteSeriesError,
    OrderingError,
    ParseError,
    SchemaError,
    ShapeError,
)
from .numkernel import RngState

PRICE = "price"
PRODUCTION = "production"
PRODUCTION_PROGNOSIS = "production-prognosis"
CONSUMPTION = "consumption"
CONSUMPTION_PROGNOSIS = "consumption-prognosis"
FX_RATE = "fx-rate"
FLOW = "flow"
FLOW_DEVIATION = "flow-deviation"

CATEGORIES = (
    PRICE,
    PRODUCTION,
    PRODUCTION_PROGNOSIS,
    CONSUMPTION,
    CONSUMPTION_PROGNOSIS,
    FX_RATE,
    FLOW,
    FLOW_DEVIATION,
)

# Columns aggregated by arithmetic mean; everything else is summed over
# the 24 hours, except flow deviations which are derived.
MEAN_CATEGORIES = frozenset({PRICE, FX_RATE})

INTERCONNECTORS = (
    ("NO2", "NL"),
    ("DK1", "DE"),
    ("DK2", "DE"),
    ("SE4", "DE"),
    ("SE4", "PL"),
    ("SE4", "LT"),
    ("FI", "EE"),
    ("FI", "RU"),
)

_PRICE_ZONES = (
    "system lag-1",
    "SE1", "SE2", "SE3", "SE4", "FI", "DK1", "DK2",
    "NO1", "NO2", "NO3", "NO4", "NO5", "EE", "LT", "PL", "DE", "NL",
)
_AREAS = ("Nordic", "EE", "LT", "PL", "DE", "NL")
_FX = ("EUR/NOK", "EUR/SEK", "EUR/DKK", "EUR/PLN")


@dataclass(frozen=True)
class FeatureInfo:
    id: str
    description: str
    unit: str
    category: str
    source: str


def _build_catalog() -> tuple[FeatureInfo, ...]:
    entries = []
    for i, zone in enumerate(_PRICE_ZONES):
        entries.append(FeatureInfo(f"F{i + 1}", f"{zone} day-ahead price", "EUR/MWh", PRICE, "market"))
    for base, (cat, what) in (
        (19, (PRODUCTION, "production")),
        (25, (PRODUCTION_PROGNOSIS, "production prognosis")),
        (31, (CONSUMPTION, "consumption")),
        (37, (CONSUMPTION_PROGNOSIS, "consumption prognosis")),
    ):
        for j, area in enumerate(_AREAS):
            entries.append(FeatureInfo(f"F{base + j}", f"{area} {what}", "MWh", cat, "market"))
    for j, pair in enumerate(_FX):
        entries.append(FeatureInfo(f"F{43 + j}", f"{pair} exchange rate", "rate", FX_RATE, "market"))
    for j, (a, b) in enumerate(INTERCONNECTORS):
        entries.append(FeatureInfo(f"F{47 + j}", f"{a}-{b} cross-border flow", "MWh", FLOW, "market"))
    for j, (a, b) in enumerate(INTERCONNECTORS):
        entries.append(FeatureInfo(f"F{55 + j}", f"{a}-{b} flow deviation", "MWh", FLOW_DEVIATION, "derived"))
    return tuple(entries)


FEATURE_CATALOG: tuple[FeatureInfo, ...] = _build_catalog()
FEATURE_IDS: tuple[str, ...] = tuple(f.id for f in FEATURE_CATALOG)
CATEGORY_BY_ID: dict[str, str] = {f.id: f.category for f in FEATURE_CATALOG}

TARGET = "target"
HOURLY_FEATURES: tuple[str, ...] = FEATURE_IDS[:54]
CAPACITY_COLUMNS: tuple[str, ...] = tuple(f"F{47 + j}_cap" for j in range(8))
FLOW_COLUMNS: tuple[str, ...] = FEATURE_IDS[46:54]
DEVIATION_COLUMNS: tuple[str, ...] = FEATURE_IDS[54:62]

DAILY_HEADER: tuple[str, ...] = ("timestamp",) + FEATURE_IDS + (TARGET,)
HOURLY_HEADER: tuple[str, ...] = ("timestamp", "hour") + HOURLY_FEATURES + CAPACITY_COLUMNS + (TARGET,)

assert len(FEATURE_CATALOG) == 62 and len(set(FEATURE_IDS)) == 62


@dataclass
class TimeSeriesTable:
    """Dated rows of named real-valued columns.

    ``timestamps`` holds dates for daily tables and (date, hour) pairs for
    hourly tables. Columns all share the row count. ``meta`` carries
    generator bookkeeping and is never read by the pipeline itself.
    """

    timestamps: list
    columns: dict[str, np.ndarray]
    granularity: str  # "hourly" | "daily"
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def feature_matrix(self, names=None) -> np.ndarray:
        """Stack the given columns (default: all F-columns) into an (n, k) matrix."""
        if names is None:
            names = [c for c in self.columns if c.startswith("F") and not c.endswith("_cap")]
        missing = [c for c in names if c not in self.columns]
        if missing:
            raise SchemaError(f"unknown columns {missing}")
        return np.column_stack([self.columns[c] for c in names]) if names else np.empty((self.n_rows, 0))

    def target(self) -> np.ndarray:
        return self.columns[TARGET]

    def copy(self) -> "TimeSeriesTable":
        return TimeSeriesTable(
            list(self.timestamps),
            {k: v.copy() for k, v in self.columns.items()},
            self.granularity,
            dict(self.meta),
        )

    def rows(self, lo: int, hi: int) -> "TimeSeriesTable":
        return TimeSeriesTable(
            self.timestamps[lo:hi],
            {k: v[lo:hi].copy() for k, v in self.columns.items()},
            self.granularity,
            dict(self.meta),
        )

    def validate(self) -> None:
        n = self.n_rows
        for name, col in self.columns.items():
            if len(col) != n:
                raise SchemaError(f"column {name} has {len(col)} rows, expected {n}")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not a < b:
                raise OrderingError(f"timestamps not strictly increasing at {a!r} -> {b!r}")


def _parse_float(text: str, line_no: int) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line_no) from None


def load_csv(path, granularity: str) -> TimeSeriesTable:
    """Load a daily or hourly feature CSV, rejecting unknown columns.

    Daily timestamps must be strictly increasing. Hourly files may repeat
    a (date, hour) stamp consecutively (daylight-saving duplicates); those
    are collapsed later by clean().
    """
    if granularity not in ("hourly", "daily"):
        raise ConfigError(f"granularity must be 'hourly' or 'daily', got {granularity!r}")
    expected = DAILY_HEADER if granularity == "daily" else HOURLY_HEADER
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        header = tuple(h.strip() for h in header)
        unknown = [h for h in header if h not in expected]
        if unknown:
            raise SchemaError(f"unknown columns {unknown}")
        missing = [h for h in expected if h not in header]
        if missing:
            raise SchemaError(f"missing columns {missing}")
        if header != expected:
            raise SchemaError("columns out of schema order")

        value_names = expected[(1 if granularity == "daily" else 2):]
        timestamps: list = []
        data: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise ParseError(f"expected {len(expected)} fields, got {len(row)}", line_no)
            try:
                day = date.fromisoformat(row[0].strip())
            except ValueError:
                raise ParseError(f"bad date {row[0]!r}", line_no) from None
            if granularity == "hourly":
                try:
                    hour = int(row[1])
                except ValueError:
                    raise ParseError(f"bad hour {row[1]!r}", line_no) from None
                if not 0 <= hour <= 23:
                    raise ParseError(f"hour out of range: {hour}", line_no)
                stamp = (day, hour)
                values = row[2:]
            else:
                stamp = day
                values = row[1:]
            if timestamps:
                prev = timestamps[-1]
                if granularity == "daily" and not prev < stamp:
                    raise OrderingError(f"timestamps not strictly increasing at line {line_no}")
                if granularity == "hourly" and stamp < prev:
                    raise OrderingError(f"timestamps decreasing at line {line_no}")
            timestamps.append(stamp)
            data.append([_parse_float(v, line_no) for v in values])

    arr = np.asarray(data, dtype=np.float64) if data else np.empty((0, len(value_names)))
    columns = {name: arr[:, j].copy() for j, name in enumerate(value_names)}
    return TimeSeriesTable(timestamps, columns, granularity)


def save_csv(table: TimeSeriesTable, path) -> None:
    """Write a table back out in its schema order (nan becomes an empty field)."""
    expected = DAILY_HEADER if table.granularity == "daily" else HOURLY_HEADER
    names = expected[(1 if table.granularity == "daily" else 2):]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(expected)
        for i, stamp in enumerate(table.timestamps):
            if table.granularity == "hourly":
                lead = [stamp[0].isoformat(), str(stamp[1])]
            else:
                lead = [stamp.isoformat()]
            vals = []
            for name in names:
                v = table.columns[name][i]
                vals.append("" if math.isnan(v) else repr(float(v)))
            writer.writerow(lead + vals)


def _interpolate_column(col: np.ndarray, name: str) -> np.ndarray:
    """Fill interior NaN runs linearly by row position."""
    out = col.copy()
    nan = np.isnan(out)
    if not nan.any():
        return out
    if nan[0] or nan[-1]:
        raise IncompleteSeriesError(f"column {name} has missing values at the series edge")
    idx = np.arange(len(out))
    out[nan] = np.interp(idx[nan], idx[~nan], out[~nan])
    return out


def clean(table: TimeSeriesTable) -> TimeSeriesTable:
    """Collapse duplicated timestamps (first occurrence wins) and
    linearly interpolate interior missing values. Idempotent."""
    keep = [True] * table.n_rows
    for i in range(1, table.n_rows):
        if table.timestamps[i] == table.timestamps[i - 1]:
            keep[i] = False
    keep = np.asarray(keep)
    timestamps = [t for t, k in zip(table.timestamps, keep) if k]
    columns = {}
    for name, col in table.columns.items():
        columns[name] = _interpolate_column(col[keep], name)
    cleaned = TimeSeriesTable(timestamps, columns, table.granularity, dict(table.meta))
    cleaned.validate()
    return cleaned


def flow_deviation(hourly_flow, hourly_capacity) -> float:
    """Root-mean-square gap between hourly flow and expected capacity over 24 hours."""
    x = np.asarray(hourly_flow, dtype=np.float64)
    mu = np.asarray(hourly_capacity, dtype=np.float64)
    if x.shape != (24,) or mu.shape != (24,):
        raise ShapeError(f"flow_deviation expects two length-24 sequences, got {x.shape} and {mu.shape}")
    return float(np.sqrt(np.sum((x - mu) ** 2) / 24.0))


def aggregate_daily(table: TimeSeriesTable, catalog=FEATURE_CATALOG, target_hour: int | None = None) -> TimeSeriesTable:
    """Aggregate a cleaned hourly table to daily granularity.

    Price and fx-rate columns (and the target) average over the 24 hours;
    production, consumption, prognosis, and flow columns sum. The eight
    flow-deviation columns are derived from each interconnector's flow
    against its expected capacity column. With ``target_hour`` set, the
    daily target is that single hour's value instead of the daily mean.
    """
    if table.granularity != "hourly":
        raise ConfigError("aggregate_daily expects an hourly table")
    if target_hour is not None and not 0 <= target_hour <= 23:
        raise ConfigError(f"target_hour out of range: {target_hour}")
    category = {f.id: f.category for f in catalog}

    days: list[date] = []
    day_slices: list[slice] = []
    start = 0
    for i in range(1, table.n_rows + 1):
        if i == table.n_rows or table.timestamps[i][0] != table.timestamps[start][0]:
            days.append(table.timestamps[start][0])
            day_slices.append(slice(start, i))
            start = i
    for day, sl in zip(days, day_slices):
        hours = [table.timestamps[i][1] for i in range(sl.start, sl.stop)]
        if hours != list(range(24)):
            raise IncompleteDayError(f"{day.isoformat()} has {len(hours)} hours, expected 0..23")

    out: dict[str, np.ndarray] = {}
    for name in HOURLY_FEATURES:
        col = table.columns[name]
        if category[name] in MEAN_CATEGORIES:
            out[name] = np.array([col[sl].mean() for sl in day_slices])
        else:
            out[name] = np.array([col[sl].sum() for sl in day_slices])
    for flow_col, cap_col, dev_col in zip(FLOW_COLUMNS, CAPACITY_COLUMNS, DEVIATION_COLUMNS):
        flow = table.columns[flow_col]
        cap = table.columns[cap_col]
        out[dev_col] = np.array([flow_deviation(flow[sl], cap[sl]) for sl in day_slices])
    tcol = table.columns[TARGET]
    if target_hour is None:
        out[TARGET] = np.array([tcol[sl].mean() for sl in day_slices])
    else:
        out[TARGET] = np.array([tcol[sl][target_hour] for sl in day_slices])

    ordered = {name: out[name] for name in FEATURE_IDS + (TARGET,)}
    daily = TimeSeriesTable(days, ordered, "daily", dict(table.meta))
    daily.validate()
    return daily


@dataclass
class NormalizationParams:
    """Per-column min/max observed on the fitting window only."""

    mins: dict[str, float]
    maxs: dict[str, float]
    constant: frozenset[str]

    def to_dict(self) -> dict:
        return {
            "mins": dict(self.mins),
            "maxs": dict(self.maxs),
            "constant": sorted(self.constant),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(dict(d["mins"]), dict(d["maxs"]), frozenset(d["constant"]))


def fit_normalizer(table: TimeSeriesTable, fit_rows) -> NormalizationParams:
    """Fit per-column [0,1] scaling on ``fit_rows`` only (leakage guard).

    ``fit_rows`` is a (lo, hi) pair, range, or slice of row indices.
    Constant columns are flagged; apply_normalizer maps them to 0.
    """
    if isinstance(fit_rows, tuple):
        fit_rows = slice(*fit_rows)
    elif isinstance(fit_rows, range):
        fit_rows = slice(fit_rows.start, fit_rows.stop)
    probe = table.columns[next(iter(table.columns))][fit_rows]
    if probe.size == 0:
        raise ConfigError("fit_rows selects no rows")
    mins, maxs, constant = {}, {}, set()
    for name, col in table.columns.items():
        window = col[fit_rows]
        lo, hi = float(window.min()), float(window.max())
        mins[name] = lo
        maxs[name] = hi
        if hi == lo:
            constant.add(name)
    return NormalizationParams(mins, maxs, frozenset(constant))


def apply_normalizer(table: TimeSeriesTable, params: NormalizationParams) -> TimeSeriesTable:
    """Map each column into [0,1]; out-of-window values are clipped."""
    columns = {}
    for name, col in table.columns.items():
        if name not in params.mins:
            raise SchemaError(f"column {name} not covered by normalizer")
        if name in params.constant:
            columns[name] = np.zeros_like(col)
        else:
            span = params.maxs[name] - params.mins[name]
            columns[name] = np.clip((col - params.mins[name]) / span, 0.0, 1.0)
    return TimeSeriesTable(list(table.timestamps), columns, table.granularity, dict(table.meta))


def invert_normalizer(table: TimeSeriesTable, params: NormalizationParams) -> TimeSeriesTable:
    """Undo apply_normalizer for in-range values (constant columns restore their min)."""
    columns = {}
    for name, col in table.columns.items():
        if name not in params.mins:
            raise SchemaError(f"column {name} not covered by normalizer")
        columns[name] = denormalize_values(col, params, name)
    return TimeSeriesTable(list(table.timestamps), columns, table.granularity, dict(table.meta))


def normalize_values(values, params: NormalizationParams, name: str) -> np.ndarray:
    if name not in params.mins:
        raise SchemaError(f"column {name} not covered by normalizer")
    if name in params.constant:
        return np.zeros_like(np.asarray(values, dtype=np.float64))
    span = params.maxs[name] - params.mins[name]
    return np.clip((np.asarray(values, dtype=np.float64) - params.mins[name]) / span, 0.0, 1.0)


def denormalize_values(values, params: NormalizationParams, name: str) -> np.ndarray:
    if name not in params.mins:
        raise SchemaError(f"column {name} not covered by normalizer")
    values = np.asarray(values, dtype=np.float64)
    if name in params.constant:
        return np.full_like(values, params.mins[name])
    span = params.maxs[name] - params.mins[name]
    return values * span + params.mins[name]


@dataclass(frozen=True)
class SynthSpec:
    """Configuration of the synthetic daily fixture.

    The target follows a documented generating process: for day t >= 1,

        target[t] = base + seasonal(t) + sum_j w_j * z[j, t-1] + noise[t]

    where seasonal(t) = amplitude * sin(2*pi*t/period + phase), z[j] is
    the standardized value of relevant feature j, and noise is AR(1)
    with coefficient ``ar_coeff`` and innovation scale ``noise_std``.
    Day 0 has no feature term. With ``lag_feature`` set, F1 carries the
    one-day-lagged target (F1[0] = base).
    """

    relevant: tuple[str, ...] = ("F2", "F17", "F35")
    weights: tuple[float, ...] | None = None
    base_level: float = 30.0
    seasonal_amplitude: float = 6.0
    seasonal_period: float = 365.0
    seasonal_phase: float = 0.0
    noise_std: float = 1.0
    ar_coeff: float = 0.6
    feature_noise: float = 1.0
    lag_feature: bool = True


_CATEGORY_SCALE = {
    PRICE: (30.0, 8.0),
    PRODUCTION: (9.0e5, 1.2e5),
    PRODUCTION_PROGNOSIS: (9.0e5, 1.2e5),
    CONSUMPTION: (8.5e5, 1.1e5),
    CONSUMPTION_PROGNOSIS: (8.5e5, 1.1e5),
    FX_RATE: (9.5, 0.6),
    FLOW: (1.5e4, 4.0e3),
    FLOW_DEVIATION: (2.0e2, 8.0e1),
}


def generate_synthetic(rng: RngState, days: int, spec: SynthSpec = SynthSpec()) -> TimeSeriesTable:
    """Generate a daily 62-feature table with known ground-truth relevance.

    Every feature is a smooth seasonal curve plus AR(1) noise at a
    category-typical scale; the target follows the process documented on
    SynthSpec. The relevant feature set and weights are recorded in the
    table's meta for selector tests.
    """
    if days < 30:
        raise ConfigError(f"synthetic table needs at least 30 days, got {days}")
    for fid in spec.relevant:
        if fid not in FEATURE_IDS:
            raise ConfigError(f"unknown relevant feature {fid}")
        if fid == "F1" and spec.lag_feature:
            raise ConfigError("F1 is the lagged target; it cannot also be a planted feature")
    weights = spec.weights if spec.weights is not None else tuple(4.0 for _ in spec.relevant)
    if len(weights) != len(spec.relevant):
        raise ConfigError("weights length must match the relevant feature list")

    t = np.arange(days, dtype=np.float64)
    feat_rng = rng.child(1)
    noise_rng = rng.child(2)

    columns: dict[str, np.ndarray] = {}
    centers: dict[str, float] = {}
    scales: dict[str, float] = {}
    for info in FEATURE_CATALOG:
        center, scale = _CATEGORY_SCALE[info.category]
        r = feat_rng.child(int(info.id[1:]))
        period = float(r.uniform(20.0, 120.0))
        phase = float(r.uniform(0.0, 2.0 * np.pi))
        amp = float(r.uniform(0.4, 1.0)) * scale
        innov = r.normal(0.0, spec.feature_noise * 0.3 * scale, size=days)
        ar = np.empty(days)
        acc = 0.0
        for i in range(days):
            acc = 0.7 * acc + innov[i]
            ar[i] = acc
        columns[info.id] = center + amp * np.sin(2.0 * np.pi * t / period + phase) + ar
        centers[info.id] = center
        scales[info.id] = scale

    seasonal = spec.seasonal_amplitude * np.sin(
        2.0 * np.pi * t / spec.seasonal_period + spec.seasonal_phase
    )
    innov = noise_rng.normal(0.0, 1.0, size=days) * spec.noise_std
    noise = np.empty(days)
    acc = 0.0
    for i in range(days):
        acc = spec.ar_coeff * acc + innov[i]
        noise[i] = acc

    target = np.empty(days)
    target[0] = spec.base_level + seasonal[0] + noise[0]
    z = {
        fid: (columns[fid] - centers[fid]) / scales[fid]
        for fid in spec.relevant
    }
    for i in range(1, days):
        signal = sum(w * z[fid][i - 1] for fid, w in zip(spec.relevant, weights))
        target[i] = spec.base_level + seasonal[i] + signal + noise[i]

    if spec.lag_feature:
        lagged = np.empty(days)
        lagged[0] = spec.base_level
        lagged[1:] = target[:-1]
        columns["F1"] = lagged
    columns[TARGET] = target

    start = date(2016, 1, 1)
    timestamps = [start + timedelta(days=int(i)) for i in range(days)]
    ordered = {name: columns[name] for name in FEATURE_IDS + (TARGET,)}
    meta = {
        "relevant": list(spec.relevant),
        "weights": {fid: w for fid, w in zip(spec.relevant, weights)},
        "base_level": spec.base_level,
        "seasonal_amplitude": spec.seasonal_amplitude,
        "seasonal_period": spec.seasonal_period,
        "seasonal_phase": spec.seasonal_phase,
        "noise_std": spec.noise_std,
        "ar_coeff": spec.ar_coeff,
        "lag_feature": spec.lag_feature,
        "feature_centers": centers,
        "feature_scales": scales,
    }
    table = TimeSeriesTable(timestamps, ordered, "daily", meta)
    table.validate()
    return table
