"""Forecast accuracy metrics, the one-sided Diebold-Mariano test, and the
repeated-experiment statistics protocol.

MAE, RMSE, MAPE, and SMAPE follow the standard definitions with
percentages scaled by 100; SMAPE is bounded in [0, 200]. The DM test
uses the absolute-error loss differential d_t = |e1_t| - |e2_t| at
horizon one, with the Harvey-Leybourne-Newbold small-sample correction
and Student-t p-values; a positive statistic favors the second
forecast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, DegenerateStatisticsError, UndefinedMetricError

METRIC_NAMES = ("mae", "rmse", "mape", "smape")


@dataclass(frozen=True)
class MetricReport:
    mae: float
    rmse: float
    mape: float
    smape: float
    n: int
    mape_excluded: int = 0  # rows dropped from MAPE under tolerate_zeros

    def as_dict(self) -> dict:
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "mape": self.mape,
            "smape": self.smape,
            "n": self.n,
            "mape_excluded": self.mape_excluded,
        }


def metrics(y, y_hat, tolerate_zeros: bool = False) -> MetricReport:
    """Evaluate MAE, RMSE, MAPE, SMAPE.

    Zero actuals make MAPE undefined: either an error, or, under
    ``tolerate_zeros``, those rows are excluded from MAPE with a count
    in the report. A pair with |y| + |y_hat| == 0 makes SMAPE undefined
    as well (excluded likewise under the flag).
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1 or len(y) == 0:
        raise ConfigError(f"metrics expects equal nonzero-length vectors, got {y.shape} vs {y_hat.shape}")
    err = y - y_hat
    abs_err = np.abs(err)
    mae = float(abs_err.mean())
    rmse = float(np.sqrt((err**2).mean()))

    zero_y = y == 0
    if zero_y.any() and not tolerate_zeros:
        raise UndefinedMetricError(f"MAPE undefined: {int(zero_y.sum())} zero actuals")
    keep = ~zero_y
    if not keep.any():
        raise UndefinedMetricError("MAPE undefined: all actuals are zero")
    mape = float(100.0 * np.mean(abs_err[keep] / np.abs(y[keep])))

    denom = (np.abs(y) + np.abs(y_hat)) / 2.0
    degenerate = denom == 0
    if degenerate.any() and not tolerate_zeros:
        raise UndefinedMetricError("SMAPE undefined: |y| + |y_hat| == 0 for some row")
    skeep = ~degenerate
    if not skeep.any():
        raise UndefinedMetricError("SMAPE undefined on every row")
    smape = float(100.0 * np.mean(abs_err[skeep] / denom[skeep]))
    return MetricReport(mae, rmse, mape, smape, len(y), int(zero_y.sum()) if tolerate_zeros else 0)


@dataclass(frozen=True)
class DmResult:
    statistic: float  # Harvey-corrected
    raw_statistic: float
    p_value: float
    direction: str  # alternative hypothesis the p-value tests
    n: int


def dm_test(e1, e2, side: str = "second-better") -> DmResult:
    """One-sided Diebold-Mariano test on two forecast-error series.

    ``side`` picks the alternative: "second-better" tests whether the
    second forecast's absolute errors are smaller (positive statistic
    supports it); "first-better" the reverse.
    """
    if side not in ("second-better", "first-better"):
        raise ConfigError(f"side must be 'second-better' or 'first-better', got {side!r}")
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    if e1.shape != e2.shape or e1.ndim != 1:
        raise ConfigError("error series must share one dimension")
    T = len(e1)
    if T < 10:
        raise ConfigError(f"need at least 10 observations, got {T}")
    d = np.abs(e1) - np.abs(e2)
    d_bar = d.mean()
    variance = float(((d - d_bar) ** 2).mean())  # horizon-1 long-run variance
    if variance == 0.0:
        raise DegenerateStatisticsError("loss differential has zero variance")
    raw = float(d_bar / math.sqrt(variance / T))
    correction = math.sqrt((T + 1 - 2 * 1 + 1 * 0 / T) / T)  # h = 1
    corrected = correction * raw
    if side == "second-better":
        p = float(stats.t.sf(corrected, df=T - 1))
    else:
        p = float(stats.t.cdf(corrected, df=T - 1))
    return DmResult(corrected, raw, p, side, T)


SIGNIFICANCE_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"), (0.15, "#"))


def significance_stars(p_value: float) -> str:
    for level, stars in SIGNIFICANCE_LEVELS:
        if p_value < level:
            return stars
    return ""


def dm_matrix(errors_by_model: dict[str, np.ndarray]) -> dict:
    """Pairwise one-sided DM statistics in row=first, column=second layout.

    Entry (r, c) is positive when model c forecasts better than model r;
    the matrix is antisymmetric up to the shared correction, so the
    lower triangle mirrors the upper with flipped sign (kept for the
    familiar presentation). Stars mark 1/5/10/15% one-sided levels.
    """
    names = list(errors_by_model)
    cells: dict[str, dict[str, dict]] = {}
    for r in names:
        cells[r] = {}
        for c in names:
            if r == c:
                continue
            try:
                res = dm_test(errors_by_model[r], errors_by_model[c], side="second-better")
                cells[r][c] = {
                    "statistic": res.statistic,
                    "p_value": res.p_value,
                    "stars": significance_stars(res.p_value),
                }
            except DegenerateStatisticsError:
                cells[r][c] = {"statistic": None, "p_value": None, "stars": ""}
    return {"models": names, "cells": cells}


def dm_matrix_text(matrix: dict) -> str:
    names = matrix["models"]
    width = max(10, max(len(n) for n in names) + 2)
    head = "F1\\F2".ljust(width) + "".join(n.rjust(width) for n in names)
    lines = [head]
    for r in names:
        row = [r.ljust(width)]
        for c in names:
            if r == c:
                row.append("".rjust(width))
                continue
            cell = matrix["cells"][r][c]
            if cell["statistic"] is None:
                row.append("n/a".rjust(width))
            else:
                row.append(f"{cell['statistic']:.2f}{cell['stars']}".rjust(width))
        lines.append("".join(row))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExperimentStats:
    """Order statistics of one metric across repeated experiments."""

    count: int
    mean: float
    std: float
    min: float
    p25: float
    p50: float
    p75: float
    max: float

    @classmethod
    def from_values(cls, values) -> "ExperimentStats":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            raise ConfigError("no values to aggregate")
        std = float(v.std(ddof=1)) if v.size > 1 else 0.0
        return cls(
            count=int(v.size),
            mean=float(v.mean()),
            std=std,
            min=float(v.min()),
            p25=float(np.percentile(v, 25)),  # linear interpolation between ranks
            p50=float(np.percentile(v, 50)),
            p75=float(np.percentile(v, 75)),
            max=float(v.max()),
        )

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "p25": self.p25,
            "p50": self.p50,
            "p75": self.p75,
            "max": self.max,
        }


@dataclass
class ExperimentResult:
    """Outcome of n seeded repetitions of one model's walk-forward run."""

    model_id: str
    seeds: list[int]
    reports: list[MetricReport]
    stats: dict[str, ExperimentStats]
    mean_predictions: np.ndarray
    actuals: np.ndarray
    test_rows: np.ndarray
    per_seed_predictions: dict[int, np.ndarray]
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def mean_errors(self) -> np.ndarray:
        return self.mean_predictions - self.actuals


def aggregate_stats(reports: list[MetricReport]) -> dict[str, ExperimentStats]:
    return {
        name: ExperimentStats.from_values([getattr(r, name) for r in reports])
        for name in METRIC_NAMES
    }


def run_experiments(
    run_one,
    model_id: str,
    n: int,
    base_seed: int,
    tolerate_zeros: bool = False,
) -> ExperimentResult:
    """Execute ``run_one(seed) -> (predictions, actuals, test_rows)`` for
    seeds base_seed..base_seed+n-1 and aggregate the per-run metrics.

    A failing run is recorded (seed, message) and skipped; the result is
    partial. The headline value of each metric is the mean across runs.
    """
    if n < 1:
        raise ConfigError("need at least one experiment")
    reports: list[MetricReport] = []
    failures: list[tuple[int, str]] = []
    seeds: list[int] = []
    preds_by_seed: dict[int, np.ndarray] = {}
    actuals = None
    test_rows = None
    for seed in range(base_seed, base_seed + n):
        try:
            predictions, run_actuals, run_rows = run_one(seed)
        except Exception as exc:  # noqa: BLE001 - failures become part of the report
            failures.append((seed, f"{type(exc).__name__}: {exc}"))
            continue
        if actuals is None:
            actuals = np.asarray(run_actuals, dtype=np.float64)
            test_rows = np.asarray(run_rows, dtype=int)
        preds_by_seed[seed] = np.asarray(predictions, dtype=np.float64)
        reports.append(metrics(actuals, preds_by_seed[seed], tolerate_zeros=tolerate_zeros))
        seeds.append(seed)
    if not reports:
        raise ConfigError(f"all {n} experiments failed for {model_id}: {failures}")
    mean_predictions = np.mean(np.stack([preds_by_seed[s] for s in seeds]), axis=0)
    return ExperimentResult(
        model_id,
        seeds,
        reports,
        aggregate_stats(reports),
        mean_predictions,
        actuals,
        test_rows,
        preds_by_seed,
        failures,
    )
