"""Model registry and the walk-forward training pipeline.

Fourteen registered models: a NARMAX statistical benchmark (M0), five
two-step hybrids pairing a feature selector with a recurrent predictor
(M1-M5), three encoder-decoder variants on all 62 features (M6-M8), and
five two-stage hybrids pairing a selector with the recurrent
encoder-decoder (M9-M13).

Per fold, the pipeline fits its normalizer and selector strictly on the
fold's training rows, trains with early stopping against the fold's
validation block, and predicts the test block; nothing downstream of
the fold boundary ever feeds back into fitting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import dataio, featsel, splits
from .errors import ConfigError, RegistryError, SchemaError, ShapeError
from .neural import LayerSpec, Network, NetworkSpec, TrainConfig, train_network
from .numkernel import RngState, least_squares

MODEL_IDS = tuple(f"M{i}" for i in range(14))

_SELECTOR_ORDER = ("pc", "pso-elm", "ga-elm", "rfe-svr", "lasso")


@dataclass(frozen=True)
class NarmaxConfig:
    """Lag structure and polynomial degree; with grid search these are caps."""

    y_lags: int = 1
    x_lags: int = 1
    resid_lags: int = 1
    degree: int = 1
    grid_lags: tuple[int, ...] = (1, 7, 14)
    grid_degrees: tuple[int, ...] = (1, 2)
    grid_search: bool = True


@dataclass(frozen=True)
class SelectorConfig:
    """Per-selector knobs used when a pipeline invokes feature selection."""

    k: int = featsel.DEFAULT_K
    elm_hidden: int = 50
    pso: featsel.PsoConfig = featsel.PsoConfig()
    ga: featsel.GaConfig = featsel.GaConfig()
    rfe_drop_per_round: int = 8
    rfe_C: float = 1.0
    rfe_epsilon: float = 0.1
    rfe_tol: float = 1e-4
    lasso_lam: float = 0.02


@dataclass(frozen=True)
class ModelSpec:
    """One registry entry: tags, network layout, and training knobs."""

    model_id: str
    architecture: str  # narmax | two-step | encoder-decoder | two-stage
    selector: str  # none | pc | pso-elm | ga-elm | rfe-svr | lasso
    encoder: str  # none | lstm | cnn | convlstm
    network: NetworkSpec | None
    train: TrainConfig
    selector_config: SelectorConfig
    narmax: NarmaxConfig | None = None

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "architecture": self.architecture,
            "selector": self.selector,
            "encoder": self.encoder,
            "network": None if self.network is None else self.network.to_dict(),
            "train": self.train.to_dict(),
        }


def build(
    model_id: str,
    *,
    window: int = 14,
    lstm_units: int = 300,
    dense_units: int = 100,
    decoder_units: int = 300,
    conv_filters: int = 96,
    conv_kernel: int = 3,
    pool_width: int = 2,
    convlstm_filters: int = 64,
    convlstm_kernel: int = 3,
    train: TrainConfig | None = None,
    selector_config: SelectorConfig | None = None,
    narmax: NarmaxConfig | None = None,
    k: int = featsel.DEFAULT_K,
) -> ModelSpec:
    """Instantiate a registry entry; size arguments override the defaults
    (which follow the reference configuration) for desk-scale runs."""
    if model_id not in MODEL_IDS:
        raise RegistryError(f"unknown model id {model_id!r}")
    train = train or TrainConfig()
    sel_cfg = selector_config or SelectorConfig(k=k)
    idx = int(model_id[1:])

    if idx == 0:
        return ModelSpec(model_id, "narmax", "none", "none", None, train, sel_cfg, narmax or NarmaxConfig())

    decoder = (LayerSpec.lstm(decoder_units), LayerSpec.dense(1))
    if 1 <= idx <= 5:
        selector = _SELECTOR_ORDER[idx - 1]
        layers = (LayerSpec.lstm(lstm_units), LayerSpec.dense(dense_units), LayerSpec.dense(1))
        net = NetworkSpec(layers, window, sel_cfg.k)
        return ModelSpec(model_id, "two-step", selector, "none", net, train, sel_cfg)
    if idx == 6:
        layers = (LayerSpec.lstm(lstm_units),) + decoder
        net = NetworkSpec(layers, window, featsel.N_FEATURES)
        return ModelSpec(model_id, "encoder-decoder", "none", "lstm", net, train, sel_cfg)
    if idx == 7:
        layers = (
            LayerSpec.conv1d(conv_filters, conv_kernel),
            LayerSpec.conv1d(conv_filters, conv_kernel),
            LayerSpec.maxpool(pool_width),
            LayerSpec.flatten(),
        ) + decoder
        net = NetworkSpec(layers, window, featsel.N_FEATURES)
        return ModelSpec(model_id, "encoder-decoder", "none", "cnn", net, train, sel_cfg)
    if idx == 8:
        layers = (
            LayerSpec.convlstm(convlstm_filters, convlstm_kernel),
            LayerSpec.flatten(),
        ) + decoder
        net = NetworkSpec(layers, window, featsel.N_FEATURES)
        return ModelSpec(model_id, "encoder-decoder", "none", "convlstm", net, train, sel_cfg)
    selector = _SELECTOR_ORDER[idx - 9]
    layers = (LayerSpec.lstm(lstm_units),) + decoder
    net = NetworkSpec(layers, window, sel_cfg.k)
    return ModelSpec(model_id, "two-stage", selector, "lstm", net, train, sel_cfg)


def run_selector(spec: ModelSpec, X: np.ndarray, y: np.ndarray, rng: RngState) -> featsel.FeatureMask:
    """Dispatch to the spec's selector on (already normalized) training data."""
    cfg = spec.selector_config
    name = spec.selector
    if name == "pc":
        return featsel.pearson_select(X, y, k=cfg.k)
    if name == "pso-elm":
        pso = replace(cfg.pso, k=cfg.k, elm_hidden=cfg.elm_hidden)
        return featsel.pso_select(X, y, rng, pso)
    if name == "ga-elm":
        ga = replace(cfg.ga, k=cfg.k, elm_hidden=cfg.elm_hidden)
        return featsel.ga_select(X, y, rng, ga)
    if name == "rfe-svr":
        mask, _ = featsel.rfe_svr_select(
            X,
            y,
            k=cfg.k,
            drop_per_round=cfg.rfe_drop_per_round,
            C=cfg.rfe_C,
            epsilon=cfg.rfe_epsilon,
            tol=cfg.rfe_tol,
        )
        return mask
    if name == "lasso":
        return featsel.lasso_select(X, y, lam=cfg.lasso_lam, k=cfg.k)
    raise ConfigError(f"model {spec.model_id} has no selector")


# ---------------------------------------------------------------------------
# NARMAX benchmark


@dataclass
class NarmaxModel:
    """Polynomial NARX with recursive residual terms, fitted by extended
    least squares; prediction runs one step ahead with residual terms 0."""

    config: NarmaxConfig
    coefficients: np.ndarray
    term_names: list[str]
    converged: bool
    n_features: int

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.tolist(),
            "terms": self.term_names,
            "converged": self.converged,
            "config": {
                "y_lags": self.config.y_lags,
                "x_lags": self.config.x_lags,
                "resid_lags": self.config.resid_lags,
                "degree": self.config.degree,
            },
        }


def _narmax_terms(y, X, resid, cfg: NarmaxConfig):
    """Regressor matrix for rows t in [start, n).

    Base regressors: y lags 1..Ny, exogenous lags 0..Nx per column,
    residual lags 1..Ne. Degree 2 adds squares of every base regressor
    plus pairwise products among the y lags (the full quadratic
    expansion is infeasible at this width).
    """
    n = len(y)
    start = max(cfg.y_lags, cfg.x_lags, cfg.resid_lags)
    rows = np.arange(start, n)
    cols = [np.ones(len(rows))]
    names = ["1"]
    y_cols = []
    for lag in range(1, cfg.y_lags + 1):
        col = y[rows - lag]
        cols.append(col)
        names.append(f"y[t-{lag}]")
        y_cols.append(col)
    for j in range(X.shape[1]):
        for lag in range(0, cfg.x_lags + 1):
            cols.append(X[rows - lag, j])
            names.append(f"x{j}[t-{lag}]")
    for lag in range(1, cfg.resid_lags + 1):
        cols.append(resid[rows - lag])
        names.append(f"e[t-{lag}]")
    if cfg.degree >= 2:
        base_n = len(cols)
        for i in range(1, base_n):
            cols.append(cols[i] ** 2)
            names.append(f"({names[i]})^2")
        for a in range(len(y_cols)):
            for b in range(a + 1, len(y_cols)):
                cols.append(y_cols[a] * y_cols[b])
                names.append(f"y[t-{a + 1}]*y[t-{b + 1}]")
    return np.column_stack(cols), names, rows


def narmax_fit(y, X, config: NarmaxConfig = NarmaxConfig(grid_search=False), tol: float = 1e-6, max_rounds: int = 20) -> NarmaxModel:
    """Fit by extended least squares: alternate fitting and residual updates
    until coefficients move less than ``tol`` or the round cap is hit."""
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(y) != len(X):
        raise ConfigError("narmax_fit expects y (n,) and X (n, d)")
    if config.degree not in (1, 2):
        raise ConfigError("degree must be 1 or 2")
    if min(config.y_lags, config.x_lags, config.resid_lags) < 0:
        raise ConfigError("lags must be >= 0")
    resid = np.zeros(len(y))
    coef = None
    converged = False
    names: list[str] = []
    for _ in range(max_rounds):
        A, names, rows = _narmax_terms(y, X, resid, config)
        new_coef = least_squares(A, y[rows])
        if coef is not None and len(coef) == len(new_coef):
            if np.max(np.abs(new_coef - coef)) < tol:
                coef = new_coef
                converged = True
                break
        coef = new_coef
        resid = np.zeros(len(y))
        resid[rows] = y[rows] - A @ coef
        if config.resid_lags == 0:
            converged = True
            break
    return NarmaxModel(config, coef, names, converged, X.shape[1])


def narmax_predict(model: NarmaxModel, y_history, X) -> np.ndarray:
    """One-step-ahead predictions over all feasible rows, residual terms 0."""
    y = np.asarray(y_history, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != model.n_features:
        raise ShapeError(f"expected {model.n_features} feature columns, got {X.shape[1]}")
    resid = np.zeros(len(y))
    A, _, rows = _narmax_terms(y, X, resid, model.config)
    return A @ model.coefficients, rows


def narmax_grid_search(y_train, X_train, y_val_ctx, X_val_ctx, val_rows, config: NarmaxConfig):
    """Pick (lags, degree) by one-step-ahead MSE on the validation rows.

    The context arrays include history before the validation block so
    lagged regressors are available for every validation row.
    """
    best = None
    for lag in config.grid_lags:
        for degree in config.grid_degrees:
            cand = NarmaxConfig(
                y_lags=lag,
                x_lags=lag,
                resid_lags=config.resid_lags,
                degree=degree,
                grid_search=False,
            )
            try:
                model = narmax_fit(y_train, X_train, cand)
            except ConfigError:
                continue
            preds, rows = narmax_predict(model, y_val_ctx, X_val_ctx)
            sel = np.isin(rows, val_rows)
            if not sel.any():
                continue
            mse = float(np.mean((preds[sel] - y_val_ctx[rows[sel]]) ** 2))
            if best is None or mse < best[0]:
                best = (mse, model)
    if best is None:
        raise ConfigError("no feasible NARMAX structure for the given data")
    return best[1]


# ---------------------------------------------------------------------------
# Pipeline


@dataclass(frozen=True)
class PipelineConfig:
    """Walk-forward execution knobs shared by every model."""

    window: int = 14
    val_len: int | None = None
    test_len: int = 1
    retrain_every: int = 1  # refit after this many folds; large value = train once

    def __post_init__(self):
        if self.window < 1 or self.test_len < 1 or self.retrain_every < 1:
            raise ConfigError("window, test_len, and retrain_every must be >= 1")


@dataclass
class TrainedModel:
    """Everything needed to reproduce one fold's fitted model."""

    spec: ModelSpec
    fold_index: int
    fold: splits.Fold
    seed: int
    normalizer: dataio.NormalizationParams
    mask: featsel.FeatureMask | None
    network: Network | None
    narmax: NarmaxModel | None
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "spec": self.spec.to_dict(),
            "fold_index": self.fold_index,
            "fold": {
                "train": list(self.fold.train),
                "val": list(self.fold.validation),
                "test": list(self.fold.test),
            },
            "seed": self.seed,
            "normalizer": self.normalizer.to_dict(),
            "mask": None if self.mask is None else json.loads(self.mask.to_json()),
            "network": None if self.network is None else self.network.to_dict(),
            "narmax": None if self.narmax is None else self.narmax.to_dict(),
            "metadata": self.metadata,
        }
        return json.dumps(payload, sort_keys=True)

    def bundle_name(self) -> str:
        return f"{self.spec.model_id}_seed{self.seed}_fold{self.fold_index}.json"


@dataclass
class WalkForwardResult:
    spec: ModelSpec
    seed: int
    predictions: np.ndarray  # denormalized day-ahead prices over the test region
    actuals: np.ndarray
    test_rows: np.ndarray
    fold_models: list[TrainedModel]


def fit_fold(
    spec: ModelSpec,
    table: dataio.TimeSeriesTable,
    fold: splits.Fold,
    fold_index: int,
    rng: RngState,
    pipeline: PipelineConfig,
) -> TrainedModel:
    """Fit one fold: normalizer and selector on train rows only, network on
    train windows with validation-block early stopping."""
    tr_lo, tr_hi = fold.train
    va_lo, va_hi = fold.validation
    normalizer = dataio.fit_normalizer(table, (tr_lo, tr_hi))
    normalized = dataio.apply_normalizer(table, normalizer)

    if spec.architecture == "narmax":
        X = normalized.feature_matrix()
        y = normalized.target()
        cfg = spec.narmax or NarmaxConfig()
        if cfg.grid_search:
            model = narmax_grid_search(
                y[tr_lo:tr_hi], X[tr_lo:tr_hi], y[:va_hi], X[:va_hi], np.arange(va_lo, va_hi), cfg
            )
        else:
            model = narmax_fit(y[tr_lo:tr_hi], X[tr_lo:tr_hi], cfg)
        return TrainedModel(
            spec, fold_index, fold, rng.seed, normalizer, None, None, model,
            metadata={"converged": model.converged},
        )

    mask = None
    features = None
    if spec.selector != "none":
        # one-step-ahead alignment: the mask serves windows that end the
        # day before the target, so selectors score x_t against y_{t+1}
        train_view = normalized.rows(tr_lo, tr_hi)
        X_sel = train_view.feature_matrix()[:-1]
        y_sel = train_view.target()[1:]
        mask = run_selector(spec, X_sel, y_sel, rng.child(1))
        features = mask.selected_names()

    windowed = splits.windowize(normalized.rows(0, va_hi), features, pipeline.window)
    train_set = windowed.subset(tr_lo, tr_hi)
    val_set = windowed.subset(va_lo, va_hi)
    if len(train_set) == 0:
        raise ConfigError(f"fold {fold_index}: no training windows (window too long?)")

    assert spec.network is not None
    trained = train_network(
        spec.network,
        train_set.inputs,
        train_set.targets,
        val_set.inputs if len(val_set) else None,
        val_set.targets if len(val_set) else None,
        spec.train,
        rng.child(2),
    )
    metadata = {
        "epochs_run": trained.epochs_run,
        "best_epoch": trained.best_epoch,
        "train_curve": trained.train_curve,
        "val_curve": trained.val_curve,
    }
    return TrainedModel(spec, fold_index, fold, rng.seed, normalizer, mask, trained.network, None, metadata)


def predict(model: TrainedModel, window_rows: dataio.TimeSeriesTable) -> float:
    """Day-ahead price (original units) from the most recent window of rows."""
    spec = model.spec
    if spec.architecture == "narmax":
        raise ConfigError("M0 predicts through narmax_predict, not windows")
    normalized = dataio.apply_normalizer(window_rows, model.normalizer)
    features = model.mask.selected_names() if model.mask is not None else None
    X = normalized.feature_matrix(features)
    net = model.network
    expected = (net.spec.window, net.spec.n_features)
    if X.shape != expected:
        raise SchemaError(f"window shape {X.shape} does not match model input {expected}")
    out = net.predict(X)
    return float(dataio.denormalize_values(np.array([out]), model.normalizer, dataio.TARGET)[0])


def _predict_narmax_region(model: TrainedModel, table, lo: int, hi: int) -> np.ndarray:
    normalized = dataio.apply_normalizer(table, model.normalizer)
    X = normalized.feature_matrix()
    y = normalized.target()
    preds, rows = narmax_predict(model.narmax, y[:hi], X[:hi])
    sel = np.isin(rows, np.arange(lo, hi))
    out = np.full(hi - lo, np.nan)
    out[rows[sel] - lo] = preds[sel]
    if np.isnan(out).any():
        raise ConfigError("test rows precede the NARMAX lag horizon")
    return dataio.denormalize_values(out, model.normalizer, dataio.TARGET)


def train_model(
    spec: ModelSpec,
    table: dataio.TimeSeriesTable,
    plan: splits.SplitPlan,
    rng: RngState,
    pipeline: PipelineConfig = PipelineConfig(),
) -> WalkForwardResult:
    """Walk the fold schedule, refitting every ``retrain_every`` folds, and
    predict each fold's test block with the current fitted model."""
    if table.granularity != "daily":
        raise ConfigError("train_model expects a daily table")
    predictions: list[float] = []
    actual: list[float] = []
    test_rows: list[int] = []
    fold_models: list[TrainedModel] = []
    current: TrainedModel | None = None
    y_raw = table.target()

    for fold_index, fold in enumerate(plan.folds):
        if current is None or fold_index % pipeline.retrain_every == 0:
            current = fit_fold(spec, table, fold, fold_index, rng.child(fold_index), pipeline)
            fold_models.append(current)
        lo, hi = fold.test
        if spec.architecture == "narmax":
            preds = _predict_narmax_region(current, table, lo, hi)
            predictions.extend(preds.tolist())
        else:
            for row in range(lo, hi):
                window_rows = table.rows(row - pipeline.window, row)
                predictions.append(predict(current, window_rows))
        actual.extend(y_raw[lo:hi].tolist())
        test_rows.extend(range(lo, hi))

    return WalkForwardResult(
        spec,
        rng.seed,
        np.asarray(predictions),
        np.asarray(actual),
        np.asarray(test_rows, dtype=int),
        fold_models,
    )
