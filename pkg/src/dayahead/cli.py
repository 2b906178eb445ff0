"""Command-line surface: ingest, synth, select, train, evaluate, dm,
explain, and report, driven by a JSON experiment config.

All randomness flows from configured seeds; outputs are byte-identical
across repeated invocations. Files are written to a temp path and
renamed, so partial outputs are never left behind. Exit codes: 0 ok,
2 configuration error, 3 data error, 4 training/solver failure,
5 degenerate statistics. DAYAHEAD_OUT_DIR sets the default output
directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import dataio, evaluation, explain, featsel, models, splits
from .errors import ConfigError, DayaheadError
from .neural import TrainConfig
from .numkernel import RngState

SELECTOR_CHOICES = featsel.SELECTORS


def _default_out_dir() -> str:
    return os.environ.get("DAYAHEAD_OUT_DIR", "out")


def atomic_write(path: str, data: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_rows(path: str, header: list[str], rows: list[list]) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    os.replace(tmp, path)


CONFIG_DEFAULTS = {
    "data": None,
    "models": ["M0"],
    "seeds": {"base": 0, "count": 10},
    "split": {"val_len": None, "test_len": 1},
    "pipeline": {"window": 14, "retrain_every": 1},
    "network": {
        "lstm_units": 300,
        "dense_units": 100,
        "decoder_units": 300,
        "conv_filters": 96,
        "conv_kernel": 3,
        "pool_width": 2,
        "convlstm_filters": 64,
        "convlstm_kernel": 3,
    },
    "train": {"max_epochs": 200, "batch_size": 32, "patience": 20, "learning_rate": 1e-3},
    "selector": {
        "k": 30,
        "elm_hidden": 50,
        "pso_iterations": 10_000,
        "pso_particles": 20,
        "ga_generations": 10_000,
        "ga_population": 100,
        "rfe_drop_per_round": 8,
        "rfe_C": 1.0,
        "rfe_epsilon": 0.1,
        "rfe_tol": 1e-4,
        "lasso_lam": 0.02,
    },
    "narmax": {"grid_lags": [1, 7, 14], "grid_degrees": [1, 2], "resid_lags": 1},
    "out_dir": None,
    "workers": 1,
}


def resolve_config(raw: dict) -> dict:
    """Overlay user config on the defaults; reject unknown keys."""
    resolved = {}
    for key, default in CONFIG_DEFAULTS.items():
        if isinstance(default, dict) and key in raw and raw[key] is not None:
            unknown = set(raw[key]) - set(default)
            if unknown:
                raise ConfigError(f"unknown config keys in '{key}': {sorted(unknown)}")
            resolved[key] = {**default, **raw[key]}
        else:
            resolved[key] = raw.get(key, default)
    unknown = set(raw) - set(CONFIG_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for mid in resolved["models"]:
        if mid not in models.MODEL_IDS:
            raise ConfigError(f"unknown model id {mid!r} in config")
    seeds = resolved["seeds"]
    if isinstance(seeds, dict):
        if seeds.get("count", 0) < 1:
            raise ConfigError("seeds.count must be >= 1")
    elif not seeds:
        raise ConfigError("seeds must be nonempty")
    return resolved


def config_seeds(cfg: dict) -> list[int]:
    seeds = cfg["seeds"]
    if isinstance(seeds, dict):
        return list(range(seeds["base"], seeds["base"] + seeds["count"]))
    return [int(s) for s in seeds]


def build_spec(model_id: str, cfg: dict) -> models.ModelSpec:
    net = cfg["network"]
    sel = cfg["selector"]
    train = TrainConfig(**cfg["train"])
    selector_config = models.SelectorConfig(
        k=sel["k"],
        elm_hidden=sel["elm_hidden"],
        pso=featsel.PsoConfig(
            iterations=sel["pso_iterations"], particles=sel["pso_particles"], k=sel["k"]
        ),
        ga=featsel.GaConfig(
            generations=sel["ga_generations"], population=sel["ga_population"], k=sel["k"]
        ),
        rfe_drop_per_round=sel["rfe_drop_per_round"],
        rfe_C=sel["rfe_C"],
        rfe_epsilon=sel["rfe_epsilon"],
        rfe_tol=sel["rfe_tol"],
        lasso_lam=sel["lasso_lam"],
    )
    narmax = models.NarmaxConfig(
        resid_lags=cfg["narmax"]["resid_lags"],
        grid_lags=tuple(cfg["narmax"]["grid_lags"]),
        grid_degrees=tuple(cfg["narmax"]["grid_degrees"]),
        grid_search=True,
    )
    return models.build(
        model_id,
        window=cfg["pipeline"]["window"],
        lstm_units=net["lstm_units"],
        dense_units=net["dense_units"],
        decoder_units=net["decoder_units"],
        conv_filters=net["conv_filters"],
        conv_kernel=net["conv_kernel"],
        pool_width=net["pool_width"],
        convlstm_filters=net["convlstm_filters"],
        convlstm_kernel=net["convlstm_kernel"],
        train=train,
        selector_config=selector_config,
        narmax=narmax,
        k=sel["k"],
    )


def _plan_for(table: dataio.TimeSeriesTable, cfg: dict) -> splits.SplitPlan:
    return splits.walk_forward_folds(
        table.n_rows, cfg["split"]["val_len"], cfg["split"]["test_len"]
    )


def _run_job(payload: dict):
    """One (model, seed) walk-forward run; executed possibly in a worker process."""
    cfg = payload["config"]
    table = dataio.load_csv(payload["data"], "daily")
    plan = splits.SplitPlan.from_json(payload["plan"])
    spec = build_spec(payload["model_id"], cfg)
    pipeline = models.PipelineConfig(
        window=cfg["pipeline"]["window"],
        val_len=cfg["split"]["val_len"],
        test_len=cfg["split"]["test_len"],
        retrain_every=cfg["pipeline"]["retrain_every"],
    )
    result = models.train_model(spec, table, plan, RngState(payload["seed"]), pipeline)
    return {
        "model_id": payload["model_id"],
        "seed": payload["seed"],
        "predictions": result.predictions.tolist(),
        "actuals": result.actuals.tolist(),
        "test_rows": result.test_rows.tolist(),
    }


def run_evaluation(cfg: dict, out_dir: str) -> dict:
    """Drive the repeated-experiment protocol for every configured model."""
    if not cfg["data"]:
        raise ConfigError("config must name a daily data file under 'data'")
    table = dataio.load_csv(cfg["data"], "daily")
    plan = _plan_for(table, cfg)
    seeds = config_seeds(cfg)
    jobs = [
        {
            "config": cfg,
            "data": cfg["data"],
            "plan": plan.to_json(),
            "model_id": mid,
            "seed": seed,
        }
        for mid in cfg["models"]
        for seed in seeds
    ]
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            raw_results = list(pool.map(_run_job, jobs))
    else:
        raw_results = [_run_job(j) for j in jobs]
    raw_results.sort(key=lambda r: (r["model_id"], r["seed"]))  # deterministic merge

    by_model: dict[str, dict[int, dict]] = {}
    for res in raw_results:
        by_model.setdefault(res["model_id"], {})[res["seed"]] = res

    os.makedirs(out_dir, exist_ok=True)
    metric_rows = []
    report = {"config": cfg, "models": {}}
    for mid in cfg["models"]:
        runs = by_model[mid]

        def run_one(seed, _runs=runs):
            r = _runs[seed]
            return r["predictions"], r["actuals"], r["test_rows"]

        result = evaluation.run_experiments(run_one, mid, len(seeds), seeds[0])
        for seed, rep in zip(result.seeds, result.reports):
            metric_rows.append(
                [mid, seed, rep.mae, rep.rmse, rep.mape, rep.smape, rep.n]
            )
        report["models"][mid] = {
            "seeds": result.seeds,
            "stats": {name: s.as_dict() for name, s in result.stats.items()},
            "failures": result.failures,
        }
        pred_header = ["row", "timestamp", "actual", "mean_prediction"] + [
            f"seed_{s}" for s in result.seeds
        ]
        pred_rows = []
        for i, row in enumerate(result.test_rows):
            pred_rows.append(
                [int(row), table.timestamps[int(row)].isoformat(), float(result.actuals[i]),
                 float(result.mean_predictions[i])]
                + [float(result.per_seed_predictions[s][i]) for s in result.seeds]
            )
        atomic_write_rows(os.path.join(out_dir, f"predictions_{mid}.csv"), pred_header, pred_rows)

    atomic_write_rows(
        os.path.join(out_dir, "metrics.csv"),
        ["model", "seed", "mae", "rmse", "mape", "smape", "n"],
        metric_rows,
    )
    stats_rows = []
    for mid in cfg["models"]:
        for metric in evaluation.METRIC_NAMES:
            s = report["models"][mid]["stats"][metric]
            stats_rows.append(
                [mid, metric, s["count"], s["mean"], s["std"], s["min"], s["p25"], s["p50"], s["p75"], s["max"]]
            )
    atomic_write_rows(
        os.path.join(out_dir, "stats.csv"),
        ["model", "metric", "count", "mean", "std", "min", "p25", "p50", "p75", "max"],
        stats_rows,
    )
    atomic_write(os.path.join(out_dir, "report.json"), json.dumps(report, sort_keys=True, indent=2))
    return report


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    table = dataio.load_csv(args.hourly, "hourly")
    cleaned = dataio.clean(table)
    daily = dataio.aggregate_daily(cleaned, target_hour=args.target_hour)
    dataio.save_csv(daily, args.out)
    print(f"wrote {daily.n_rows} daily rows to {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = dataio.SynthSpec(noise_std=args.noise_std)
    table = dataio.generate_synthetic(RngState(args.seed), args.days, spec)
    dataio.save_csv(table, args.out)
    atomic_write(args.out + ".meta.json", json.dumps(table.meta, sort_keys=True, indent=2))
    print(f"wrote {table.n_rows} synthetic rows to {args.out}")
    return 0


def cmd_select(args) -> int:
    table = dataio.load_csv(args.data, "daily")
    division = splits.initial_division(table.n_rows)
    lo, hi = division["train"]
    train_view = table.rows(lo, hi)
    normalizer = dataio.fit_normalizer(train_view, (0, hi - lo))
    normalized = dataio.apply_normalizer(train_view, normalizer)
    X, y = normalized.feature_matrix(), normalized.target()
    rng = RngState(args.seed)
    if args.method == "pc":
        mask = featsel.pearson_select(X, y, k=args.k)
    elif args.method == "pso-elm":
        mask = featsel.pso_select(X, y, rng, featsel.PsoConfig(iterations=args.iterations, k=args.k))
    elif args.method == "ga-elm":
        mask = featsel.ga_select(X, y, rng, featsel.GaConfig(generations=args.iterations, k=args.k))
    elif args.method == "rfe-svr":
        mask, _ = featsel.rfe_svr_select(X, y, k=args.k, drop_per_round=8, tol=1e-4)
    else:
        mask = featsel.lasso_select(X, y, k=args.k)
    atomic_write(args.out, mask.to_json())
    print(featsel.masks_to_table_text([mask]))
    print(f"wrote mask ({mask.popcount} features) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(json.load(open(args.config, encoding="utf-8")))
    out_dir = args.out_dir or cfg["out_dir"] or _default_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    table = dataio.load_csv(cfg["data"], "daily")
    plan = _plan_for(table, cfg)
    spec = build_spec(args.model, cfg)
    pipeline = models.PipelineConfig(
        window=cfg["pipeline"]["window"],
        val_len=cfg["split"]["val_len"],
        test_len=cfg["split"]["test_len"],
        retrain_every=cfg["pipeline"]["retrain_every"],
    )
    seed = config_seeds(cfg)[0]
    result = models.train_model(spec, table, plan, RngState(seed), pipeline)
    for tm in result.fold_models:
        atomic_write(os.path.join(out_dir, tm.bundle_name()), tm.to_json())
    rows = [
        [int(r), table.timestamps[int(r)].isoformat(), float(a), float(p)]
        for r, a, p in zip(result.test_rows, result.actuals, result.predictions)
    ]
    atomic_write_rows(
        os.path.join(out_dir, f"predictions_{args.model}.csv"),
        ["row", "timestamp", "actual", "prediction"],
        rows,
    )
    print(f"trained {args.model} over {len(result.fold_models)} fits; outputs in {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = resolve_config(json.load(open(args.config, encoding="utf-8")))
    if args.models:
        cfg["models"] = args.models
    out_dir = args.out_dir or cfg["out_dir"] or _default_out_dir()
    report = run_evaluation(cfg, out_dir)
    for mid, entry in report["models"].items():
        smape = entry["stats"]["smape"]["mean"]
        print(f"{mid}: mean SMAPE {smape:.3f} over {len(entry['seeds'])} experiments")
    print(f"outputs in {out_dir}")
    return 0


def cmd_dm(args) -> int:
    errors = {}
    for name in sorted(os.listdir(args.reports)):
        if not (name.startswith("predictions_") and name.endswith(".csv")):
            continue
        model_id = name[len("predictions_") : -len(".csv")]
        with open(os.path.join(args.reports, name), newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            e = [
                float(row.get("mean_prediction") or row["prediction"]) - float(row["actual"])
                for row in reader
            ]
        errors[model_id] = np.asarray(e)
    if len(errors) < 2:
        raise ConfigError(f"need predictions for at least two models in {args.reports}")
    matrix = evaluation.dm_matrix(errors)
    atomic_write(os.path.join(args.reports, "dm_matrix.json"), json.dumps(matrix, sort_keys=True, indent=2))
    text = evaluation.dm_matrix_text(matrix)
    atomic_write(os.path.join(args.reports, "dm_matrix.txt"), text)
    print(text)
    return 0


def cmd_explain(args) -> int:
    table = dataio.load_csv(args.data, "daily")
    mask = featsel.FeatureMask.from_json(open(args.mask, encoding="utf-8").read())
    out_dir = args.out_dir or _default_out_dir()
    os.makedirs(out_dir, exist_ok=True)
    division = splits.initial_division(table.n_rows)
    tr_lo, tr_hi = division["train"]
    normalizer = dataio.fit_normalizer(table, (tr_lo, tr_hi))
    normalized = dataio.apply_normalizer(table, normalizer)
    names = mask.selected_names()
    X = normalized.feature_matrix(names)
    y = normalized.target()

    model, search = explain.fit_surrogate_svr(X[tr_lo:tr_hi], y[tr_lo:tr_hi])
    rng = RngState(args.seed)
    background = explain.sample_background(X[tr_lo:tr_hi], args.background, rng)
    te_lo, te_hi = division["test"]
    instances = X[te_lo:te_hi]
    explanations = [
        explain.kernel_shap(model.predict, instances[i], background, args.coalitions, rng.child(i))
        for i in range(len(instances))
    ]
    ranking = explain.importance_ranking(explanations)
    atomic_write(
        os.path.join(out_dir, "importance.json"),
        json.dumps(
            {
                "surrogate": search["chosen"],
                "ranking": [{"feature": names[j], "mean_abs_attribution": v} for j, v in ranking],
            },
            sort_keys=True,
            indent=2,
        ),
    )
    rows = []
    for i, e in enumerate(explanations):
        for j, name in enumerate(names):
            rows.append([int(te_lo + i), name, float(e.instance[j]), float(e.values[j])])
    atomic_write_rows(
        os.path.join(out_dir, "attributions.csv"), ["row", "feature", "value", "phi"], rows
    )
    top = ranking[0][0]
    dep = explain.dependence_export(explanations, top)
    dep_rows = [[v, p, iv] for v, p, iv in dep["rows"]]
    atomic_write_rows(
        os.path.join(out_dir, f"dependence_{names[top]}.csv"),
        ["value", "phi", f"interaction_{names[dep['interaction_feature']]}"],
        dep_rows,
    )
    print(f"explained {len(explanations)} instances; top feature {names[top]}")
    return 0


def cmd_report(args) -> int:
    out_dir = args.dir
    report_path = os.path.join(out_dir, "report.json")
    if not os.path.exists(report_path):
        raise ConfigError(f"no report.json under {out_dir}; run evaluate first")
    report = json.load(open(report_path, encoding="utf-8"))
    summary = {"models": {}}
    for mid, entry in report["models"].items():
        summary["models"][mid] = {m: entry["stats"][m]["mean"] for m in evaluation.METRIC_NAMES}
    dm_path = os.path.join(out_dir, "dm_matrix.json")
    if os.path.exists(dm_path):
        summary["dm_matrix"] = json.load(open(dm_path, encoding="utf-8"))
    summary["config"] = report["config"]
    atomic_write(os.path.join(out_dir, "summary.json"), json.dumps(summary, sort_keys=True, indent=2))
    rows = [
        [mid] + [summary["models"][mid][m] for m in evaluation.METRIC_NAMES]
        for mid in sorted(summary["models"])
    ]
    atomic_write_rows(
        os.path.join(out_dir, "summary.csv"), ["model", *evaluation.METRIC_NAMES], rows
    )
    print(f"wrote consolidated summary for {len(rows)} models to {out_dir}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dayahead", description="Day-ahead electricity price forecasting toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="clean an hourly CSV and aggregate it to daily")
    p.add_argument("--hourly", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target-hour", type=int, default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate the synthetic daily fixture")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select", help="run one feature selector on a daily CSV")
    p.add_argument("--method", choices=SELECTOR_CHOICES, required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="mask.json")
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=100)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="walk-forward training for one model")
    p.add_argument("--model", required=True, choices=models.MODEL_IDS)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="repeated-experiment protocol over models")
    p.add_argument("--config", required=True)
    p.add_argument("--models", nargs="*")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dm", help="pairwise one-sided DM matrix from prediction files")
    p.add_argument("--reports", required=True)
    p.set_defaults(func=cmd_dm)

    p = sub.add_parser("explain", help="surrogate SVR + Shapley attributions")
    p.add_argument("--data", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--background", type=int, default=100)
    p.add_argument("--coalitions", type=int, default=2048)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("report", help="consolidate evaluate/dm outputs")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DayaheadError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
