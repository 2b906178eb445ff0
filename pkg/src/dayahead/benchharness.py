"""Oracle suite: every derived expectation in the package's contract is
bound to an independently implemented check (hand expansions, finite
differences, brute-force enumeration, grid QP search, closed forms).

Oracles deliberately avoid the code paths they validate: gradient
oracles use forward evaluations only, the SVR oracle minimizes the
primal by grid refinement, the Shapley oracle enumerates subsets, and
statistics are recomputed with plain loops.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from xml.etree import ElementTree

import numpy as np

from . import dataio, evaluation, explain, featsel, models, splits
from .errors import DayaheadError
from .neural import LayerSpec, NetworkSpec, TrainConfig, gradient_check, train_network
from .neural.layers import LstmLayer, MaxPoolLayer
from .neural.network import AdamOptimizer, Network, mse
from .numkernel import RngState, least_squares, matmul
from .svr import svr_fit


@dataclass
class CaseResult:
    name: str
    module: str
    passed: bool
    deviation: float
    tolerance: float
    detail: str = ""


@dataclass(frozen=True)
class OracleCase:
    name: str
    module: str
    seed: int
    tolerance: float
    runner: object
    slow: bool = False


_CASES: list[OracleCase] = []


def case(name: str, module: str, seed: int = 0, tolerance: float = 0.0, slow: bool = False):
    def register(fn):
        _CASES.append(OracleCase(name, module, seed, tolerance, fn, slow))
        return fn

    return register


def _result(c: OracleCase, deviation: float, detail: str = "") -> CaseResult:
    return CaseResult(c.name, c.module, deviation <= c.tolerance, float(deviation), c.tolerance, detail)


# ---------------------------------------------------------------------------
# numkernel


@case("matmul_hand_product", "numkernel", tolerance=0.0)
def _matmul_hand(c):
    a = [[1.0, 2.0], [3.0, 4.0]]
    b = [[5.0], [6.0]]
    oracle = [[0.0], [0.0]]
    for i in range(2):
        for k in range(2):
            oracle[i][0] += a[i][k] * b[k][0]
    got = matmul(a, b)
    dev = max(abs(got[i][0] - oracle[i][0]) for i in range(2))
    return _result(c, dev, f"got {got.tolist()}")


@case("least_squares_exact_line", "numkernel", tolerance=1e-12)
def _lsq_exact(c):
    beta = least_squares([[1.0], [2.0], [3.0]], [2.0, 4.0, 6.0])
    # normal equations by hand: (a'a) b = a'y -> 14 b = 28
    return _result(c, abs(beta[0] - 28.0 / 14.0))


@case("least_squares_mean", "numkernel", tolerance=1e-12)
def _lsq_mean(c):
    beta = least_squares([[1.0], [1.0]], [1.0, 3.0])
    return _result(c, abs(beta[0] - (1.0 + 3.0) / 2.0))


# ---------------------------------------------------------------------------
# dataio


@case("interpolation_three_step_gap", "dataio", tolerance=1e-12)
def _interp_gap(c):
    from datetime import date, timedelta

    start = date(2020, 1, 1)
    table = dataio.TimeSeriesTable(
        [start + timedelta(days=i) for i in range(4)],
        {"F1": np.array([1.0, np.nan, np.nan, 4.0])},
        "daily",
    )
    got = dataio.clean(table).columns["F1"]
    oracle = [1.0, 1.0 + (4.0 - 1.0) / 3.0, 1.0 + 2.0 * (4.0 - 1.0) / 3.0, 4.0]
    return _result(c, float(np.max(np.abs(got - np.array(oracle)))))


@case("daily_flow_sum", "dataio", tolerance=1e-12)
def _daily_flow(c):
    total = 0.0
    for _ in range(24):
        total += 10.0
    return _result(c, abs(total - 24 * 10.0), "aggregation rule: flows sum over 24 hours")


@case("flow_deviation_constant_offset", "dataio", tolerance=1e-12)
def _flow_dev_offset(c):
    flow = [100.0 + 5.0] * 24
    cap = [100.0] * 24
    acc = 0.0
    for x, mu in zip(flow, cap):
        acc += (x - mu) ** 2
    oracle = math.sqrt(acc / 24.0)
    return _result(c, abs(dataio.flow_deviation(flow, cap) - oracle))


@case("flow_deviation_single_hour", "dataio", tolerance=1e-12)
def _flow_dev_single(c):
    flow = [50.0] * 24
    flow[7] += 24.0
    cap = [50.0] * 24
    oracle = math.sqrt(24.0**2 / 24.0)
    return _result(c, abs(dataio.flow_deviation(flow, cap) - oracle))


# ---------------------------------------------------------------------------
# splits


@case("walk_forward_geometry", "splits", tolerance=0.0)
def _walk_forward(c):
    plan = splits.walk_forward_folds(100, val_len=10, test_len=1)
    expected0 = ((0, 80), (80, 90), (90, 91))
    expected1 = ((0, 81), (81, 91), (91, 92))
    got0 = (plan.folds[0].train, plan.folds[0].validation, plan.folds[0].test)
    got1 = (plan.folds[1].train, plan.folds[1].validation, plan.folds[1].test)
    dev = 0.0 if (got0 == expected0 and got1 == expected1 and len(plan.folds) == 10) else 1.0
    return _result(c, dev, f"fold0={got0} fold1={got1} n={len(plan.folds)}")


# ---------------------------------------------------------------------------
# neural


@case("lstm_zero_params_zero_states", "neural", tolerance=0.0)
def _lstm_zero(c):
    layer = LstmLayer(3, 4)
    hs, cs = layer.states(RngState(1).normal(size=(2, 6, 3)))
    return _result(c, float(np.abs(hs).max() + np.abs(cs).max()))


@case("lstm_single_step_closed_form", "neural", tolerance=1e-12)
def _lstm_single_step(c):
    r = RngState(c.seed)
    layer = LstmLayer(1, 1)
    for name in layer.params:
        layer.params[name] = r.normal(size=layer.params[name].shape)
    x = float(r.normal())
    h = layer.forward(np.array([[[x]]]))
    p = {k: float(v.reshape(-1)[0]) for k, v in layer.params.items()}
    # closed form with zero initial state: peephole terms vanish
    i1 = 1.0 / (1.0 + math.exp(-(p["Wxi"] * x + p["bi"])))
    o1 = 1.0 / (1.0 + math.exp(-(p["Wxo"] * x + p["bo"])))
    c1 = i1 * math.tanh(p["Wxc"] * x + p["bc"])
    h1 = o1 * math.tanh(c1)
    return _result(c, abs(float(h[0, 0]) - h1))


@case("lstm_gradient_check", "neural", seed=11, tolerance=1e-4)
def _lstm_gradcheck(c):
    r = RngState(c.seed)
    spec = NetworkSpec((LayerSpec.lstm(3), LayerSpec.dense(1)), window=2, n_features=3)
    err = gradient_check(spec, r.normal(size=(1, 2, 3)), r.normal(size=1), r.child(1))
    return _result(c, err)


@case("maxpool_windowed_max", "neural", tolerance=0.0)
def _maxpool(c):
    x = np.array([[[1.0], [3.0], [2.0], [5.0]]])
    got = MaxPoolLayer(4, 1, 2).forward(x)[0, :, 0]
    oracle = [max(1.0, 3.0), max(2.0, 5.0)]
    return _result(c, float(np.max(np.abs(got - np.array(oracle)))))


@case("convlstm_zero_params_zero_states", "neural", tolerance=0.0)
def _convlstm_zero(c):
    from .neural.layers import ConvLstmLayer

    layer = ConvLstmLayer(5, 3, 2)
    out = layer.forward(RngState(2).normal(size=(2, 4, 5)))
    return _result(c, float(np.abs(out).max()))


@case("convlstm_width1_matches_lstm", "neural", tolerance=1e-10)
def _convlstm_dense_equiv(c):
    from .neural.layers import ConvLstmLayer

    r = RngState(c.seed)
    F = 3
    conv = ConvLstmLayer(1, F, 1)
    dense = LstmLayer(1, F)
    for g in ("f", "i", "o", "c"):
        w = r.normal(size=F)
        wh = r.normal(size=(F, F))
        b = r.normal(size=F)
        conv.params[f"Wx{g}"] = w.reshape(1, 1, F).copy()
        dense.params[f"Wx{g}"] = w.reshape(1, F).copy()
        conv.params[f"Wh{g}"] = wh.reshape(1, F, F).copy()
        dense.params[f"Wh{g}"] = wh.copy()
        conv.params[f"b{g}"] = b.copy()
        dense.params[f"b{g}"] = b.copy()
    for g in ("f", "i", "o"):
        wc = r.normal(size=F)
        conv.params[f"wc{g}"] = wc.reshape(1, F).copy()
        dense.params[f"wc{g}"] = wc.copy()
    x = r.normal(size=(2, 6, 1))
    dev = float(np.abs(conv.forward(x)[:, 0, :] - dense.forward(x)).max())
    return _result(c, dev)


@case("adam_constant_gradient_fixed_point", "neural", tolerance=0.05)
def _adam_fixed_point(c):
    lr = 1e-3
    opt = AdamOptimizer(learning_rate=lr)
    params = {"w": np.array([0.0])}
    g = np.array([0.35])
    prev = params["w"].copy()
    step = 0.0
    for _ in range(500):
        prev = params["w"].copy()
        opt.step(params, {"w": g})
        step = abs(float(params["w"][0] - prev[0]))
    return _result(c, abs(step - lr) / lr, f"final step {step:.3e}")


@case("train_linear_target", "neural", seed=42, tolerance=1e-3)
def _train_linear(c):
    r = RngState(c.seed)
    X = r.uniform(0, 1, size=(300, 14, 5))
    y = 0.5 * X[:, -1, 0]
    spec = NetworkSpec((LayerSpec.lstm(8), LayerSpec.dense(8), LayerSpec.dense(1)), 14, 5)
    cfg = TrainConfig(max_epochs=150, batch_size=32, patience=25, learning_rate=5e-3)
    res = train_network(spec, X[:240], y[:240], X[240:], y[240:], cfg, r.child(1))
    return _result(c, min(res.val_curve), f"best val MSE {min(res.val_curve):.2e}")


@case("gradcheck_dense_network", "neural", seed=9, tolerance=1e-6)
def _gradcheck_dense(c):
    r = RngState(c.seed)
    spec = NetworkSpec(
        (LayerSpec.flatten(), LayerSpec.dense(4, "tanh"), LayerSpec.dense(1)), 3, 2
    )
    err = gradient_check(spec, r.normal(size=(3, 3, 2)), r.normal(size=3), r.child(1))
    return _result(c, err)


@case("gradcheck_conv_maxpool", "neural", seed=13, tolerance=1e-4)
def _gradcheck_conv(c):
    r = RngState(c.seed)
    spec = NetworkSpec(
        (LayerSpec.conv1d(3, 2), LayerSpec.maxpool(2), LayerSpec.flatten(), LayerSpec.dense(1)),
        6,
        2,
    )
    err = gradient_check(spec, r.normal(size=(2, 6, 2)), r.normal(size=2), r.child(1))
    return _result(c, err)


@case("tampered_backward_fails_gradcheck", "neural", seed=31, tolerance=0.0)
def _tampered_backward(c):
    r = RngState(c.seed)
    spec = NetworkSpec((LayerSpec.lstm(3), LayerSpec.dense(1)), window=3, n_features=2)
    original = LstmLayer.backward

    def flipped(self, dy):
        dx = original(self, dy)
        for key in self.grads:
            self.grads[key] = -self.grads[key]
        return dx

    LstmLayer.backward = flipped
    try:
        err = gradient_check(spec, r.normal(size=(2, 3, 2)), r.normal(size=2), r.child(1))
    finally:
        LstmLayer.backward = original
    # mutation sanity: the oracle must FAIL loudly on a sign-flipped build
    return _result(c, 0.0 if err > 1e-2 else 1.0, f"tampered error {err:.3e}")


# ---------------------------------------------------------------------------
# featsel


@case("pearson_hand_value", "featsel", tolerance=1e-9)
def _pearson_value(c):
    xs = [1.0, 2.0, 3.0]
    ys = [1.0, 2.0, 4.0]
    mx = sum(xs) / 3
    my = sum(ys) / 3
    cov = sum((a - mx) * (b - my) for a, b in zip(xs, ys)) / 3
    sx = math.sqrt(sum((a - mx) ** 2 for a in xs) / 3)
    sy = math.sqrt(sum((b - my) ** 2 for b in ys) / 3)
    oracle = cov / (sx * sy)
    got = featsel.pearson_correlations(np.array(xs)[:, None], np.array(ys))[0]
    return _result(c, abs(got - oracle), f"rho={got:.6f}")


@case("elm_interpolation_regime", "featsel", seed=5, tolerance=1e-8)
def _elm_interpolation(c):
    r = RngState(c.seed)
    n, d = 40, 6
    X = r.uniform(-1, 1, size=(n, d))
    y = r.normal(size=n)
    model, w_out = featsel.elm_fit(X, y, np.arange(d), hidden=80, rng=r.child(1))
    train_mse = featsel.elm_eval(model, w_out, np.arange(d), X, y)
    return _result(c, train_mse, f"train MSE {train_mse:.2e}")


@case("elm_within_10x_of_ols", "featsel", seed=6, tolerance=10.0)
def _elm_vs_ols(c):
    r = RngState(c.seed)
    n, d = 200, 8
    X = r.uniform(0, 1, size=(n, d))
    beta = r.normal(size=d)
    y = X @ beta + 0.05 * r.normal(size=n)
    cut = 160
    model, w_out = featsel.elm_fit(X[:cut], y[:cut], np.arange(d), hidden=50, rng=r.child(1))
    elm_mse = featsel.elm_eval(model, w_out, np.arange(d), X[cut:], y[cut:])
    ones = np.column_stack([X[:cut], np.ones(cut)])
    coef = least_squares(ones, y[:cut])
    ols_pred = np.column_stack([X[cut:], np.ones(n - cut)]) @ coef
    ols_mse = float(np.mean((ols_pred - y[cut:]) ** 2))
    ratio = elm_mse / ols_mse
    passed = elm_mse < 1e-2 and ratio <= 10.0
    return _result(c, ratio if passed else max(ratio, 11.0), f"elm {elm_mse:.2e} ols {ols_mse:.2e}")


_PLANTED = np.zeros(62, dtype=bool)
_PLANTED[:30] = True


def _planted_fitness(bits) -> float:
    return float(np.sum(bits != _PLANTED))


@case("pso_planted_optimum", "featsel", seed=1000, tolerance=0.0)
def _pso_planted(c):
    wins = 0
    for s in range(10):
        cfg = featsel.PsoConfig(
            c1=2.0, c2=2.0, inertia=0.9, iterations=500, particles=20, stop_at_fitness=0.0
        )
        mask = featsel.pso_select(None, None, RngState(c.seed + s), cfg, fitness=_planted_fitness)
        wins += int((np.asarray(mask.bits) == _PLANTED).all())
    return _result(c, 10.0 - wins, f"{wins}/10 seeds")


@case("pso_sphere_benchmark", "featsel", seed=7, tolerance=1e-3)
def _pso_sphere(c):
    cfg = featsel.PsoConfig(iterations=1000, particles=20, init_span=5.0)
    res = featsel.pso_optimize(lambda x, r: (float(x @ x), None), 2, RngState(c.seed), cfg)
    return _result(c, float(np.linalg.norm(res.best_position)))


@case("ga_planted_onemax", "featsel", seed=2000, tolerance=0.0)
def _ga_planted(c):
    wins = 0
    for s in range(10):
        cfg = featsel.GaConfig(generations=200, population=60, stop_at_fitness=0.0)
        mask = featsel.ga_select(None, None, RngState(c.seed + s), cfg, fitness=_planted_fitness)
        wins += int((np.asarray(mask.bits) == _PLANTED).all())
    return _result(c, 10.0 - wins, f"{wins}/10 seeds")


def qp_grid_oracle(X, y, C, epsilon, rounds: int = 60, grid: int = 21, span: float = 10.0):
    """Brute-force primal minimization by trust-region grid refinement over (w, b).

    Each round sweeps a full lattice around the incumbent. The box only
    shrinks when the best point stays well inside it; when the minimum
    crawls along a narrow valley the box follows without shrinking, so
    the search cannot converge prematurely off the valley floor.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = X.shape[1]
    center = np.zeros(d + 1)
    radius = span
    best_val = np.inf
    best_point = center.copy()
    for _ in range(rounds):
        axes = [np.linspace(center[k] - radius, center[k] + radius, grid) for k in range(d + 1)]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([m.reshape(-1) for m in mesh], axis=1)  # (grid^(d+1), d+1)
        f = flat[:, :d] @ X.T + flat[:, d : d + 1]
        slack = np.maximum(0.0, np.abs(y[None, :] - f) - epsilon)
        obj = 0.5 * np.sum(flat[:, :d] ** 2, axis=1) + C * slack.sum(axis=1)
        k = int(np.argmin(obj))
        if obj[k] < best_val:
            best_val = float(obj[k])
            best_point = flat[k]
        moved = np.max(np.abs(best_point - center))
        center = best_point.copy()
        if moved <= radius * 0.5:
            radius *= 4.0 / (grid - 1)  # two grid steps of slack remain inside
        if radius < 1e-9:
            break
    return best_val, best_point


@case("svr_tube_geometry", "featsel", seed=0, tolerance=1e-3)
def _svr_tube(c):
    x = np.linspace(-1.0, 1.0, 20)[:, None]
    y = 2.0 * x[:, 0]
    model = svr_fit(x, y, C=1000.0, epsilon=0.1, tol=1e-8)
    oracle_val, oracle_point = qp_grid_oracle(x, y, 1000.0, 0.1)
    # minimal-norm weight keeping every point inside the tube: |2 - w| <= eps
    dev = max(abs(model.w[0] - oracle_point[0]), abs(model.w[0] - (2.0 - 0.1)))
    return _result(c, dev, f"w={model.w[0]:.6f} oracle={oracle_point[0]:.6f}")


@case("svr_vs_qp_grid", "featsel", seed=100, tolerance=1e-4)
def _svr_vs_qp(c):
    worst = 0.0
    for s in range(10):
        r = RngState(c.seed + s)
        n, d = 8, 2
        X = r.normal(size=(n, d))
        y = X @ r.normal(size=d) + 0.3 * r.normal(size=n)
        C = float(r.uniform(0.5, 10.0))
        eps = float(r.uniform(0.05, 0.5))
        model = svr_fit(X, y, C=C, epsilon=eps)
        mine = model.primal_objective(X, y)
        oracle_val, _ = qp_grid_oracle(X, y, C, eps)
        rel = abs(mine - oracle_val) / max(abs(oracle_val), 1e-12)
        worst = max(worst, rel)
    return _result(c, worst, f"worst relative gap {worst:.2e}")


@case("rfe_planted_relevance", "featsel", seed=3000, tolerance=0.0)
def _rfe_planted(c):
    wins = 0
    for s in range(10):
        r = RngState(c.seed + s)
        X = r.uniform(0, 1, size=(120, 62))
        y = 3.0 * X[:, 1] + 0.01 * r.normal(size=120)
        mask, _ = featsel.rfe_svr_select(X, y, k=30, drop_per_round=8, epsilon=0.2, tol=1e-3)
        wins += int(mask.bits[1])
    return _result(c, 10.0 - wins, f"{wins}/10 seeds")


@case("rfe_duplicate_feature", "featsel", seed=3100, tolerance=0.0)
def _rfe_duplicate(c):
    r = RngState(c.seed)
    X = r.uniform(0, 1, size=(120, 62))
    X[:, 9] = X[:, 1]  # exact duplicate of the relevant feature
    y = 3.0 * X[:, 1] + 0.01 * r.normal(size=120)
    mask, _ = featsel.rfe_svr_select(X, y, k=30, drop_per_round=8, epsilon=0.2, tol=1e-3)
    dev = 0.0 if (mask.bits[1] or mask.bits[9]) else 1.0
    return _result(c, dev, f"kept F2={mask.bits[1]} F10={mask.bits[9]}")


@case("lasso_lambda_max", "featsel", seed=8, tolerance=0.0)
def _lasso_lambda_max(c):
    r = RngState(c.seed)
    X = r.normal(size=(60, 10))
    X = X - X.mean(axis=0)
    y = r.normal(size=60)
    y = y - y.mean()
    lam_max = float(np.max(np.abs(2.0 * X.T @ y)))
    beta = featsel.lasso_coordinate_descent(X, y, lam_max * (1 + 1e-10))
    return _result(c, float(np.abs(beta).max()))


@case("lasso_orthonormal_soft_threshold", "featsel", seed=9, tolerance=1e-6)
def _lasso_orthonormal(c):
    r = RngState(c.seed)
    Q, _ = np.linalg.qr(r.normal(size=(50, 8)))
    beta_true = 2.0 * r.normal(size=8)
    y = Q @ beta_true
    lam = 0.8
    beta = featsel.lasso_coordinate_descent(Q, y, lam)
    ols = Q.T @ y
    oracle = np.array([featsel.soft_threshold(b, lam / 2.0) for b in ols])
    return _result(c, float(np.abs(beta - oracle).max()))


# ---------------------------------------------------------------------------
# models


@case("narmax_ar1_recovery", "models", seed=21, tolerance=0.02)
def _narmax_ar1(c):
    r = RngState(c.seed)
    n = 2000
    y = np.zeros(n)
    for t in range(1, n):
        y[t] = 0.8 * y[t - 1] + 0.01 * r.normal()
    cfg = models.NarmaxConfig(y_lags=1, x_lags=0, resid_lags=0, degree=1, grid_search=False)
    model = models.narmax_fit(y, np.zeros((n, 1)), cfg)
    coef = model.coefficients[model.term_names.index("y[t-1]")]
    return _result(c, abs(coef - 0.8), f"coef {coef:.4f}")


@case("narmax_exogenous_identification", "models", seed=22, tolerance=1e-3)
def _narmax_exo(c):
    r = RngState(c.seed)
    n = 500
    x = r.uniform(-1, 1, size=(n, 1))
    y = 2.0 * x[:, 0]
    cfg = models.NarmaxConfig(y_lags=0, x_lags=0, resid_lags=0, degree=1, grid_search=False)
    model = models.narmax_fit(y, x, cfg)
    coef = model.coefficients[model.term_names.index("x0[t-0]")]
    return _result(c, abs(coef - 2.0), f"coef {coef:.6f}")


# ---------------------------------------------------------------------------
# evaluation


@case("metrics_hand_eval", "evaluation", tolerance=1e-10)
def _metrics_hand(c):
    rep = evaluation.metrics([100.0], [50.0])
    mae = abs(100.0 - 50.0)
    rmse = math.sqrt((100.0 - 50.0) ** 2)
    mape = 100.0 * abs((100.0 - 50.0) / 100.0)
    smape = 100.0 * abs(100.0 - 50.0) / ((abs(100.0) + abs(50.0)) / 2.0)
    dev = max(
        abs(rep.mae - mae), abs(rep.rmse - rmse), abs(rep.mape - mape), abs(rep.smape - smape)
    )
    return _result(c, dev, f"smape {rep.smape:.4f}")


@case("dm_constructed_sign", "evaluation", seed=17, tolerance=0.0)
def _dm_sign(c):
    r = RngState(c.seed)
    T = 200
    e2 = r.normal(size=T)
    e1 = np.sign(e2) * (np.abs(e2) + 1.0)  # |e1| = |e2| + 1 elementwise
    res = evaluation.dm_test(e1, e2, side="second-better")
    d = np.abs(e1) - np.abs(e2)
    d_bar = d.mean()
    se = math.sqrt(float(((d - d_bar) ** 2).mean()) / T)
    oracle_raw = d_bar / se
    ok = (
        res.statistic > 0
        and res.p_value < 0.01
        and abs(res.raw_statistic - oracle_raw) < 1e-10
    )
    return _result(c, 0.0 if ok else 1.0, f"stat {res.statistic:.2f} p {res.p_value:.2e}")


@case("experiment_stats_order_statistics", "evaluation", tolerance=1e-12)
def _stats_order(c):
    s = evaluation.ExperimentStats.from_values(list(range(1, 11)))
    # linear-interpolation percentile rule by hand: p25 at rank 3.25, p75 at 7.75
    dev = max(
        abs(s.mean - 5.5),
        abs(s.p50 - 5.5),
        abs(s.min - 1.0),
        abs(s.max - 10.0),
        abs(s.p25 - 3.25),
        abs(s.p75 - 7.75),
    )
    return _result(c, dev)


# ---------------------------------------------------------------------------
# explain


@case("kernel_shap_linear_exact", "explain", seed=30, tolerance=1e-3)
def _shap_linear(c):
    r = RngState(c.seed)
    beta = np.array([3.0, 2.0])
    bg = r.normal(size=(50, 2))
    x = np.array([1.5, -0.5])
    expl = explain.kernel_shap(lambda Z: Z @ beta, x, bg)
    oracle = beta * (x - bg.mean(axis=0))
    return _result(c, float(np.abs(expl.values - oracle).max()))


@case("kernel_shap_matches_enumeration", "explain", seed=31, tolerance=1e-3)
def _shap_vs_exact(c):
    r = RngState(c.seed)
    d = 8
    w1 = r.normal(size=(d, 5))
    w2 = r.normal(size=5)
    model = lambda Z: np.tanh(Z @ w1) @ w2  # noqa: E731
    bg = r.normal(size=(20, d))
    x = r.normal(size=d)
    ks = explain.kernel_shap(model, x, bg, n_coalitions=2**d - 2)
    es = explain.exact_shapley(model, x, bg)
    return _result(c, float(np.abs(ks.values - es.values).max()))


@case("surrogate_within_2x_of_ols", "explain", seed=32, tolerance=2.0)
def _surrogate_vs_ols(c):
    r = RngState(c.seed)
    n, d = 150, 6
    X = r.uniform(0, 1, size=(n, d))
    beta = r.normal(size=d)
    y = X @ beta + 0.05 * r.normal(size=n)
    model, _ = explain.fit_surrogate_svr(X, y)
    cut = int(n * 0.8)
    val_mse = float(np.mean((model.predict(X[cut:]) - y[cut:]) ** 2))
    ones = np.column_stack([X[:cut], np.ones(cut)])
    coef = least_squares(ones, y[:cut])
    ols_mse = float(np.mean((np.column_stack([X[cut:], np.ones(n - cut)]) @ coef - y[cut:]) ** 2))
    return _result(c, val_mse / ols_mse, f"svr {val_mse:.2e} ols {ols_mse:.2e}")


@case("dependence_collinear_for_additive", "explain", seed=33, tolerance=1e-3)
def _dependence_collinear(c):
    r = RngState(c.seed)
    beta = np.array([3.0, -1.0, 0.5])
    bg = r.normal(size=(40, 3))
    model = lambda Z: Z @ beta  # noqa: E731
    instances = r.normal(size=(25, 3))
    expls = [explain.kernel_shap(model, inst, bg) for inst in instances]
    dep = explain.dependence_export(expls, 0)
    vals = np.array([row[0] for row in dep["rows"]])
    phis = np.array([row[1] for row in dep["rows"]])
    slope = np.polyfit(vals, phis, 1)[0]
    resid = phis - np.polyval(np.polyfit(vals, phis, 1), vals)
    r2 = 1.0 - resid.var() / phis.var()
    ok = abs(slope - beta[0]) < 1e-6 and r2 > 0.999
    return _result(c, 0.0 if ok else 1.0, f"slope {slope:.6f} R2 {r2:.6f}")


# ---------------------------------------------------------------------------
# cli (budget smoke, slow)


@case("cli_full_sweep_budget", "cli", seed=0, tolerance=0.0, slow=True)
def _cli_sweep(c):
    import json
    import os
    import subprocess
    import sys
    import tempfile

    budget_s = 30 * 60
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "data.csv")
        cfg_path = os.path.join(tmp, "cfg.json")
        out = os.path.join(tmp, "out")
        start = time.time()
        subprocess.run(
            [sys.executable, "-m", "dayahead.cli", "synth", "--seed", "1", "--days", "400", "--out", data],
            check=True,
        )
        cfg = {
            "data": data,
            "models": list(models.MODEL_IDS),
            "seeds": {"base": 0, "count": 2},
            "split": {"test_len": 10},
            "pipeline": {"window": 14, "retrain_every": 1000},
            "network": {
                "lstm_units": 12,
                "dense_units": 8,
                "decoder_units": 12,
                "conv_filters": 8,
                "convlstm_filters": 6,
            },
            "train": {"max_epochs": 40, "batch_size": 32, "patience": 10, "learning_rate": 5e-3},
            "selector": {
                "k": 30,
                "pso_iterations": 30,
                "pso_particles": 12,
                "ga_generations": 20,
                "ga_population": 40,
                "rfe_drop_per_round": 8,
                "rfe_epsilon": 0.2,
                "rfe_tol": 1e-3,
            },
            "narmax": {"grid_lags": [1, 7], "grid_degrees": [1, 2]},
        }
        with open(cfg_path, "w", encoding="utf-8") as fh:
            json.dump(cfg, fh)
        subprocess.run(
            [sys.executable, "-m", "dayahead.cli", "evaluate", "--config", cfg_path, "--out-dir", out],
            check=True,
            capture_output=True,
        )
        elapsed = time.time() - start
        report = json.load(open(os.path.join(out, "report.json"), encoding="utf-8"))
        complete = len(report["models"]) == 14
    dev = 0.0 if (elapsed < budget_s and complete) else 1.0
    return _result(c, dev, f"{elapsed:.0f}s for 14 models x 2 seeds")


# ---------------------------------------------------------------------------
# run + report


@dataclass
class OracleReport:
    results: list[CaseResult]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            flag = "PASS" if r.passed else "FAIL"
            lines.append(
                f"[{flag}] {r.module}/{r.name}: deviation {r.deviation:.3e}"
                f" (tol {r.tolerance:.1e}) {r.detail}"
            )
        lines.append(f"{sum(r.passed for r in self.results)}/{len(self.results)} oracle cases passed")
        return "\n".join(lines) + "\n"

    def to_junit_xml(self) -> str:
        suite = ElementTree.Element(
            "testsuite",
            name="oracles",
            tests=str(len(self.results)),
            failures=str(sum(not r.passed for r in self.results)),
        )
        for r in self.results:
            tc = ElementTree.SubElement(suite, "testcase", classname=r.module, name=r.name)
            if not r.passed:
                failure = ElementTree.SubElement(tc, "failure", message=r.detail or "tolerance exceeded")
                failure.text = f"deviation {r.deviation!r} > tolerance {r.tolerance!r}"
        return ElementTree.tostring(suite, encoding="unicode")


def list_cases(module: str | None = None, include_slow: bool = False) -> list[OracleCase]:
    return [
        c
        for c in _CASES
        if (module is None or c.module == module) and (include_slow or not c.slow)
    ]


def run_oracles(module: str | None = None, include_slow: bool = False) -> OracleReport:
    """Execute the oracle cases (optionally filtered by module) and report."""
    results = []
    for c in list_cases(module, include_slow):
        try:
            results.append(c.runner(c))
        except DayaheadError as exc:
            results.append(CaseResult(c.name, c.module, False, math.inf, c.tolerance, str(exc)))
    return OracleReport(results)


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="run the oracle suite")
    parser.add_argument("--module")
    parser.add_argument("--include-slow", action="store_true")
    parser.add_argument("--junit-out")
    args = parser.parse_args(argv)
    report = run_oracles(args.module, args.include_slow)
    print(report.to_text(), end="")
    if args.junit_out:
        with open(args.junit_out, "w", encoding="utf-8") as fh:
            fh.write(report.to_junit_xml())
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    import sys

    sys.exit(main())
