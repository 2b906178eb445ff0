import math

import numpy as np
import pytest

from dayahead.errors import ConfigError, ShapeError, TrainingFailure
from dayahead.neural import (
    AdamOptimizer,
    LayerSpec,
    Network,
    NetworkSpec,
    TrainConfig,
    gradient_check,
    train_network,
)
from dayahead.neural.layers import (
    Conv1dLayer,
    ConvLstmLayer,
    DenseLayer,
    FlattenLayer,
    LstmLayer,
    MaxPoolLayer,
)
from dayahead.neural.network import mse
from dayahead.numkernel import RngState


def test_lstm_zero_params_zero_states():
    layer = LstmLayer(3, 4)
    hs, cs = layer.states(RngState(1).normal(size=(2, 5, 3)))
    assert np.all(hs == 0) and np.all(cs == 0)


def test_lstm_single_step_closed_form():
    r = RngState(10)
    layer = LstmLayer(1, 1)
    for name in layer.params:
        layer.params[name] = r.normal(size=layer.params[name].shape)
    x = 0.37
    h = layer.forward(np.array([[[x]]]))
    p = {k: float(v.reshape(-1)[0]) for k, v in layer.params.items()}
    i1 = 1 / (1 + math.exp(-(p["Wxi"] * x + p["bi"])))
    o1 = 1 / (1 + math.exp(-(p["Wxo"] * x + p["bo"])))
    c1 = i1 * math.tanh(p["Wxc"] * x + p["bc"])
    assert float(h[0, 0]) == pytest.approx(o1 * math.tanh(c1), abs=1e-14)


def test_lstm_forward_deterministic():
    r = RngState(3)
    layer = LstmLayer(2, 3)
    layer.init_params(r)
    x = r.normal(size=(4, 6, 2))
    assert np.array_equal(layer.forward(x), layer.forward(x))


def test_lstm_literal_output_variant():
    r = RngState(5)
    layer = LstmLayer(1, 1, output_tanh=False)
    for name in layer.params:
        layer.params[name] = r.normal(size=layer.params[name].shape)
    x = 0.8
    h = layer.forward(np.array([[[x]]]))
    p = {k: float(v.reshape(-1)[0]) for k, v in layer.params.items()}
    i1 = 1 / (1 + math.exp(-(p["Wxi"] * x + p["bi"])))
    o1 = 1 / (1 + math.exp(-(p["Wxo"] * x + p["bo"])))
    c1 = i1 * math.tanh(p["Wxc"] * x + p["bc"])
    assert float(h[0, 0]) == pytest.approx(o1 * c1, abs=1e-14)


def test_gate_ranges():
    r = RngState(8)
    layer = LstmLayer(3, 5)
    layer.init_params(r)
    layer.forward(r.normal(size=(3, 7, 3)) * 3)
    for (_, _, _, f, i, o, g, _, _) in layer._cache:
        for gate in (f, i, o):
            assert np.all(gate > 0) and np.all(gate < 1)
        assert np.all(g > -1) and np.all(g < 1)


def test_lstm_backward_zero_upstream():
    r = RngState(4)
    layer = LstmLayer(2, 3)
    layer.init_params(r)
    layer.zero_grads()
    out = layer.forward(r.normal(size=(2, 4, 2)))
    layer.backward(np.zeros_like(out))
    for g in layer.grads.values():
        assert np.all(g == 0)


@pytest.mark.parametrize("output_tanh", [True, False])
def test_lstm_gradient_check(output_tanh):
    r = RngState(21 if output_tanh else 22)
    spec = NetworkSpec(
        (LayerSpec.lstm(3, output_tanh=output_tanh), LayerSpec.dense(1)), window=4, n_features=2
    )
    err = gradient_check(spec, r.normal(size=(2, 4, 2)), r.normal(size=2), r.child(1))
    assert err < 1e-4


def test_dense_gradient_check():
    r = RngState(23)
    spec = NetworkSpec(
        (LayerSpec.flatten(), LayerSpec.dense(5, "sigmoid"), LayerSpec.dense(1)),
        window=3,
        n_features=2,
    )
    err = gradient_check(spec, r.normal(size=(3, 3, 2)), r.normal(size=3), r.child(1))
    assert err < 1e-6


def test_conv_pool_gradient_check():
    r = RngState(24)
    spec = NetworkSpec(
        (LayerSpec.conv1d(3, 2), LayerSpec.maxpool(2), LayerSpec.flatten(), LayerSpec.dense(1)),
        window=6,
        n_features=2,
    )
    err = gradient_check(spec, r.normal(size=(2, 6, 2)), r.normal(size=2), r.child(1))
    assert err < 1e-4


def test_convlstm_gradient_check():
    r = RngState(25)
    spec = NetworkSpec(
        (LayerSpec.convlstm(3, 2), LayerSpec.flatten(), LayerSpec.dense(1)),
        window=4,
        n_features=5,
    )
    err = gradient_check(spec, r.normal(size=(2, 4, 5)), r.normal(size=2), r.child(1))
    assert err < 1e-4


def test_gradient_check_many_seeds_all_layer_kinds():
    worst = 0.0
    for seed in range(20):
        r = RngState(500 + seed)
        spec = NetworkSpec((LayerSpec.lstm(3), LayerSpec.dense(1)), window=3, n_features=2)
        worst = max(worst, gradient_check(spec, r.normal(size=(2, 3, 2)), r.normal(size=2), r.child(1)))
    assert worst < 1e-4


def test_conv1d_shapes_and_kernel_guard():
    conv = Conv1dLayer(6, 2, filters=3, kernel=3)
    out = conv.forward(RngState(1).normal(size=(5, 6, 2)))
    assert out.shape == (5, 4, 3)
    with pytest.raises(ShapeError):
        Conv1dLayer(2, 1, filters=1, kernel=5)


def test_conv1d_width_one_kernel_sums_channels():
    conv = Conv1dLayer(4, 2, filters=1, kernel=1)
    conv.params["W"] = np.ones((1, 2, 1))
    x = RngState(2).normal(size=(3, 4, 2))
    out = conv.forward(x)
    assert np.allclose(out[:, :, 0], x.sum(axis=2))


def test_maxpool_example_and_remainder():
    pool = MaxPoolLayer(5, 1, 2)
    x = np.array([[[1.0], [3.0], [2.0], [5.0], [9.0]]])
    out = pool.forward(x)
    assert out[0, :, 0].tolist() == [3.0, 5.0]
    # the dropped remainder row receives exactly zero gradient
    dx = pool.backward(np.ones_like(out))
    assert dx[0, 4, 0] == 0.0
    assert dx[0, 1, 0] == 1.0 and dx[0, 3, 0] == 1.0


def test_flatten_concatenates():
    f = FlattenLayer()
    out = f.forward(np.zeros((4, 3, 2)))
    assert out.shape == (4, 6)
    assert f.backward(out).shape == (4, 3, 2)


def test_convlstm_zero_params_zero_states():
    layer = ConvLstmLayer(5, 3, 2)
    out = layer.forward(RngState(2).normal(size=(2, 4, 5)))
    assert np.all(out == 0)


def test_convlstm_width_one_matches_lstm():
    r = RngState(21)
    F = 3
    conv = ConvLstmLayer(1, F, 1)
    dense = LstmLayer(1, F)
    for g in ("f", "i", "o", "c"):
        w, wh, b = r.normal(size=F), r.normal(size=(F, F)), r.normal(size=F)
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
    assert np.abs(conv.forward(x)[:, 0, :] - dense.forward(x)).max() < 1e-10


def test_network_must_end_in_one_output():
    with pytest.raises(ShapeError):
        Network(NetworkSpec((LayerSpec.lstm(4),), window=3, n_features=2))


def test_network_shape_composition_error():
    with pytest.raises(ShapeError):
        Network(
            NetworkSpec((LayerSpec.dense(1),), window=3, n_features=2)
        )  # dense cannot eat a sequence


def test_network_serialization_round_trip():
    spec = NetworkSpec((LayerSpec.lstm(3), LayerSpec.dense(1)), window=4, n_features=2)
    net = Network(spec)
    net.init_params(RngState(6))
    clone = Network.from_dict(net.to_dict())
    x = RngState(7).normal(size=(3, 4, 2))
    assert np.array_equal(net.forward(x), clone.forward(x))


def test_adam_zero_gradient_keeps_params():
    opt = AdamOptimizer(learning_rate=0.1)
    params = {"w": np.array([1.0, -2.0])}
    opt.step(params, {"w": np.zeros(2)})
    assert params["w"].tolist() == [1.0, -2.0]
    assert opt.step_count == 1


def test_adam_constant_gradient_step_approaches_lr():
    opt = AdamOptimizer(learning_rate=1e-3)
    params = {"w": np.array([0.0])}
    g = np.array([-0.7])
    step = 0.0
    for _ in range(300):
        before = params["w"][0]
        opt.step(params, {"w": g})
        step = params["w"][0] - before
    assert abs(abs(step) - 1e-3) / 1e-3 < 0.05
    assert step > 0  # negative gradient pushes the parameter up


def test_adam_deterministic_trajectories():
    def run():
        opt = AdamOptimizer(learning_rate=1e-2)
        params = {"w": np.array([0.3])}
        r = RngState(12)
        for _ in range(50):
            opt.step(params, {"w": r.normal(size=1)})
        return params["w"][0]

    assert run() == run()


def linear_task(n=200, rng_seed=42):
    r = RngState(rng_seed)
    X = r.uniform(0, 1, size=(n, 8, 3))
    y = 0.5 * X[:, -1, 0]
    return X, y


def test_train_constant_target():
    r = RngState(31)
    X = r.uniform(0, 1, size=(120, 6, 2))
    y = np.full(120, 3.0)
    spec = NetworkSpec((LayerSpec.lstm(4), LayerSpec.dense(1)), window=6, n_features=2)
    # full batch keeps the Adam trajectory smooth near the optimum; one
    # step per epoch, so the rate must cover the bias travel to 3.0
    cfg = TrainConfig(max_epochs=600, batch_size=90, patience=200, learning_rate=5e-2)
    res = train_network(spec, X[:90], y[:90], X[90:], y[90:], cfg, RngState(1))
    assert abs(res.network.predict(X[0]) - 3.0) < 1e-3


def test_train_linear_target_reaches_low_val_mse():
    X, y = linear_task()
    spec = NetworkSpec((LayerSpec.lstm(8), LayerSpec.dense(8), LayerSpec.dense(1)), 8, 3)
    cfg = TrainConfig(max_epochs=150, batch_size=32, patience=30, learning_rate=5e-3)
    res = train_network(spec, X[:160], y[:160], X[160:], y[160:], cfg, RngState(2))
    assert min(res.val_curve) < 1e-3


def test_train_deterministic():
    X, y = linear_task(n=80)
    spec = NetworkSpec((LayerSpec.lstm(4), LayerSpec.dense(1)), 8, 3)
    cfg = TrainConfig(max_epochs=12, batch_size=16, patience=5, learning_rate=1e-3)
    a = train_network(spec, X[:60], y[:60], X[60:], y[60:], cfg, RngState(3))
    b = train_network(spec, X[:60], y[:60], X[60:], y[60:], cfg, RngState(3))
    for key, val in a.network.named_params().items():
        assert np.array_equal(val, b.network.named_params()[key])


def test_train_loss_non_increasing_full_batch():
    # documented stability setting: full-batch Adam at lr 1e-3 on the linear task
    X, y = linear_task(n=64)
    spec = NetworkSpec((LayerSpec.flatten(), LayerSpec.dense(1)), 8, 3)
    cfg = TrainConfig(max_epochs=60, batch_size=64, patience=60, learning_rate=1e-3)
    res = train_network(spec, X, y, None, None, cfg, RngState(4))
    curve = np.array(res.train_curve)
    assert np.all(np.diff(curve) <= 1e-12)


def test_train_divergence_raises_training_failure():
    X, y = linear_task(n=60)
    y = y * 1e200  # squared loss overflows immediately
    spec = NetworkSpec((LayerSpec.flatten(), LayerSpec.dense(1)), 8, 3)
    cfg = TrainConfig(max_epochs=5, batch_size=16, patience=5, learning_rate=1e-3)
    with pytest.raises(TrainingFailure) as err:
        train_network(spec, X, y, None, None, cfg, RngState(5))
    assert err.value.epoch is not None


def test_train_early_stopping_restores_best():
    X, y = linear_task(n=100)
    spec = NetworkSpec((LayerSpec.lstm(4), LayerSpec.dense(1)), 8, 3)
    cfg = TrainConfig(max_epochs=200, batch_size=16, patience=5, learning_rate=5e-3)
    res = train_network(spec, X[:70], y[:70], X[70:], y[70:], cfg, RngState(6))
    restored = mse(res.network.forward(X[70:]), y[70:])
    assert restored == pytest.approx(min(res.val_curve), rel=1e-9)
    assert res.epochs_run <= cfg.max_epochs


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=-1.0)
