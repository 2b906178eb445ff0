"""Network assembly, Adam optimization, training loop, and gradient checking."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError, TrainingFailure
from ..numkernel import RngState
from .layers import (
    Conv1dLayer,
    ConvLstmLayer,
    DenseLayer,
    FlattenLayer,
    Layer,
    LstmLayer,
    MaxPoolLayer,
)


@dataclass(frozen=True)
class LayerSpec:
    """One layer descriptor: kind in {lstm, dense, conv1d, maxpool, flatten, convlstm}."""

    kind: str
    options: tuple = ()

    def opts(self) -> dict:
        return dict(self.options)

    @staticmethod
    def lstm(units: int, output_tanh: bool = True) -> "LayerSpec":
        return LayerSpec("lstm", (("units", units), ("output_tanh", output_tanh)))

    @staticmethod
    def dense(units: int, activation: str = "linear") -> "LayerSpec":
        return LayerSpec("dense", (("units", units), ("activation", activation)))

    @staticmethod
    def conv1d(filters: int, kernel: int) -> "LayerSpec":
        return LayerSpec("conv1d", (("filters", filters), ("kernel", kernel)))

    @staticmethod
    def maxpool(width: int) -> "LayerSpec":
        return LayerSpec("maxpool", (("width", width),))

    @staticmethod
    def flatten() -> "LayerSpec":
        return LayerSpec("flatten")

    @staticmethod
    def convlstm(filters: int, kernel: int, output_tanh: bool = True) -> "LayerSpec":
        return LayerSpec(
            "convlstm", (("filters", filters), ("kernel", kernel), ("output_tanh", output_tanh))
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "options": dict(self.options)}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(d["kind"], tuple(sorted(d["options"].items())))


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer descriptors plus the input window geometry."""

    layers: tuple[LayerSpec, ...]
    window: int
    n_features: int

    def to_dict(self) -> dict:
        return {
            "layers": [l.to_dict() for l in self.layers],
            "window": self.window,
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(tuple(LayerSpec.from_dict(l) for l in d["layers"]), d["window"], d["n_features"])


class Network:
    """A spec instantiated into concrete layers with composed shapes."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.layers: list[Layer] = []
        shape: tuple = (spec.window, spec.n_features)  # per-sample shape, batch implicit
        for ls in spec.layers:
            o = ls.opts()
            if ls.kind == "lstm":
                if len(shape) == 2:
                    in_dim = shape[1]
                elif len(shape) == 1:
                    in_dim = shape[0]
                else:
                    raise ShapeError(f"lstm cannot consume shape {shape}")
                layer = LstmLayer(in_dim, o["units"], o.get("output_tanh", True))
                shape = (o["units"],)
            elif ls.kind == "dense":
                if len(shape) != 1:
                    raise ShapeError(f"dense needs a vector input, got shape {shape}")
                layer = DenseLayer(shape[0], o["units"], o.get("activation", "linear"))
                shape = (o["units"],)
            elif ls.kind == "conv1d":
                if len(shape) != 2:
                    raise ShapeError(f"conv1d needs (time, channels) input, got {shape}")
                layer = Conv1dLayer(shape[0], shape[1], o["filters"], o["kernel"])
                shape = (layer.out_len, o["filters"])
            elif ls.kind == "maxpool":
                if len(shape) != 2:
                    raise ShapeError(f"maxpool needs (time, channels) input, got {shape}")
                layer = MaxPoolLayer(shape[0], shape[1], o["width"])
                shape = (layer.out_len, shape[1])
            elif ls.kind == "flatten":
                layer = FlattenLayer()
                shape = (int(np.prod(shape)),)
            elif ls.kind == "convlstm":
                if len(shape) != 2:
                    raise ShapeError(f"convlstm needs (time, features) input, got {shape}")
                layer = ConvLstmLayer(shape[1], o["filters"], o["kernel"], o.get("output_tanh", True))
                shape = (layer.out_len, o["filters"])
            else:
                raise ConfigError(f"unknown layer kind {ls.kind!r}")
            self.layers.append(layer)
        if shape != (1,):
            raise ShapeError(f"network must end in exactly one output neuron, ends in {shape}")
        self.out_shape = shape

    def init_params(self, rng: RngState) -> None:
        for i, layer in enumerate(self.layers):
            layer.init_params(rng.child(i))

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x[:, 0]

    def backward(self, dout: np.ndarray) -> None:
        grad = dout[:, None]
        for layer in reversed(self.layers):
            grad = layer.backward(grad)

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forward pass on (n, window, features) or a single (window, features) sample."""
        single = x.ndim == 2
        out = self.forward(x[None] if single else x)
        return float(out[0]) if single else out

    def named_params(self) -> dict[str, np.ndarray]:
        return {
            f"{i}.{name}": tensor
            for i, layer in enumerate(self.layers)
            for name, tensor in layer.params.items()
        }

    def named_grads(self) -> dict[str, np.ndarray]:
        return {
            f"{i}.{name}": tensor
            for i, layer in enumerate(self.layers)
            for name, tensor in layer.grads.items()
        }

    def get_state(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_params().items()}

    def set_state(self, state: dict[str, np.ndarray]) -> None:
        for key, value in state.items():
            idx, name = key.split(".", 1)
            self.layers[int(idx)].params[name] = value.copy()

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "params": {k: v.tolist() for k, v in self.named_params().items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        net = cls(NetworkSpec.from_dict(d["spec"]))
        net.set_state({k: np.asarray(v, dtype=np.float64) for k, v in d["params"].items()})
        return net


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((pred - target) ** 2))


@dataclass
class AdamOptimizer:
    """Adam with bias correction; moments keyed like named_params."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        t = self.step_count
        for key, g in grads.items():
            if key not in self.m:
                self.m[key] = np.zeros_like(g)
                self.v[key] = np.zeros_like(g)
            self.m[key] = self.beta1 * self.m[key] + (1 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1 - self.beta2) * g * g
            m_hat = self.m[key] / (1 - self.beta1**t)
            v_hat = self.v[key] / (1 - self.beta2**t)
            params[key] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    """Training-loop knobs; defaults are documented artifact choices."""

    max_epochs: int = 200
    batch_size: int = 32
    patience: int = 20
    learning_rate: float = 1e-3

    def __post_init__(self):
        if min(self.max_epochs, self.batch_size, self.patience) < 1 or self.learning_rate <= 0:
            raise ConfigError("all TrainConfig fields must be positive")

    def to_dict(self) -> dict:
        return {
            "max_epochs": self.max_epochs,
            "batch_size": self.batch_size,
            "patience": self.patience,
            "learning_rate": self.learning_rate,
        }


@dataclass
class TrainedNetwork:
    network: Network
    train_curve: list[float]
    val_curve: list[float]
    best_epoch: int
    epochs_run: int


def train_network(
    spec: NetworkSpec,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray | None,
    y_val: np.ndarray | None,
    config: TrainConfig,
    rng: RngState,
) -> TrainedNetwork:
    """Minimize MSE with Adam; early-stop on validation MSE and keep the best snapshot.

    Deterministic for a fixed rng: initialization and per-epoch shuffles
    all draw from it in a fixed order.
    """
    if len(x_train) == 0:
        raise ConfigError("empty training set")
    net = Network(spec)
    net.init_params(rng.child(0))
    shuffle_rng = rng.child(1)
    optimizer = AdamOptimizer(learning_rate=config.learning_rate)

    has_val = x_val is not None and len(x_val) > 0
    best_state = net.get_state()
    best_val = np.inf
    best_epoch = 0
    since_best = 0
    train_curve: list[float] = []
    val_curve: list[float] = []

    n = len(x_train)
    for epoch in range(config.max_epochs):
        order = shuffle_rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            net.zero_grads()
            pred = net.forward(xb)
            loss = mse(pred, yb)
            if not np.isfinite(loss):
                raise TrainingFailure(f"loss became non-finite at epoch {epoch}", epoch=epoch)
            net.backward(2.0 * (pred - yb) / len(yb))
            optimizer.step(net.named_params(), net.named_grads())

        train_loss = mse(net.forward(x_train), y_train)
        if not np.isfinite(train_loss):
            raise TrainingFailure(f"loss became non-finite at epoch {epoch}", epoch=epoch)
        train_curve.append(train_loss)
        if has_val:
            val_loss = mse(net.forward(x_val), y_val)
            val_curve.append(val_loss)
            if val_loss < best_val:
                best_val = val_loss
                best_state = net.get_state()
                best_epoch = epoch
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    break
        else:
            best_state = net.get_state()
            best_epoch = epoch

    net.set_state(best_state)
    return TrainedNetwork(net, train_curve, val_curve, best_epoch, len(train_curve))


def gradient_check(spec: NetworkSpec, x: np.ndarray, y: np.ndarray, rng: RngState, step: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central finite differences.

    Relative error uses max(|analytic|, |numeric|, 1e-6) as denominator
    so structurally-zero gradients compare cleanly.
    """
    net = Network(spec)
    net.init_params(rng)
    net.zero_grads()
    pred = net.forward(x)
    net.backward(2.0 * (pred - y) / len(y))
    analytic = {k: v.copy() for k, v in net.named_grads().items()}

    params = net.named_params()

    def loss_at() -> float:
        return mse(net.forward(x), y)

    worst = 0.0
    for key, tensor in params.items():
        flat = tensor.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = loss_at()
            flat[j] = orig - step
            down = loss_at()
            flat[j] = orig
            numeric = (up - down) / (2 * step)
            a = analytic[key].reshape(-1)[j]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, rel)
    return worst
