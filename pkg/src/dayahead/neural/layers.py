"""Differentiable layers operating on batched arrays.

Conventions: batch axis first everywhere. Sequence inputs are
(batch, time, features); vector inputs are (batch, features). Each
layer caches what its backward pass needs during forward, accumulates
parameter gradients into ``grads``, and returns the gradient w.r.t. its
input from ``backward``.

The recurrent cell uses peephole connections on all three gates, with
the forget/input/output gates reading the previous cell state, and the
hidden output h = o * tanh(c). Setting ``output_tanh=False`` switches to
the raw h = o * c variant so both forms stay testable.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..numkernel import RngState, sigmoid


class Layer:
    """Base class; subclasses fill params/grads dicts keyed by tensor name."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def init_params(self, rng: RngState) -> None:
        pass

    def zero_grads(self) -> None:
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _uniform_init(rng: RngState, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


class DenseLayer(Layer):
    """Affine map with optional elementwise activation."""

    def __init__(self, in_dim: int, units: int, activation: str = "linear"):
        super().__init__()
        if activation not in ("linear", "tanh", "sigmoid"):
            raise ShapeError(f"unsupported dense activation {activation!r}")
        self.in_dim = in_dim
        self.units = units
        self.activation = activation
        self.params = {"W": np.zeros((in_dim, units)), "b": np.zeros(units)}
        self.zero_grads()

    def init_params(self, rng: RngState) -> None:
        bound = 1.0 / np.sqrt(max(1, self.in_dim))
        self.params["W"] = _uniform_init(rng, (self.in_dim, self.units), bound)
        self.params["b"] = np.zeros(self.units)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"dense expects (batch, {self.in_dim}), got {x.shape}")
        self._x = x
        z = x @ self.params["W"] + self.params["b"]
        if self.activation == "tanh":
            self._y = np.tanh(z)
        elif self.activation == "sigmoid":
            self._y = sigmoid(z)
        else:
            self._y = z
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self.activation == "tanh":
            dz = dy * (1.0 - self._y**2)
        elif self.activation == "sigmoid":
            dz = dy * self._y * (1.0 - self._y)
        else:
            dz = dy
        self.grads["W"] += self._x.T @ dz
        self.grads["b"] += dz.sum(axis=0)
        return dz @ self.params["W"].T


class LstmLayer(Layer):
    """Peephole LSTM consuming a sequence and emitting its final hidden state.

    A (batch, features) input is treated as a one-step sequence, which is
    how a decoder consumes the repeated encoder vector.
    """

    GATES = ("f", "i", "o")

    def __init__(self, in_dim: int, units: int, output_tanh: bool = True):
        super().__init__()
        self.in_dim = in_dim
        self.units = units
        self.output_tanh = output_tanh
        H, D = units, in_dim
        names = {}
        for g in ("f", "i", "o", "c"):
            names[f"Wx{g}"] = np.zeros((D, H))
            names[f"Wh{g}"] = np.zeros((H, H))
            names[f"b{g}"] = np.zeros(H)
        for g in self.GATES:
            names[f"wc{g}"] = np.zeros(H)
        self.params = names
        self.zero_grads()

    def init_params(self, rng: RngState) -> None:
        bound = 1.0 / np.sqrt(max(1, self.units))
        for name, value in self.params.items():
            if name.startswith("b"):
                self.params[name] = np.zeros_like(value)
            else:
                self.params[name] = _uniform_init(rng, value.shape, bound)

    def _as_sequence(self, x: np.ndarray) -> np.ndarray:
        if x.ndim == 2:
            return x[:, None, :]
        if x.ndim == 3:
            return x
        raise ShapeError(f"lstm expects (batch, time, features) or (batch, features), got {x.shape}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        xs = self._as_sequence(x)
        if xs.shape[2] != self.in_dim:
            raise ShapeError(f"lstm expects {self.in_dim} features, got {xs.shape[2]}")
        self._input_was_vector = x.ndim == 2
        B, T, _ = xs.shape
        H = self.units
        p = self.params
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        cache = []
        for t in range(T):
            xt = xs[:, t, :]
            af = xt @ p["Wxf"] + h @ p["Whf"] + c * p["wcf"] + p["bf"]
            ai = xt @ p["Wxi"] + h @ p["Whi"] + c * p["wci"] + p["bi"]
            ao = xt @ p["Wxo"] + h @ p["Who"] + c * p["wco"] + p["bo"]
            ag = xt @ p["Wxc"] + h @ p["Whc"] + p["bc"]
            f = sigmoid(af)
            i = sigmoid(ai)
            o = sigmoid(ao)
            g = np.tanh(ag)
            c_new = f * c + i * g
            hc = np.tanh(c_new) if self.output_tanh else c_new
            h_new = o * hc
            cache.append((xt, h, c, f, i, o, g, c_new, hc))
            h, c = h_new, c_new
        self._xs = xs
        self._cache = cache
        self._h_final = h
        return h

    def states(self, x: np.ndarray):
        """Full per-step hidden and cell trajectories (for inspection/tests)."""
        self.forward(x)
        hs = np.stack([o * hc for (_, _, _, _, _, o, _, _, hc) in self._cache], axis=1)
        cs = np.stack([c_new for (_, _, _, _, _, _, _, c_new, _) in self._cache], axis=1)
        return hs, cs

    def backward(self, dy: np.ndarray) -> np.ndarray:
        p = self.params
        B, T, _ = self._xs.shape
        dxs = np.zeros_like(self._xs)
        dh = dy.copy()
        dc = np.zeros((B, self.units))
        for t in range(T - 1, -1, -1):
            xt, h_prev, c_prev, f, i, o, g, c_new, hc = self._cache[t]
            if self.output_tanh:
                dc_t = dc + dh * o * (1.0 - hc**2)
            else:
                dc_t = dc + dh * o
            dao = dh * hc * o * (1.0 - o)
            daf = dc_t * c_prev * f * (1.0 - f)
            dai = dc_t * g * i * (1.0 - i)
            dag = dc_t * i * (1.0 - g**2)

            self.grads["Wxf"] += xt.T @ daf
            self.grads["Wxi"] += xt.T @ dai
            self.grads["Wxo"] += xt.T @ dao
            self.grads["Wxc"] += xt.T @ dag
            self.grads["Whf"] += h_prev.T @ daf
            self.grads["Whi"] += h_prev.T @ dai
            self.grads["Who"] += h_prev.T @ dao
            self.grads["Whc"] += h_prev.T @ dag
            self.grads["wcf"] += (daf * c_prev).sum(axis=0)
            self.grads["wci"] += (dai * c_prev).sum(axis=0)
            self.grads["wco"] += (dao * c_prev).sum(axis=0)
            self.grads["bf"] += daf.sum(axis=0)
            self.grads["bi"] += dai.sum(axis=0)
            self.grads["bo"] += dao.sum(axis=0)
            self.grads["bc"] += dag.sum(axis=0)

            dxs[:, t, :] = daf @ p["Wxf"].T + dai @ p["Wxi"].T + dao @ p["Wxo"].T + dag @ p["Wxc"].T
            dh = daf @ p["Whf"].T + dai @ p["Whi"].T + dao @ p["Who"].T + dag @ p["Whc"].T
            dc = dc_t * f + daf * p["wcf"] + dai * p["wci"] + dao * p["wco"]
        return dxs[:, 0, :] if self._input_was_vector else dxs


def conv1d_valid(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Valid convolution along axis 1: x (B, L, Cin), w (k, Cin, Cout)."""
    k = w.shape[0]
    L_out = x.shape[1] - k + 1
    out = np.zeros((x.shape[0], L_out, w.shape[2]))
    for j in range(k):
        out += x[:, j : j + L_out, :] @ w[j]
    return out


def conv1d_valid_backward(x: np.ndarray, w: np.ndarray, dout: np.ndarray):
    k = w.shape[0]
    L_out = dout.shape[1]
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    for j in range(k):
        dx[:, j : j + L_out, :] += dout @ w[j].T
        dw[j] = np.einsum("blc,blo->co", x[:, j : j + L_out, :], dout)
    return dx, dw


def _same_pad_widths(k: int) -> tuple[int, int]:
    left = (k - 1) // 2
    return left, k - 1 - left


def conv1d_same(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Same-length convolution along axis 1 (zero padding)."""
    left, right = _same_pad_widths(w.shape[0])
    xp = np.pad(x, ((0, 0), (left, right), (0, 0)))
    return conv1d_valid(xp, w)


def conv1d_same_backward(x: np.ndarray, w: np.ndarray, dout: np.ndarray):
    left, right = _same_pad_widths(w.shape[0])
    xp = np.pad(x, ((0, 0), (left, right), (0, 0)))
    dxp, dw = conv1d_valid_backward(xp, w, dout)
    L = x.shape[1]
    return dxp[:, left : left + L, :], dw


class Conv1dLayer(Layer):
    """Valid 1-D convolution along the time axis; features act as channels."""

    def __init__(self, in_len: int, in_channels: int, filters: int, kernel: int):
        super().__init__()
        if kernel > in_len:
            raise ShapeError(f"kernel {kernel} exceeds sequence length {in_len}")
        self.in_len = in_len
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        self.out_len = in_len - kernel + 1
        self.params = {"W": np.zeros((kernel, in_channels, filters)), "b": np.zeros(filters)}
        self.zero_grads()

    def init_params(self, rng: RngState) -> None:
        bound = 1.0 / np.sqrt(max(1, self.kernel * self.in_channels))
        self.params["W"] = _uniform_init(rng, self.params["W"].shape, bound)
        self.params["b"] = np.zeros(self.filters)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.in_len or x.shape[2] != self.in_channels:
            raise ShapeError(
                f"conv1d expects (batch, {self.in_len}, {self.in_channels}), got {x.shape}"
            )
        self._x = x
        return conv1d_valid(x, self.params["W"]) + self.params["b"]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, dw = conv1d_valid_backward(self._x, self.params["W"], dy)
        self.grads["W"] += dw
        self.grads["b"] += dy.sum(axis=(0, 1))
        return dx


class MaxPoolLayer(Layer):
    """Max over non-overlapping windows along the time axis; remainder rows drop."""

    def __init__(self, in_len: int, channels: int, width: int):
        super().__init__()
        if width < 1 or width > in_len:
            raise ShapeError(f"pool width {width} invalid for length {in_len}")
        self.in_len = in_len
        self.channels = channels
        self.width = width
        self.out_len = in_len // width

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.in_len or x.shape[2] != self.channels:
            raise ShapeError(f"maxpool expects (batch, {self.in_len}, {self.channels}), got {x.shape}")
        B = x.shape[0]
        used = self.out_len * self.width
        windows = x[:, :used, :].reshape(B, self.out_len, self.width, self.channels)
        self._argmax = windows.argmax(axis=2)
        self._in_shape = x.shape
        return windows.max(axis=2)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        B = dy.shape[0]
        dx = np.zeros(self._in_shape)
        used = self.out_len * self.width
        dwin = np.zeros((B, self.out_len, self.width, self.channels))
        b_idx, o_idx, c_idx = np.ogrid[:B, : self.out_len, : self.channels]
        dwin[b_idx, o_idx, self._argmax, c_idx] = dy
        dx[:, :used, :] = dwin.reshape(B, used, self.channels)
        return dx


class FlattenLayer(Layer):
    """Concatenate all non-batch axes into one vector."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy.reshape(self._shape)


class ConvLstmLayer(Layer):
    """1-D convolutional LSTM over the feature axis.

    Each step's feature vector is treated as a single-channel map of
    length D. Input-to-gate transitions are valid convolutions (map
    length becomes P = D - k + 1); state-to-state transitions are
    same-padded convolutions over the P positions with ``filters``
    channels. Peepholes act elementwise on the full (P, filters) state.
    Output is the final hidden state map (batch, P, filters).
    """

    def __init__(self, in_dim: int, filters: int, kernel: int, output_tanh: bool = True):
        super().__init__()
        if kernel > in_dim:
            raise ShapeError(f"kernel {kernel} exceeds feature count {in_dim}")
        self.in_dim = in_dim
        self.filters = filters
        self.kernel = kernel
        self.output_tanh = output_tanh
        self.out_len = in_dim - kernel + 1
        P, F, k = self.out_len, filters, kernel
        names = {}
        for g in ("f", "i", "o", "c"):
            names[f"Wx{g}"] = np.zeros((k, 1, F))
            names[f"Wh{g}"] = np.zeros((k, F, F))
            names[f"b{g}"] = np.zeros(F)
        for g in ("f", "i", "o"):
            names[f"wc{g}"] = np.zeros((P, F))
        self.params = names
        self.zero_grads()

    def init_params(self, rng: RngState) -> None:
        bound = 1.0 / np.sqrt(max(1, self.kernel * self.filters))
        for name, value in self.params.items():
            if name.startswith("b"):
                self.params[name] = np.zeros_like(value)
            else:
                self.params[name] = _uniform_init(rng, value.shape, bound)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"convlstm expects (batch, time, {self.in_dim}), got {x.shape}")
        B, T, D = x.shape
        P, F = self.out_len, self.filters
        p = self.params
        h = np.zeros((B, P, F))
        c = np.zeros((B, P, F))
        cache = []
        for t in range(T):
            xt = x[:, t, :, None]  # (B, D, 1)
            af = conv1d_valid(xt, p["Wxf"]) + conv1d_same(h, p["Whf"]) + c * p["wcf"] + p["bf"]
            ai = conv1d_valid(xt, p["Wxi"]) + conv1d_same(h, p["Whi"]) + c * p["wci"] + p["bi"]
            ao = conv1d_valid(xt, p["Wxo"]) + conv1d_same(h, p["Who"]) + c * p["wco"] + p["bo"]
            ag = conv1d_valid(xt, p["Wxc"]) + conv1d_same(h, p["Whc"]) + p["bc"]
            f = sigmoid(af)
            i = sigmoid(ai)
            o = sigmoid(ao)
            g = np.tanh(ag)
            c_new = f * c + i * g
            hc = np.tanh(c_new) if self.output_tanh else c_new
            h_new = o * hc
            cache.append((xt, h, c, f, i, o, g, c_new, hc))
            h, c = h_new, c_new
        self._x = x
        self._cache = cache
        return h

    def backward(self, dy: np.ndarray) -> np.ndarray:
        p = self.params
        B, T, D = self._x.shape
        dx = np.zeros_like(self._x)
        dh = dy.copy()
        dc = np.zeros_like(dy)
        for t in range(T - 1, -1, -1):
            xt, h_prev, c_prev, f, i, o, g, c_new, hc = self._cache[t]
            if self.output_tanh:
                dc_t = dc + dh * o * (1.0 - hc**2)
            else:
                dc_t = dc + dh * o
            dao = dh * hc * o * (1.0 - o)
            daf = dc_t * c_prev * f * (1.0 - f)
            dai = dc_t * g * i * (1.0 - i)
            dag = dc_t * i * (1.0 - g**2)

            dxt = np.zeros_like(xt)
            dh = np.zeros_like(h_prev)
            for gate, da in (("f", daf), ("i", dai), ("o", dao), ("c", dag)):
                dxt_g, dwx = conv1d_valid_backward(xt, p[f"Wx{gate}"], da)
                dh_g, dwh = conv1d_same_backward(h_prev, p[f"Wh{gate}"], da)
                self.grads[f"Wx{gate}"] += dwx
                self.grads[f"Wh{gate}"] += dwh
                self.grads[f"b{gate}"] += da.sum(axis=(0, 1))
                dxt += dxt_g
                dh += dh_g
            self.grads["wcf"] += (daf * c_prev).sum(axis=0)
            self.grads["wci"] += (dai * c_prev).sum(axis=0)
            self.grads["wco"] += (dao * c_prev).sum(axis=0)
            dc = dc_t * f + daf * p["wcf"] + dai * p["wci"] + dao * p["wco"]
            dx[:, t, :] = dxt[:, :, 0]
        return dx
