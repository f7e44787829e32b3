"""A small double-precision neural network engine with hand-written gradients.

Only the fixed layer stacks needed here are supported: an embedding, a
valid 1-D convolution, global max pooling over time, dense layers and
inverted dropout. Networks are plain ``Sequential`` stacks trained with Adam
on summed per-class binary cross-entropy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .evaluation import micro_f1
from .rng import stream

LOGGER = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")
LOG_EPS = 1e-12
# keeps sigmoid outputs strictly inside (0, 1) in double precision
PROB_EPS = 1e-15


class TrainingDivergedError(RuntimeError):
    pass


# --- activations -------------------------------------------------------------


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, PROB_EPS, 1.0 - PROB_EPS)


def activate(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def activation_grad(a: np.ndarray, name: str) -> np.ndarray:
    """Derivative of the activation expressed through its output ``a``."""
    if name == "relu":
        return (a > 0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    if name == "identity":
        return np.ones_like(a)
    raise ValueError(f"unknown activation {name!r}")


# --- pure forward ops ------------------------------------------------------------


def embedding_forward(indices: np.ndarray, table: np.ndarray) -> np.ndarray:
    indices = np.asarray(indices)
    if indices.shape[-1] == 0:
        raise ValueError("empty index sequence")
    if indices.min() < 0 or indices.max() >= table.shape[0]:
        raise IndexError("embedding index out of range")
    return table[indices]


def _windows(x: np.ndarray, k: int) -> np.ndarray:
    # (B, T, D) -> (B, T-k+1, k*D), window rows laid out offset-major
    B, T, D = x.shape
    win = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)  # B, T', D, k
    return win.transpose(0, 1, 3, 2).reshape(B, T - k + 1, k * D)


def conv1d_forward(x: np.ndarray, weights: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """Valid convolution over time; ``weights`` is (k, D, F).

    Accepts a single sequence (T, D) or a batch (B, T, D).
    """
    single = x.ndim == 2
    if single:
        x = x[None]
    k, D, F = weights.shape
    if x.shape[1] < k:
        raise ValueError(f"sequence length {x.shape[1]} shorter than kernel {k}")
    if x.shape[2] != D:
        raise ValueError(f"input width {x.shape[2]} != kernel width {D}")
    out = _windows(x, k) @ weights.reshape(k * D, F) + biases
    return out[0] if single else out


def global_max_pool(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Max over the time axis (-2). Returns values and the first argmax."""
    arg = np.argmax(x, axis=-2)
    return np.take_along_axis(x, arg[..., None, :], axis=-2)[..., 0, :], arg


def dense_forward(x: np.ndarray, weights: np.ndarray, biases: np.ndarray, activation: str) -> np.ndarray:
    if x.shape[-1] != weights.shape[0] or weights.shape[1] != biases.shape[0]:
        raise ValueError(f"shape mismatch: x{x.shape} W{weights.shape} b{biases.shape}")
    return activate(x @ weights + biases, activation)


def dropout_forward(x: np.ndarray, rate: float, training: bool, rng: np.random.Generator | None) -> tuple[np.ndarray, np.ndarray | None]:
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def multilabel_xent_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Per-class binary cross-entropy summed over classes, averaged over rows."""
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target).astype(np.float64)
    ll = target * np.log(np.maximum(pred, LOG_EPS)) + (1.0 - target) * np.log(np.maximum(1.0 - pred, LOG_EPS))
    return float(-ll.sum() / pred.shape[0])


def multilabel_xent_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target).astype(np.float64)
    g_pos = np.where(pred > LOG_EPS, -target / np.maximum(pred, LOG_EPS), 0.0)
    g_neg = np.where(1.0 - pred > LOG_EPS, (1.0 - target) / np.maximum(1.0 - pred, LOG_EPS), 0.0)
    return (g_pos + g_neg) / pred.shape[0]


# --- layers ---------------------------------------------------------------------


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind = ""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def spec(self) -> dict:
        return {"kind": self.kind}


class Embedding(Layer):
    kind = "embedding"

    def __init__(self, table: np.ndarray, freeze: bool = False, pad_index: int = 0):
        super().__init__()
        self.params["table"] = np.array(table, dtype=np.float64)
        self.freeze = freeze
        self.pad_index = pad_index
        self._idx = None

    def forward(self, x, training=False, rng=None):
        self._idx = np.asarray(x)
        return embedding_forward(self._idx, self.params["table"])

    def backward(self, grad):
        table = self.params["table"]
        g = np.zeros_like(table)
        if not self.freeze:
            np.add.at(g, self._idx.reshape(-1), grad.reshape(-1, table.shape[1]))
            g[self.pad_index] = 0.0
        self.grads["table"] = g
        return None

    def spec(self):
        V, D = self.params["table"].shape
        return {"kind": self.kind, "vocab_size": V, "dim": D, "freeze": self.freeze, "pad_index": self.pad_index}


class Conv1D(Layer):
    """Valid 1-D convolution followed by an elementwise activation."""

    kind = "conv1d"

    def __init__(self, in_dim: int, kernel_size: int, filters: int, activation: str = "relu", rng=None):
        super().__init__()
        if kernel_size <= 0 or filters <= 0 or in_dim <= 0:
            raise ValueError("conv1d params must be positive")
        self.activation = activation
        rng = rng if rng is not None else np.random.default_rng(0)
        k, D, F = kernel_size, in_dim, filters
        self.params["W"] = _glorot(rng, (k, D, F), k * D, F)
        self.params["b"] = np.zeros(F)

    def forward(self, x, training=False, rng=None):
        W = self.params["W"]
        k = W.shape[0]
        if x.shape[1] < k:
            raise ValueError(f"sequence length {x.shape[1]} shorter than kernel {k}")
        self._x_shape = x.shape
        self._win = _windows(x, k)
        self._a = activate(self._win @ W.reshape(-1, W.shape[2]) + self.params["b"], self.activation)
        return self._a

    def backward(self, grad):
        W = self.params["W"]
        k, D, F = W.shape
        dz = grad * activation_grad(self._a, self.activation)
        dz2 = dz.reshape(-1, F)
        self.grads["W"] = (self._win.reshape(-1, k * D).T @ dz2).reshape(k, D, F)
        self.grads["b"] = dz2.sum(axis=0)
        dwin = (dz @ W.reshape(k * D, F).T).reshape(dz.shape[0], dz.shape[1], k, D)
        dx = np.zeros(self._x_shape)
        Tp = dz.shape[1]
        for j in range(k):
            dx[:, j : j + Tp, :] += dwin[:, :, j, :]
        return dx

    def spec(self):
        k, D, F = self.params["W"].shape
        return {"kind": self.kind, "kernel_size": k, "in_dim": D, "filters": F, "activation": self.activation}


class GlobalMaxPool(Layer):
    kind = "global_max_pool"

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        out, self._arg = global_max_pool(x)
        return out

    def backward(self, grad):
        B, T, F = self._shape
        dx = np.zeros(self._shape)
        np.put_along_axis(dx, self._arg[:, None, :], grad[:, None, :], axis=1)
        return dx


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_dim: int, units: int, activation: str = "identity", rng=None):
        super().__init__()
        if in_dim <= 0 or units <= 0:
            raise ValueError("dense sizes must be positive")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W"] = _glorot(rng, (in_dim, units), in_dim, units)
        self.params["b"] = np.zeros(units)

    def forward(self, x, training=False, rng=None):
        self._x = x
        self._a = dense_forward(x, self.params["W"], self.params["b"], self.activation)
        return self._a

    def backward(self, grad, preactivation: bool = False):
        dz = grad if preactivation else grad * activation_grad(self._a, self.activation)
        self.grads["W"] = self._x.T @ dz
        self.grads["b"] = dz.sum(axis=0)
        return dz @ self.params["W"].T

    def spec(self):
        i, u = self.params["W"].shape
        return {"kind": self.kind, "in_dim": i, "units": u, "activation": self.activation}


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, rate: float = 0.5):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate

    def forward(self, x, training=False, rng=None):
        out, self._mask = dropout_forward(x, self.rate, training, rng)
        return out

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask

    def spec(self):
        return {"kind": self.kind, "rate": self.rate}


# --- networks -------------------------------------------------------------------


class Sequential:
    def __init__(self, layers: list[Layer], meta: dict | None = None):
        self.layers = layers
        self.meta = dict(meta or {})

    @property
    def input_len(self) -> int | None:
        return self.meta.get("input_len")

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{i}.{name}", p) for i, layer in enumerate(self.layers) for name, p in layer.params.items()]

    def named_grads(self) -> dict[str, np.ndarray]:
        return {f"{i}.{name}": g for i, layer in enumerate(self.layers) for name, g in layer.grads.items()}

    def _check_input(self, x):
        if self.input_len is not None and x.shape[1] != self.input_len:
            raise ValueError(f"input length {x.shape[1]} != expected {self.input_len}")

    def forward(self, x, training=False, rng=None):
        self._check_input(x)
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def loss_and_grads(self, x, y, training=True, rng=None) -> float:
        """Forward, loss and full backward pass for one batch.

        With a sigmoid output layer the loss gradient is taken directly
        with respect to the logits, (p - y) / B.
        """
        p = self.forward(x, training=training, rng=rng)
        loss = multilabel_xent_loss(p, y)
        last = self.layers[-1]
        if isinstance(last, Dense) and last.activation == "sigmoid":
            grad = last.backward((p - y) / p.shape[0], preactivation=True)
            for layer in reversed(self.layers[:-1]):
                grad = layer.backward(grad)
        else:
            self.backward(multilabel_xent_grad(p, y))
        return loss

    def predict(self, x, batch_size: int = 256) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim < 2 or x.shape[0] == 0:
            n_out = self.layers[-1].params["W"].shape[1]
            return np.zeros((0, n_out))
        self._check_input(x)
        return np.concatenate([self.forward(x[i : i + batch_size]) for i in range(0, len(x), batch_size)])

    def spec(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]


def build_from_spec(specs: list[dict], meta: dict | None = None) -> Sequential:
    """Rebuild a network skeleton; parameters are left at placeholder values."""
    layers: list[Layer] = []
    for s in specs:
        kind = s["kind"]
        if kind == "embedding":
            layers.append(Embedding(np.zeros((s["vocab_size"], s["dim"])), freeze=s["freeze"], pad_index=s["pad_index"]))
        elif kind == "conv1d":
            layers.append(Conv1D(s["in_dim"], s["kernel_size"], s["filters"], s["activation"]))
        elif kind == "global_max_pool":
            layers.append(GlobalMaxPool())
        elif kind == "dense":
            layers.append(Dense(s["in_dim"], s["units"], s["activation"]))
        elif kind == "dropout":
            layers.append(Dropout(s["rate"]))
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return Sequential(layers, meta)


def build_text_cnn(
    embedding: np.ndarray,
    n_labels: int,
    input_len: int,
    seed: int,
    kernel_size: int = 5,
    filters: int = 200,
    hidden: int = 170,
    dropout: float = 0.5,
    freeze_embeddings: bool = False,
) -> Sequential:
    """Embedding -> conv(k=5, 200, relu) -> max over time -> dense(170, relu) -> dropout -> dense(L, sigmoid)."""
    if input_len < kernel_size:
        raise ValueError(f"input_len {input_len} shorter than kernel {kernel_size}")
    rng = stream(seed, "init")
    D = embedding.shape[1]
    layers = [
        Embedding(embedding, freeze=freeze_embeddings),
        Conv1D(D, kernel_size, filters, "relu", rng=rng),
        GlobalMaxPool(),
        Dense(filters, hidden, "relu", rng=rng),
        Dropout(dropout),
        Dense(hidden, n_labels, "sigmoid", rng=rng),
    ]
    return Sequential(layers, {"input_len": input_len})


def build_mlp(in_dim: int, sizes: list[int], activations: list[str], seed: int) -> Sequential:
    if len(sizes) != len(activations):
        raise ValueError("sizes and activations differ in length")
    rng = stream(seed, "init")
    layers: list[Layer] = []
    for units, act in zip(sizes, activations):
        layers.append(Dense(in_dim, units, act, rng=rng))
        in_dim = units
    return Sequential(layers)


# --- optimisation ---------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    tau: float = 0.5


def fit(
    net: Sequential,
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    on_epoch: Callable[[int, float, float], None] | None = None,
) -> list[tuple[int, float, float]]:
    """Mini-batch Adam on the multi-label loss.

    Returns one ``(epoch, mean_loss, train_micro_f1)`` tuple per epoch.
    ``x`` and ``y`` are never modified.
    """
    if len(x) == 0:
        raise ValueError("empty training set")
    if len(x) != len(y):
        raise ValueError("inputs and targets differ in length")
    y = np.asarray(y, dtype=np.float64)
    shuffle_rng = stream(config.seed, "shuffle")
    dropout_rng = stream(config.seed, "dropout")
    state = AdamState(lr=config.lr)
    params = dict(net.named_params())
    history = []
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss = net.loss_and_grads(x[idx], y[idx], training=True, rng=dropout_rng)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}; lower the learning rate (currently {config.lr})"
                )
            adam_step(params, net.named_grads(), state)
            total += loss * len(idx)
        mean_loss = total / len(x)
        f1 = micro_f1((net.predict(x) >= config.tau).astype(np.int8), y.astype(np.int8))
        history.append((epoch, mean_loss, f1))
        LOGGER.info("epoch %d loss %.6f train_microF1 %.4f", epoch, mean_loss, f1)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss, f1)
    return history


def format_training_log(history: list[tuple[int, float, float]]) -> str:
    return "".join(f"{e}\t{loss:.6f}\t{f1:.4f}\n" for e, loss, f1 in history)


# --- persistence ----------------------------------------------------------------


def save_network(path, net: Sequential, manifest: dict | None = None) -> None:
    from .container import save_container

    meta = dict(manifest or {})
    meta.update({"model": meta.get("model", "sequential"), "layers": net.spec(), "meta": net.meta})
    save_container(path, meta, net.named_params())


def network_from_manifest(manifest: dict, arrays: dict[str, np.ndarray]) -> Sequential:
    net = build_from_spec(manifest["layers"], manifest.get("meta"))
    for name, p in net.named_params():
        if arrays[name].shape != p.shape:
            raise ValueError(f"parameter {name}: stored shape {arrays[name].shape} != {p.shape}")
        p[...] = arrays[name]
    return net


def load_network(path) -> tuple[Sequential, dict]:
    from .container import load_container

    manifest, arrays = load_container(path)
    return network_from_manifest(manifest, arrays), manifest
