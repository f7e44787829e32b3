"""Central finite-difference checks for every layer kind in the engine.

Each check builds a random small configuration, takes the scalar objective
``sum(R * output)`` for a fixed random ``R`` and compares the analytic
gradients against central differences. Inputs are resampled whenever a ReLU
pre-activation or a max-pool runner-up sits within ``KINK_MARGIN`` of a
non-differentiable point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import nn_engine as nn
from .rng import stream

FD_EPS = 1e-5
TOLERANCE = 1e-4
KINK_MARGIN = 1e-3
N_CONFIGS = 20

KINDS = (
    "embedding",
    "conv1d",
    "global_max_pool",
    "dense_relu",
    "dense_sigmoid",
    "dense_tanh",
    "dense_identity",
    "dropout",
    "multilabel_xent",
    "text_cnn",
    "policy_mlp",
)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = np.linalg.norm(analytic - numeric)
    den = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    return 0.0 if den == 0 else float(num / den)


def numeric_grad(f: Callable[[], float], arr: np.ndarray, eps: float = FD_EPS) -> np.ndarray:
    g = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return g


def _has_kink(z: np.ndarray) -> bool:
    return bool(np.any(np.abs(z) < KINK_MARGIN))


def _pool_tie(x: np.ndarray) -> bool:
    if x.shape[1] < 2:
        return False
    top2 = np.sort(x, axis=1)[:, -2:, :]
    return bool(np.any(top2[:, 1] - top2[:, 0] < KINK_MARGIN))


@dataclass
class _Case:
    """Analytic gradients and a way to re-evaluate the objective."""

    objective: Callable[[], float]
    checks: list[tuple[np.ndarray, np.ndarray]]  # (array perturbed in place, analytic gradient)


def _layer_case(layer: nn.Layer, x: np.ndarray, rng: np.random.Generator, check_input: bool = True, mask_seed: int | None = None) -> _Case:
    def run():
        r = None if mask_seed is None else np.random.default_rng(mask_seed)
        return layer.forward(x, training=mask_seed is not None, rng=r)

    out = run()
    R = rng.normal(size=out.shape)
    dx = layer.backward(R)
    checks = [(layer.params[k], layer.grads[k].copy()) for k in layer.params]
    if check_input:
        checks.append((x, dx.copy()))
    return _Case(lambda: float(np.sum(run() * R)), checks)


def _case_embedding(rng):
    V, D = int(rng.integers(3, 8)), int(rng.integers(1, 5))
    B, T = int(rng.integers(1, 4)), int(rng.integers(1, 6))
    layer = nn.Embedding(rng.normal(size=(V, D)))
    idx = rng.integers(0, V, size=(B, T))
    idx[0, 0] = 0  # padding always present
    case = _layer_case(layer, idx, rng, check_input=False)
    table, g = case.checks[0]
    if np.any(g[0] != 0.0):
        raise AssertionError("padding row received a gradient")
    # the padding row is frozen by design: compare the remaining rows only
    sub = table[1:]
    return _Case(case.objective, [(sub, g[1:])])


def _case_conv1d(rng):
    while True:
        k, D, F = int(rng.integers(1, 6)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
        B, T = int(rng.integers(1, 4)), k + int(rng.integers(0, 5))
        layer = nn.Conv1D(D, k, F, "relu", rng=rng)
        layer.params["b"][...] = rng.normal(size=F) * 0.1
        x = rng.normal(size=(B, T, D))
        z = nn.conv1d_forward(x, layer.params["W"], layer.params["b"])
        if not _has_kink(z):
            return _layer_case(layer, x, rng)


def _case_pool(rng):
    while True:
        B, T, F = int(rng.integers(1, 4)), int(rng.integers(1, 7)), int(rng.integers(1, 5))
        x = rng.normal(size=(B, T, F))
        if not _pool_tie(x):
            return _layer_case(nn.GlobalMaxPool(), x, rng)


def _case_dense(activation):
    def make(rng):
        while True:
            n_in, n_out, B = int(rng.integers(1, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 5))
            layer = nn.Dense(n_in, n_out, activation, rng=rng)
            layer.params["b"][...] = rng.normal(size=n_out) * 0.5
            x = rng.normal(size=(B, n_in))
            if activation != "relu" or not _has_kink(x @ layer.params["W"] + layer.params["b"]):
                return _layer_case(layer, x, rng)

    return make


def _case_dropout(rng):
    B, n = int(rng.integers(1, 5)), int(rng.integers(1, 8))
    layer = nn.Dropout(float(rng.uniform(0.1, 0.7)))
    return _layer_case(layer, rng.normal(size=(B, n)), rng, mask_seed=int(rng.integers(1 << 31)))


def _case_xent(rng):
    B, L = int(rng.integers(1, 5)), int(rng.integers(1, 7))
    pred = rng.uniform(0.05, 0.95, size=(B, L))
    target = (rng.random((B, L)) < 0.5).astype(np.float64)
    g = nn.multilabel_xent_grad(pred, target)
    return _Case(lambda: nn.multilabel_xent_loss(pred, target), [(pred, g)])


def _network_kinked(net: nn.Sequential, x: np.ndarray) -> bool:
    h = x
    for layer in net.layers:
        if isinstance(layer, nn.Conv1D):
            W = layer.params["W"]
            z = nn.conv1d_forward(h, W, layer.params["b"])
            if layer.activation == "relu" and _has_kink(z):
                return True
        elif isinstance(layer, nn.Dense) and layer.activation == "relu":
            if _has_kink(h @ layer.params["W"] + layer.params["b"]):
                return True
        elif isinstance(layer, nn.GlobalMaxPool) and _pool_tie(h):
            return True
        h = layer.forward(h)
    return False


def _network_case(net: nn.Sequential, x: np.ndarray, y: np.ndarray, mask_seed: int) -> _Case:
    def objective():
        p = net.forward(x, training=True, rng=np.random.default_rng(mask_seed))
        return nn.multilabel_xent_loss(p, y)

    net.loss_and_grads(x, y, training=True, rng=np.random.default_rng(mask_seed))
    grads = net.named_grads()
    checks = []
    for name, p in net.named_params():
        g = grads[name].copy()
        if name.endswith("table"):
            checks.append((p[1:], g[1:]))
        else:
            checks.append((p, g))
    return _Case(objective, checks)


def _case_text_cnn(rng):
    while True:
        V, D, T = int(rng.integers(4, 9)), int(rng.integers(2, 4)), int(rng.integers(3, 7))
        k, F, H, L, B = int(rng.integers(1, 4)), int(rng.integers(2, 4)), int(rng.integers(2, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
        k = min(k, T)
        table = rng.uniform(-0.5, 0.5, size=(V, D))
        table[0] = 0.0
        net = nn.build_text_cnn(table, L, T, seed=int(rng.integers(1 << 31)), kernel_size=k, filters=F, hidden=H, dropout=0.3)
        for _, p in net.named_params():
            if p.ndim == 1:
                p[...] = rng.normal(size=p.shape) * 0.2
        x = rng.integers(0, V, size=(B, T))
        y = (rng.random((B, L)) < 0.5).astype(np.float64)
        if not _network_kinked(net, x):
            return _network_case(net, x, y, int(rng.integers(1 << 31)))


def _case_policy_mlp(rng):
    k, L, B = int(rng.integers(2, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
    h1, h2 = int(rng.integers(2, 6)), int(rng.integers(2, 6))
    net = nn.build_mlp(k * L, [h1, h2, L], ["sigmoid", "tanh", "sigmoid"], seed=int(rng.integers(1 << 31)))
    x = rng.uniform(0, 1, size=(B, k * L))
    y = (rng.random((B, L)) < 0.5).astype(np.float64)
    return _network_case(net, x, y, 0)


_MAKERS = {
    "embedding": _case_embedding,
    "conv1d": _case_conv1d,
    "global_max_pool": _case_pool,
    "dense_relu": _case_dense("relu"),
    "dense_sigmoid": _case_dense("sigmoid"),
    "dense_tanh": _case_dense("tanh"),
    "dense_identity": _case_dense("identity"),
    "dropout": _case_dropout,
    "multilabel_xent": _case_xent,
    "text_cnn": _case_text_cnn,
    "policy_mlp": _case_policy_mlp,
}


def check_kind(kind: str, seed: int = 0, n_configs: int = N_CONFIGS, corrupt: bool = False) -> float:
    """Worst relative error for ``kind`` over ``n_configs`` random configurations.

    ``corrupt`` scales the analytic gradient by 1.01; it exists so the
    suite's own failure path can be exercised.
    """
    rng = stream(seed, f"gradcheck:{kind}")
    worst = 0.0
    for _ in range(n_configs):
        case = _MAKERS[kind](rng)
        for arr, analytic in case.checks:
            if corrupt:
                analytic = analytic * 1.01
            worst = max(worst, relative_error(analytic, numeric_grad(case.objective, arr)))
    return worst


def run_suite(seed: int = 0, n_configs: int = N_CONFIGS, corrupt: frozenset[str] = frozenset()) -> dict[str, float]:
    return {kind: check_kind(kind, seed, n_configs, kind in corrupt) for kind in KINDS}
