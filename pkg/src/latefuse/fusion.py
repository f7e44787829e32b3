"""Late fusion of per-modality prediction matrices.

Static policies (elementwise max and mean), ridge regression over the
concatenated modality scores, and small policy networks trained on the same
concatenation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import scipy.linalg

from .container import load_container, save_container
from .matrix import PredictionMatrix
from .nn_engine import Sequential, TrainConfig, build_mlp, fit, network_from_manifest, save_network

LOGGER = logging.getLogger(__name__)

DEFAULT_ALPHA = 1.0
DEFAULT_HIDDEN = (200, 150)


class AlignmentError(ValueError):
    pass


class SingularSystemError(np.linalg.LinAlgError):
    pass


def align(matrices: Sequence[PredictionMatrix]) -> tuple[list[PredictionMatrix], dict[str, list[str]]]:
    """Restrict every matrix to the shared ids, in the first matrix's order.

    Also returns the ids dropped from each modality.
    """
    if len(matrices) < 2:
        raise AlignmentError("need at least two prediction matrices")
    common = set(matrices[0].ids)
    for m in matrices[1:]:
        common &= set(m.ids)
    if not common:
        raise AlignmentError("prediction matrices share no product ids")
    order = [pid for pid in matrices[0].ids if pid in common]
    dropped = {m.modality: [pid for pid in m.ids if pid not in common] for m in matrices}
    for name, ids in dropped.items():
        if ids:
            LOGGER.warning("%s: %d id(s) not shared by all modalities dropped", name, len(ids))
    return [m.take(order) for m in matrices], dropped


def _stack(matrices: Sequence[PredictionMatrix]) -> np.ndarray:
    if not matrices:
        raise ValueError("no matrices to fuse")
    first = matrices[0]
    for m in matrices[1:]:
        if m.values.shape != first.values.shape:
            raise ValueError(f"shape mismatch: {first.modality} {first.values.shape} vs {m.modality} {m.values.shape}")
        if m.ids != first.ids:
            raise AlignmentError("matrices are not aligned; call align() first")
    return np.stack([m.values for m in matrices])


def fuse_max(matrices: Sequence[PredictionMatrix]) -> PredictionMatrix:
    return PredictionMatrix("max", matrices[0].ids, _stack(matrices).max(axis=0))


def fuse_mean(matrices: Sequence[PredictionMatrix]) -> PredictionMatrix:
    # sorted accumulation offset from the minimum: exact under modality
    # permutation, exact for identical inputs, and never leaves [min, max]
    s = np.sort(_stack(matrices), axis=0)
    lo, hi = s[0], s[-1]
    mean = lo + (s - lo).sum(axis=0) / len(s)
    return PredictionMatrix("mean", matrices[0].ids, np.clip(mean, lo, hi))


def concat_features(matrices: Sequence[PredictionMatrix]) -> np.ndarray:
    """Row-wise concatenation of modality scores, N x kL."""
    _stack(matrices)
    return np.hstack([m.values for m in matrices])


# --- ridge -----------------------------------------------------------------------


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray  # (kL [+1]) x L; the last row is the intercept when fitted
    alpha: float
    arity: int
    n_labels: int
    intercept: bool = False


def solve_ridge(X: np.ndarray, y: np.ndarray, alpha: float, penalize: np.ndarray | None = None) -> np.ndarray:
    """Solve (X'X + alpha I) W = X'y with a Cholesky factorisation."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    d = X.shape[1]
    A = X.T @ X
    diag = np.full(d, float(alpha)) if penalize is None else alpha * penalize
    A[np.diag_indices(d)] += diag
    if alpha == 0 and np.linalg.matrix_rank(X) < d:
        raise SingularSystemError("X is rank deficient and alpha = 0; use alpha > 0")
    try:
        factor = scipy.linalg.cho_factor(A, lower=False, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"normal equations are not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, X.T @ y)


def train_ridge(
    matrices: Sequence[PredictionMatrix],
    targets: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    fit_intercept: bool = False,
) -> RidgeModel:
    X = concat_features(matrices)
    y = np.asarray(targets, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("ridge needs at least one training row")
    if y.shape != (X.shape[0], matrices[0].n_labels):
        raise ValueError(f"targets shape {y.shape} does not match {(X.shape[0], matrices[0].n_labels)}")
    penalize = None
    if fit_intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
        penalize = np.r_[np.ones(X.shape[1] - 1), 0.0]
    W = solve_ridge(X, y, alpha, penalize)
    if not np.all(np.isfinite(W)):
        raise SingularSystemError("ridge solution is not finite")
    return RidgeModel(W, float(alpha), len(matrices), matrices[0].n_labels, fit_intercept)


def ridge_scores(model: RidgeModel, matrices: Sequence[PredictionMatrix]) -> np.ndarray:
    """Unclamped linear scores XW."""
    if len(matrices) != model.arity:
        raise ValueError(f"ridge model fuses {model.arity} modalities, got {len(matrices)}")
    if matrices[0].n_labels != model.n_labels:
        raise ValueError(f"ridge model expects L={model.n_labels}, got {matrices[0].n_labels}")
    X = concat_features(matrices)
    if model.intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
    return X @ model.weights


def apply_ridge(model: RidgeModel, matrices: Sequence[PredictionMatrix]) -> PredictionMatrix:
    return PredictionMatrix("ridge", matrices[0].ids, np.clip(ridge_scores(model, matrices), 0.0, 1.0))


# --- policy networks -------------------------------------------------------------


@dataclass(frozen=True)
class PolicyNetworkSpec:
    arity: int
    sizes: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("arity must be >= 1")
        if len(self.sizes) != len(self.activations) or not self.sizes:
            raise ValueError("one activation per layer required")
        if any(s <= 0 for s in self.sizes):
            raise ValueError("layer sizes must be positive")
        if self.activations[-1] != "sigmoid":
            raise ValueError("the output layer must be sigmoid")
        if any(a not in ("sigmoid", "tanh", "relu") for a in self.activations):
            raise ValueError(f"unsupported activation in {self.activations}")

    @property
    def n_labels(self) -> int:
        return self.sizes[-1]


def bimodal_policy_spec(n_labels: int) -> PolicyNetworkSpec:
    return PolicyNetworkSpec(2, (200, 150, n_labels), ("sigmoid", "sigmoid", "sigmoid"))


def trimodal_policy_spec(n_labels: int, hidden: Sequence[int] = DEFAULT_HIDDEN) -> PolicyNetworkSpec:
    """Three layers, sigmoid / tanh / sigmoid. Hidden sizes default to 200 and 150."""
    if len(hidden) != 2:
        raise ValueError("the tri-modal policy has exactly two hidden layers")
    return PolicyNetworkSpec(3, (*hidden, n_labels), ("sigmoid", "tanh", "sigmoid"))


@dataclass
class PolicyModel:
    spec: PolicyNetworkSpec
    network: Sequential
    seed: int = 0


def build_policy_network(spec: PolicyNetworkSpec, seed: int) -> PolicyModel:
    net = build_mlp(spec.arity * spec.n_labels, list(spec.sizes), list(spec.activations), seed)
    return PolicyModel(spec, net, seed)


def train_policy_network(
    spec: PolicyNetworkSpec,
    matrices: Sequence[PredictionMatrix],
    targets: np.ndarray,
    config: TrainConfig,
) -> PolicyModel:
    if len(matrices) != spec.arity:
        raise ValueError(f"policy spec fuses {spec.arity} modalities, got {len(matrices)}")
    if matrices[0].n_labels != spec.n_labels:
        raise ValueError(f"policy spec outputs L={spec.n_labels}, matrices have {matrices[0].n_labels}")
    model = build_policy_network(spec, config.seed)
    fit(model.network, concat_features(matrices), np.asarray(targets), config)
    return model


def apply_policy_network(model: PolicyModel, matrices: Sequence[PredictionMatrix]) -> PredictionMatrix:
    if len(matrices) != model.spec.arity:
        raise ValueError(f"policy network fuses {model.spec.arity} modalities, got {len(matrices)}")
    return PredictionMatrix("mlp", matrices[0].ids, model.network.predict(concat_features(matrices)))


FusionModel = Union[str, RidgeModel, PolicyModel]


# --- persistence -----------------------------------------------------------------


def save_fusion_model(path: str | Path, model: FusionModel, manifest: dict | None = None) -> None:
    meta = dict(manifest or {})
    if isinstance(model, RidgeModel):
        meta.update(model="ridge", alpha=model.alpha, arity=model.arity, n_labels=model.n_labels, intercept=model.intercept)
        save_container(path, meta, [("weights", model.weights)])
    elif isinstance(model, PolicyModel):
        meta.update(
            model="policy_mlp",
            arity=model.spec.arity,
            sizes=list(model.spec.sizes),
            activations=list(model.spec.activations),
            seed=model.seed,
        )
        save_network(path, model.network, meta)
    else:
        raise TypeError(f"static policy {model!r} has no parameters to save")


def load_fusion_model(path: str | Path) -> tuple[FusionModel, dict]:
    manifest, arrays = load_container(path)
    kind = manifest.get("model")
    if kind == "ridge":
        return RidgeModel(arrays["weights"], manifest["alpha"], manifest["arity"], manifest["n_labels"], manifest["intercept"]), manifest
    if kind == "policy_mlp":
        spec = PolicyNetworkSpec(manifest["arity"], tuple(manifest["sizes"]), tuple(manifest["activations"]))
        return PolicyModel(spec, network_from_manifest(manifest, arrays), manifest["seed"]), manifest
    raise ValueError(f"{path}: not a fusion model (model={kind!r})")
