"""Desk-scale complementarity experiment.

Three synthetic modalities are each reliable on a disjoint block of classes
and close to chance elsewhere. Every fusion strategy is trained on the first
part of the products and scored on the held-out remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .evaluation import EvalReport, SkillProfile, emit_report, evaluate, format_score_table, generate_synthetic_modality
from .fusion import (
    apply_policy_network,
    apply_ridge,
    bimodal_policy_spec,
    fuse_max,
    fuse_mean,
    train_policy_network,
    train_ridge,
    trimodal_policy_spec,
)
from .label_space import split_train_test
from .matrix import PredictionMatrix
from .nn_engine import TrainConfig
from .rng import stream

MODALITIES = ("image", "title", "description")


@dataclass(frozen=True)
class ComplementarityConfig:
    n_products: int = 6000
    n_labels: int = 30
    n_test: int = 1500
    own_skill: float = 0.95
    other_skill: float = 0.55
    temperature: float = 0.25
    prevalence: tuple[float, float] = (0.1, 0.3)
    alpha: float = 1.0
    tau: float = 0.5
    top_k: int = 15
    train: TrainConfig = field(default_factory=lambda: TrainConfig(lr=3e-3, batch_size=64, epochs=30))
    seed: int = 0


def synthetic_truth(n: int, n_labels: int, prevalence: tuple[float, float], seed: int) -> np.ndarray:
    """Independent per-class Bernoulli labels; empty rows get one class drawn by prevalence."""
    rng = stream(seed, "truth")
    rates = rng.uniform(*prevalence, size=n_labels)
    truth = (rng.random((n, n_labels)) < rates).astype(np.int8)
    empty = np.flatnonzero(truth.sum(axis=1) == 0)
    truth[empty, rng.choice(n_labels, size=empty.size, p=rates / rates.sum())] = 1
    return truth


def skilled_blocks(n_labels: int, n_modalities: int = 3) -> list[np.ndarray]:
    return [np.asarray(b) for b in np.array_split(np.arange(n_labels), n_modalities)]


@dataclass
class ComplementarityResult:
    scores: dict[str, float]
    reports: dict[str, EvalReport]
    skilled: dict[str, set[str]]
    labels: tuple[str, ...]
    matrices: dict[str, PredictionMatrix]

    def score_table(self) -> str:
        return format_score_table(list(self.scores.items()))

    def full_report(self) -> str:
        parts = ["## Fusion results (held-out split)", "", self.score_table()]
        for report in self.reports.values():
            parts += ["", emit_report(report, "markdown")]
        return "\n".join(parts)


def run_complementarity(config: ComplementarityConfig = ComplementarityConfig()) -> ComplementarityResult:
    c = config
    truth = synthetic_truth(c.n_products, c.n_labels, c.prevalence, c.seed)
    labels = tuple(f"class_{i:02d}" for i in range(c.n_labels))
    ids = tuple(f"p{i:05d}" for i in range(c.n_products))
    blocks = skilled_blocks(c.n_labels, len(MODALITIES))

    modal: dict[str, PredictionMatrix] = {}
    skilled: dict[str, set[str]] = {}
    for name, block in zip(MODALITIES, blocks):
        skills = np.full(c.n_labels, c.other_skill)
        skills[block] = c.own_skill
        modal[name] = generate_synthetic_modality(truth, SkillProfile(skills, c.temperature), c.seed, ids, name)
        skilled[name] = {labels[i] for i in block}

    n_train = c.n_products - c.n_test
    train_ids, test_ids = split_train_test(ids, n_train)
    y_train, y_test = truth[:n_train], truth[n_train:]
    tr = {k: m.take(train_ids) for k, m in modal.items()}
    te = {k: m.take(test_ids) for k, m in modal.items()}

    outputs: dict[str, PredictionMatrix] = {}
    for name in MODALITIES:
        outputs[name.capitalize()] = te[name]
    triple = list(MODALITIES)
    outputs["Max"] = fuse_max([te[k] for k in triple])
    outputs["Mean"] = fuse_mean([te[k] for k in triple])
    ridge = train_ridge([tr[k] for k in triple], y_train, c.alpha)
    outputs["Linear Regression"] = apply_ridge(ridge, [te[k] for k in triple])
    for a, b in combinations(MODALITIES, 2):
        model = train_policy_network(bimodal_policy_spec(c.n_labels), [tr[a], tr[b]], y_train, c.train)
        outputs[f"{a.capitalize()}-{b.capitalize()} Fused"] = apply_policy_network(model, [te[a], te[b]])
    tri = train_policy_network(trimodal_policy_spec(c.n_labels), [tr[k] for k in triple], y_train, c.train)
    outputs["Image-Title-Description Fused"] = apply_policy_network(tri, [te[k] for k in triple])

    reports = {name: evaluate(name, m.values, y_test, labels, c.tau, c.top_k) for name, m in outputs.items()}
    scores = {name: r.micro_f1 for name, r in reports.items()}
    return ComplementarityResult(scores, reports, skilled, labels, outputs)
