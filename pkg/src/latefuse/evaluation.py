"""Thresholding, micro-F1, per-class miss analysis and synthetic modalities."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .matrix import PredictionMatrix
from .rng import stream

LOGGER = logging.getLogger(__name__)

DEFAULT_TAU = 0.5
DEFAULT_TOP_K = 15
SATURATED_HIGH = 0.99
SATURATED_LOW = 0.01


def threshold_predictions(values: np.ndarray | PredictionMatrix, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Multi-hot rows: 1 where probability >= tau."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if isinstance(values, PredictionMatrix):
        values = values.values
    return (np.asarray(values) >= tau).astype(np.int8)


def _confusion(pred: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    tp = (pred & truth).sum(axis=0)
    fp = (pred & ~truth).sum(axis=0)
    fn = (~pred & truth).sum(axis=0)
    return tp, fp, fn


def micro_f1(pred: np.ndarray, truth: np.ndarray) -> float:
    """F1 over TP/FP/FN pooled across every (product, class) pair.

    With no positives anywhere (TP = FP = FN = 0) the score is defined as 1.0.
    """
    tp, fp, fn = (int(a.sum()) for a in _confusion(pred, truth))
    denom = 2 * tp + fp + fn
    if denom == 0:
        LOGGER.warning("micro-F1 undefined without any positives; returning 1.0")
        return 1.0
    return 2 * tp / denom


@dataclass(frozen=True)
class ClassCounts:
    label: str
    tp: int
    fp: int
    fn: int

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def miss_ratio(self) -> float:
        return self.fn / self.support if self.support else float("nan")

    def cell(self) -> str:
        return f"{self.label} ({self.fn}/{self.support})"


def per_class_counts(pred: np.ndarray, truth: np.ndarray, labels: Sequence[str]) -> list[ClassCounts]:
    tp, fp, fn = _confusion(pred, truth)
    if len(labels) != len(tp):
        raise ValueError(f"{len(labels)} labels for {len(tp)} columns")
    return [ClassCounts(label, int(a), int(b), int(c)) for label, a, b, c in zip(labels, tp, fp, fn)]


def top_misclassified(counts: Sequence[ClassCounts], k: int = DEFAULT_TOP_K) -> list[ClassCounts]:
    """Classes ranked by missed fraction fn/support, ties by label."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted((c for c in counts if c.support > 0), key=lambda c: (-c.fn / c.support, c.label))
    return ranked[:k]


@dataclass(frozen=True)
class EvalReport:
    name: str
    micro_f1: float
    tau: float
    counts: tuple[ClassCounts, ...]
    ranked: tuple[ClassCounts, ...]
    labels_hash: str = ""


def evaluate(name: str, probs: np.ndarray, truth: np.ndarray, labels: Sequence[str], tau: float = DEFAULT_TAU, k: int = DEFAULT_TOP_K) -> EvalReport:
    pred = threshold_predictions(probs, tau)
    counts = per_class_counts(pred, truth, labels)
    return EvalReport(name, micro_f1(pred, truth), tau, tuple(counts), tuple(top_misclassified(counts, k)))


def emit_report(report: EvalReport, fmt: str = "markdown") -> str:
    if fmt == "tsv":
        lines = [
            f"# name={report.name}\ttau={report.tau:.4f}\tmicro_f1={report.micro_f1:.4f}"
            + (f"\tlabels_hash={report.labels_hash}" if report.labels_hash else ""),
            "rank\tlabel\tfn\tsupport\tratio",
        ]
        lines += [f"{i}\t{c.label}\t{c.fn}\t{c.support}\t{c.miss_ratio:.4f}" for i, c in enumerate(report.ranked, 1)]
    elif fmt == "markdown":
        lines = [
            f"**{report.name}**: micro-F1 = {report.micro_f1:.4f} (tau = {report.tau:.4f})"
            + (f" <!-- labels_hash={report.labels_hash} -->" if report.labels_hash else ""),
            "",
            f"| Rank | {report.name} |",
            "| ---: | :--- |",
        ]
        lines += [f"| {i} | {c.cell()} |" for i, c in enumerate(report.ranked, 1)]
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return "\n".join(lines) + "\n"


def format_score_table(rows: Sequence[tuple[str, float]]) -> str:
    """Model/F1 table in the layout of a results summary, F1 in percent."""
    lines = ["| Model | F1 (%) |", "| :--- | ---: |"]
    lines += [f"| {name} | {100 * f1:.1f} |" for name, f1 in rows]
    return "\n".join(lines) + "\n"


# --- synthetic modalities --------------------------------------------------------


@dataclass(frozen=True)
class SkillProfile:
    """Per-class chance that a synthetic modality lands on the correct side of 0.5."""

    skills: np.ndarray
    temperature: float = 0.0

    def __post_init__(self):
        skills = np.asarray(self.skills, dtype=np.float64)
        if skills.ndim != 1 or skills.size and (skills.min() < 0 or skills.max() > 1):
            raise ValueError("skills must be a vector of probabilities")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        object.__setattr__(self, "skills", skills)


def generate_synthetic_modality(
    truth: np.ndarray,
    profile: SkillProfile,
    seed: int,
    ids: Sequence[str] | None = None,
    modality: str = "synthetic",
) -> PredictionMatrix:
    """Scores that are right about class c with probability ``profile.skills[c]``.

    A right score sits on the true side of 0.5, a wrong one on the other
    side. The distance from 0.5 is ``0.01 + 0.48 * B`` with
    ``B ~ Beta(1/temperature, 1)``; at temperature 0 scores saturate at
    exactly 0.99 and 0.01.
    """
    truth = np.asarray(truth).astype(bool)
    n, L = truth.shape
    if profile.skills.shape != (L,):
        raise ValueError(f"skill profile covers {profile.skills.size} classes, truth has {L}")
    rng = stream(seed, f"synth:{modality}")
    correct = rng.random((n, L)) < profile.skills
    high_side = truth == correct
    if profile.temperature == 0.0:
        values = np.where(high_side, SATURATED_HIGH, SATURATED_LOW)
    else:
        dist = 0.01 + 0.48 * rng.beta(1.0 / profile.temperature, 1.0, size=(n, L))
        values = np.where(high_side, 0.5 + dist, 0.5 - dist)
    ids = tuple(ids) if ids is not None else tuple(str(i) for i in range(n))
    return PredictionMatrix(modality, ids, values)
