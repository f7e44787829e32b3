"""Category vocabulary, multi-hot encoding and the train/test split."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import fnv1a_64


class EmptyVocabularyError(ValueError):
    """No label survives the frequency filter."""


class UnknownLabelError(KeyError):
    pass


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ProductRecord:
    id: str
    title: str = ""
    description: str = ""
    labels: frozenset[str] = frozenset()
    external_scores: dict[str, tuple[float, ...]] = field(default_factory=dict, compare=False)

    def with_labels(self, labels: Iterable[str]) -> "ProductRecord":
        return ProductRecord(self.id, self.title, self.description, frozenset(labels), self.external_scores)


@dataclass(frozen=True)
class LabelVocabulary:
    labels: tuple[str, ...]
    counts: tuple[int, ...]
    min_count: int

    def __post_init__(self):
        if len(self.labels) != len(self.counts):
            raise ValueError("labels and counts differ in length")
        if list(self.labels) != sorted(set(self.labels)):
            raise ValueError("labels must be unique and lexicographically sorted")
        if any(c < self.min_count for c in self.counts):
            raise ValueError("a label count is below min_count")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.labels)}

    @property
    def labels_hash(self) -> str:
        """64-bit FNV-1a over the newline-joined label list, as 16 hex digits."""
        return f"{fnv1a_64(chr(10).join(self.labels).encode('utf-8')):016x}"


def _clean_label(label: str) -> str:
    return label.strip()


def build_vocabulary(records: Sequence[ProductRecord], min_count: int) -> LabelVocabulary:
    """Keep every label carried by at least ``min_count`` products."""
    if min_count < 0:
        raise ValueError("min_count must be >= 0")
    tally: Counter[str] = Counter()
    for record in records:
        tally.update({_clean_label(label) for label in record.labels})
    kept = sorted(label for label, n in tally.items() if n >= min_count and label)
    if not kept:
        raise EmptyVocabularyError(f"no label reaches min_count={min_count}")
    return LabelVocabulary(tuple(kept), tuple(tally[label] for label in kept), min_count)


def filter_records(records: Sequence[ProductRecord], vocab: LabelVocabulary) -> list[ProductRecord]:
    """Restrict labels to ``vocab``; products left with no label are dropped."""
    if not len(vocab):
        raise EmptyVocabularyError("cannot filter against an empty vocabulary")
    known = set(vocab.labels)
    out = []
    for record in records:
        kept = {_clean_label(label) for label in record.labels} & known
        if kept:
            out.append(record.with_labels(kept))
    return out


def encode_labels(labels: Iterable[str], vocab: LabelVocabulary, strict: bool = True) -> np.ndarray:
    """Multi-hot vector of length L.

    In strict mode an empty label set is an error; otherwise it encodes to
    all zeros. Unknown labels are always an error.
    """
    index = vocab.index
    bits = np.zeros(len(vocab), dtype=np.int8)
    labels = {_clean_label(label) for label in labels}
    if strict and not labels:
        raise ValueError("empty label set")
    for label in labels:
        if label not in index:
            raise UnknownLabelError(label)
        bits[index[label]] = 1
    return bits


def encode_many(records: Sequence[ProductRecord], vocab: LabelVocabulary) -> np.ndarray:
    if not records:
        return np.zeros((0, len(vocab)), dtype=np.int8)
    return np.stack([encode_labels(r.labels, vocab) for r in records])


def split_train_test(records: Sequence, n_train: int) -> tuple[list, list]:
    if not 0 <= n_train <= len(records):
        raise ValueError(f"n_train={n_train} outside [0, {len(records)}]")
    return list(records[:n_train]), list(records[n_train:])


# --- files -----------------------------------------------------------------


def record_from_dict(obj: dict) -> ProductRecord:
    if not isinstance(obj, dict) or not obj.get("id"):
        raise DatasetFormatError("record needs a non-empty 'id'")
    labels = obj.get("labels", [])
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise DatasetFormatError(f"record {obj['id']!r}: 'labels' must be an array of strings")
    scores = {str(k): tuple(float(v) for v in vals) for k, vals in (obj.get("scores") or {}).items()}
    return ProductRecord(
        id=str(obj["id"]),
        title=obj.get("title", "") or "",
        description=obj.get("description", "") or "",
        labels=frozenset(_clean_label(x) for x in labels),
        external_scores=scores,
    )


def record_to_dict(record: ProductRecord) -> dict:
    obj = {
        "id": record.id,
        "title": record.title,
        "description": record.description,
        "labels": sorted(record.labels),
    }
    if record.external_scores:
        obj["scores"] = {k: list(v) for k, v in sorted(record.external_scores.items())}
    return obj


def read_dataset(path: str | Path) -> list[ProductRecord]:
    """Read line-delimited JSON records; ids must be unique."""
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = record_from_dict(json.loads(line))
            except (json.JSONDecodeError, DatasetFormatError) as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
            if record.id in seen:
                raise DatasetFormatError(f"{path}:{lineno}: duplicate id {record.id!r}")
            seen.add(record.id)
            records.append(record)
    return records


def write_dataset(records: Iterable[ProductRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False, sort_keys=True) + "\n")


def write_vocabulary(vocab: LabelVocabulary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#min_count={vocab.min_count}\n")
        for label, count in zip(vocab.labels, vocab.counts):
            fh.write(f"{count}\t{label}\n")


def read_vocabulary(path: str | Path) -> LabelVocabulary:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#min_count="):
            raise DatasetFormatError(f"{path}: missing '#min_count=' header")
        min_count = int(header.split("=", 1)[1])
        labels, counts = [], []
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            count, label = line.split("\t", 1)
            labels.append(label)
            counts.append(int(count))
    return LabelVocabulary(tuple(labels), tuple(counts), min_count)
