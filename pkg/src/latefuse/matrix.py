"""Per-modality prediction matrices and their CSV file format.

File layout::

    #modality=<name>,labels_hash=<hex>,L=<n>[,key=value...]
    <id>,<p1>,...,<pL>

Floats are written with ``repr`` so a read/write round trip is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FORMAT_VERSION = "1"


class MatrixFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PredictionMatrix:
    modality: str
    ids: tuple[str, ...]
    values: np.ndarray
    header: dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != len(self.ids):
            raise ValueError(f"values shape {values.shape} does not match {len(self.ids)} ids")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate ids in prediction matrix")
        if values.size and (np.isnan(values).any() or values.min() < 0.0 or values.max() > 1.0):
            raise ValueError(f"{self.modality}: probabilities must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n_labels(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def take(self, ids: Sequence[str]) -> "PredictionMatrix":
        pos = {pid: i for i, pid in enumerate(self.ids)}
        rows = [pos[pid] for pid in ids]
        return PredictionMatrix(self.modality, tuple(ids), self.values[rows], dict(self.header))


def _check_header_value(key: str, value: str) -> None:
    if any(c in value for c in ",\n=") or any(c in key for c in ",\n="):
        raise MatrixFormatError(f"header entry {key}={value!r} may not contain ',', '=' or newlines")


def write_matrix(matrix: PredictionMatrix, path: str | Path, labels_hash: str, extra: dict[str, str] | None = None) -> None:
    entries = {"modality": matrix.modality, "labels_hash": labels_hash, "L": str(matrix.n_labels), "format": FORMAT_VERSION}
    entries.update(extra or {})
    for k, v in entries.items():
        _check_header_value(k, str(v))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("#" + ",".join(f"{k}={v}" for k, v in entries.items()) + "\n")
        for pid, row in zip(matrix.ids, matrix.values):
            if "," in pid or "\n" in pid:
                raise MatrixFormatError(f"id {pid!r} cannot be written to a CSV row")
            fh.write(pid + "," + ",".join(repr(float(v)) for v in row) + "\n")


def parse_header(line: str) -> dict[str, str]:
    if not line.startswith("#"):
        raise MatrixFormatError("missing '#modality=...' header")
    header = {}
    for part in line[1:].rstrip("\n").split(","):
        if "=" not in part:
            raise MatrixFormatError(f"bad header entry {part!r}")
        k, v = part.split("=", 1)
        header[k] = v
    for key in ("modality", "labels_hash", "L"):
        if key not in header:
            raise MatrixFormatError(f"header lacks {key!r}")
    return header


def read_matrix(path: str | Path) -> PredictionMatrix:
    with open(path, encoding="utf-8") as fh:
        header = parse_header(fh.readline())
        n_labels = int(header["L"])
        ids, rows = [], []
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != n_labels + 1:
                raise MatrixFormatError(f"{path}:{lineno}: expected {n_labels} values, got {len(parts) - 1}")
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), n_labels)
    return PredictionMatrix(header["modality"], tuple(ids), values, header)
