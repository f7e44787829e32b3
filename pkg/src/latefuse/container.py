"""Binary model container shared by text classifiers and fusion models.

Byte layout (all integers little-endian)::

    offset  size  field
    0       8     magic b"LATEFUSE"
    8       4     uint32 format version (currently 1)
    12      8     uint64 manifest length n
    20      n     manifest, UTF-8 JSON with sorted keys
    20+n    ...   parameter arrays, float64 little-endian, C order,
                  in the order of manifest["params"]

``manifest["params"]`` is a list of ``{"name": str, "shape": [int, ...]}``.
Every other manifest key is free-form metadata (architecture, seed,
vocabulary hashes, ...).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"LATEFUSE"
VERSION = 1


class ContainerError(ValueError):
    pass


def save_container(path: str | Path, manifest: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    manifest = dict(manifest)
    manifest["params"] = [{"name": name, "shape": list(np.shape(a))} for name, a in arrays]
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ContainerError(f"{path}: not a model container")
    version, n = struct.unpack_from("<IQ", data, 8)
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    offset = 20 + n
    manifest = json.loads(data[20:offset].decode("utf-8"))
    arrays = {}
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * 8
        if offset + size > len(data):
            raise ContainerError(f"{path}: truncated at parameter {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(data, dtype="<f8", count=size // 8, offset=offset).reshape(shape).astype(np.float64)
        offset += size
    if offset != len(data):
        raise ContainerError(f"{path}: {len(data) - offset} trailing bytes")
    return manifest, arrays
