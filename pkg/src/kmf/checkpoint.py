"""Binary checkpoint and facet-cache formats.

Checkpoint layout (all integers and floats little-endian):

    bytes 0..3   magic ``KMF1`` (format + version)
    u32          embedding dimension d
    u32          number of message-passing layers L
    u32          number of classes C
    u64          config blob length, then that many UTF-8 bytes (key=value text)
    C times      u32 byte length + UTF-8 class id, in model class order
    L times      d*d float64 row-major layer weights, then 1 float64 gate
                 pre-activation
    C*d float64  class description matrix, row-major

Saving a loaded checkpoint reproduces the original bytes exactly.  The facet
cache uses the same conventions under the ``KMFT`` magic with an explicit
version word.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig, parse_config_text
from .facets import FacetTensor

__all__ = [
    "Checkpoint",
    "checkpoint_bytes",
    "save_checkpoint",
    "load_checkpoint",
    "save_facet_cache",
    "load_facet_cache",
]

CHECKPOINT_MAGIC = b"KMF1"
FACET_MAGIC = b"KMFT"
FACET_VERSION = 1


@dataclass
class Checkpoint:
    config: TrainConfig
    classes: list[str]
    descriptions: np.ndarray  # (C, d)
    weights: list[np.ndarray]  # L entries of (d, d)
    gates: list[float]  # L gate pre-activations

    @property
    def dim(self) -> int:
        return int(self.descriptions.shape[1])

    @property
    def num_layers(self) -> int:
        return len(self.weights)


def _pack_str(text: str) -> bytes:
    blob = text.encode("utf-8")
    return struct.pack("<I", len(blob)) + blob


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, count: int) -> bytes:
        if self.offset + count > len(self.blob):
            raise ValueError("checkpoint truncated")
        out = self.blob[self.offset : self.offset + count]
        self.offset += count
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def f64_array(self, count: int, shape) -> np.ndarray:
        raw = self.take(count * 8)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def checkpoint_bytes(ck: Checkpoint) -> bytes:
    dim = ck.dim
    parts = [CHECKPOINT_MAGIC]
    parts.append(struct.pack("<III", dim, ck.num_layers, len(ck.classes)))
    config_blob = ck.config.to_text().encode("utf-8")
    parts.append(struct.pack("<Q", len(config_blob)))
    parts.append(config_blob)
    for label in ck.classes:
        parts.append(_pack_str(label))
    for weight, gate in zip(ck.weights, ck.gates):
        if weight.shape != (dim, dim):
            raise ValueError(f"layer weight shape {weight.shape} != ({dim}, {dim})")
        parts.append(np.ascontiguousarray(weight, dtype="<f8").tobytes())
        parts.append(struct.pack("<d", float(gate)))
    if ck.descriptions.shape != (len(ck.classes), dim):
        raise ValueError("description matrix shape mismatch")
    parts.append(np.ascontiguousarray(ck.descriptions, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(ck: Checkpoint, path: str | Path) -> None:
    Path(path).write_bytes(checkpoint_bytes(ck))


def load_checkpoint(path: str | Path) -> Checkpoint:
    reader = _Reader(Path(path).read_bytes())
    magic = reader.take(4)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(
            f"{path}: not a supported checkpoint (magic {magic!r}, expected KMF1)"
        )
    dim = reader.u32()
    num_layers = reader.u32()
    num_classes = reader.u32()
    config = parse_config_text(reader.take(reader.u64()).decode("utf-8"))
    classes = [reader.string() for _ in range(num_classes)]
    weights = []
    gates = []
    for _ in range(num_layers):
        weights.append(reader.f64_array(dim * dim, (dim, dim)))
        gates.append(reader.f64())
    descriptions = reader.f64_array(num_classes * dim, (num_classes, dim))
    if reader.offset != len(reader.blob):
        raise ValueError(f"{path}: trailing bytes after checkpoint payload")
    return Checkpoint(
        config=config,
        classes=classes,
        descriptions=descriptions,
        weights=weights,
        gates=gates,
    )


def save_facet_cache(
    tensors: list[FacetTensor],
    class_order: list[str],
    path: str | Path,
) -> None:
    """Write facet tensors to the versioned binary cache format."""
    if not tensors:
        raise ValueError("no facet tensors to save")
    dim = tensors[0].rows.shape[1]
    parts = [FACET_MAGIC, struct.pack("<IIII", FACET_VERSION, len(tensors), len(class_order), dim)]
    for label in class_order:
        parts.append(_pack_str(label))
    for tensor in tensors:
        parts.append(_pack_str(tensor.node_id))
        parts.append(np.ascontiguousarray(tensor.rows, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(tensor.sizes, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(tensor.weight_sums, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_facet_cache(path: str | Path) -> tuple[list[FacetTensor], list[str]]:
    reader = _Reader(Path(path).read_bytes())
    magic = reader.take(4)
    if magic != FACET_MAGIC:
        raise ValueError(f"{path}: not a facet cache (magic {magic!r})")
    version = reader.u32()
    if version != FACET_VERSION:
        raise ValueError(f"{path}: unsupported facet cache version {version}")
    count = reader.u32()
    num_classes = reader.u32()
    dim = reader.u32()
    classes = [reader.string() for _ in range(num_classes)]
    tensors = []
    for _ in range(count):
        node_id = reader.string()
        rows = reader.f64_array(num_classes * dim, (num_classes, dim))
        sizes = reader.f64_array(num_classes, (num_classes,))
        weight_sums = reader.f64_array(num_classes, (num_classes,))
        tensors.append(FacetTensor(node_id, rows, sizes, weight_sums))
    if reader.offset != len(reader.blob):
        raise ValueError(f"{path}: trailing bytes after facet payload")
    return tensors, classes
