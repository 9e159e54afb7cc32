"""Graph dataset ingestion: nodes, edges, raw text, and word embeddings.

File formats:
  - nodes.tsv: ``id<TAB>label<TAB>text`` (an empty label marks an unlabeled
    node, which is kept in the graph but excluded from the class list)
  - edges.tsv: ``src<TAB>dst``
  - embedding table: first non-comment line is the dimension, then
    ``word<TAB>v1<TAB>...<TAB>vd`` rows
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:
    from .kg import TopicNeighborhood

__all__ = [
    "DEFAULT_STOPWORDS",
    "normalize_concept",
    "tokenize",
    "EmbeddingTable",
    "load_embedding_table",
    "save_embedding_table",
    "NodeRecord",
    "GraphDataset",
    "load_dataset",
    "OverlapSets",
    "compute_overlaps",
    "save_overlaps",
    "load_overlaps",
]

# Conjunctions, prepositions, and similar glue words removed from node text.
# A config-supplied file can replace this list.
DEFAULT_STOPWORDS = frozenset(
    """a an and are as at be but by for from in into is it its of on or such
    that the their then there these this to was were which while with""".split()
)

_WORD_RE = re.compile(r"[a-z0-9_]+")


def normalize_concept(text: str) -> str:
    """Lowercase and join whitespace runs with underscores; idempotent."""
    return "_".join(text.strip().lower().split())


def tokenize(
    text: str,
    min_count: int = 0,
    stopwords: Iterable[str] = (),
    counts: Mapping[str, int] | None = None,
) -> list[str]:
    """Split text into normalized words, dropping stopwords and rare words.

    ``counts`` holds corpus-level frequencies from a prior pass; a word is
    kept only when its count exceeds ``min_count``.
    """
    if min_count > 0 and counts is None:
        raise ValueError("tokenize: min_count > 0 requires corpus-level counts")
    stop = set(stopwords)
    out = []
    for word in _WORD_RE.findall(text.lower()):
        if word in stop:
            continue
        if min_count > 0 and counts.get(word, 0) <= min_count:
            continue
        out.append(word)
    return out


class EmbeddingTable:
    """Word -> float64 vector lookup with a single fixed dimension."""

    def __init__(self, dimension: int, vectors: Mapping[str, np.ndarray]):
        self.dimension = int(dimension)
        self.vectors: dict[str, np.ndarray] = {}
        for word, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise ValueError(
                    f"embedding for {word!r} has length {arr.size}, "
                    f"expected {self.dimension}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"embedding for {word!r} contains non-finite values")
            self.vectors[word] = arr

    def get(self, word: str) -> np.ndarray | None:
        """Return the vector for ``word``, or None when absent (never a zero fill)."""
        return self.vectors.get(word)

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[word]

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def load_embedding_table(path: str | Path) -> EmbeddingTable:
    """Read a TSV embedding table with a leading dimension line."""
    dimension: int | None = None
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if dimension is None:
                try:
                    dimension = int(line.strip())
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: expected a dimension header, got {line!r}"
                    ) from None
                continue
            parts = line.split("\t")
            word = parts[0]
            values = parts[1:]
            if len(values) != dimension:
                raise ValueError(
                    f"{path}:{lineno}: embedding row for {word!r} has "
                    f"{len(values)} values, expected {dimension}"
                )
            vectors[word] = np.array([float(v) for v in values])
    if dimension is None:
        raise ValueError(f"{path}: missing dimension header")
    return EmbeddingTable(dimension, vectors)


def save_embedding_table(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{table.dimension}\n")
        for word, vec in table.vectors.items():
            values = "\t".join(repr(float(v)) for v in vec)
            handle.write(f"{word}\t{values}\n")


@dataclass
class NodeRecord:
    id: str
    label: str  # empty string = unlabeled
    tokens: list[str] = field(default_factory=list)


@dataclass
class GraphDataset:
    nodes: list[NodeRecord]
    edges: list[tuple[str, str]]
    classes: list[str]  # distinct non-empty labels in file order

    def __post_init__(self):
        self.index = {node.id: i for i, node in enumerate(self.nodes)}

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def labels(self) -> dict[str, str]:
        return {node.id: node.label for node in self.nodes}


def load_dataset(
    nodes_path: str | Path,
    edges_path: str | Path,
    min_count: int = 0,
    stopwords: Iterable[str] = (),
) -> GraphDataset:
    """Load and validate a node/edge TSV pair.

    Tokenization is two-pass: corpus frequencies are counted over all node
    text first, then each node's tokens are filtered by ``min_count`` and
    ``stopwords``.  Duplicate edges collapse to one; a duplicate node id,
    an edge endpoint that does not exist, or a self-loop is an error.
    """
    raw: list[tuple[str, str, str]] = []
    seen_ids: set[str] = set()
    classes: list[str] = []
    with open(nodes_path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise ValueError(
                    f"{nodes_path}:{lineno}: expected id<TAB>label<TAB>text"
                )
            node_id, label, text = parts
            if node_id in seen_ids:
                raise ValueError(f"{nodes_path}:{lineno}: duplicate node id {node_id!r}")
            seen_ids.add(node_id)
            if label and label not in classes:
                classes.append(label)
            raw.append((node_id, label, text))

    counts: Counter[str] = Counter()
    for _, _, text in raw:
        counts.update(_WORD_RE.findall(text.lower()))

    nodes = [
        NodeRecord(node_id, label, tokenize(text, min_count, stopwords, counts))
        for node_id, label, text in raw
    ]

    edges: list[tuple[str, str]] = []
    seen_edges: set[tuple[str, str]] = set()
    with open(edges_path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{edges_path}:{lineno}: expected src<TAB>dst")
            src, dst = parts
            for endpoint in (src, dst):
                if endpoint not in seen_ids:
                    raise ValueError(
                        f"{edges_path}:{lineno}: unknown node id {endpoint!r}"
                    )
            if src == dst:
                raise ValueError(f"{edges_path}:{lineno}: self-loop on {src!r}")
            if (src, dst) in seen_edges:
                continue
            seen_edges.add((src, dst))
            edges.append((src, dst))

    return GraphDataset(nodes=nodes, edges=edges, classes=classes)


@dataclass
class OverlapSets:
    """Per-class intersections of a node's words with each topic neighborhood."""

    node_id: str
    words: dict[str, list[tuple[str, int]]]  # class -> [(word, hop), ...]
    weight_sums: dict[str, float]  # class -> sum of attenuation weights

    def size(self, label: str) -> int:
        return len(self.words.get(label, ()))

    def union_size(self, labels: Iterable[str] | None = None) -> int:
        """Number of distinct words over the given classes (all when None)."""
        keys = self.words.keys() if labels is None else labels
        distinct: set[str] = set()
        for label in keys:
            distinct.update(word for word, _ in self.words.get(label, ()))
        return len(distinct)


def compute_overlaps(
    node: NodeRecord,
    neighborhoods: Sequence["TopicNeighborhood"],
    alpha: float,
) -> OverlapSets:
    """Intersect a node's distinct words with every topic neighborhood.

    A word repeated in the node text counts once; the hop comes from the
    neighborhood entry.  The weight sum is ``sum(alpha ** hop)`` over the
    intersection, so it is zero exactly when the intersection is empty.
    """
    token_set = set(node.tokens)
    words: dict[str, list[tuple[str, int]]] = {}
    weight_sums: dict[str, float] = {}
    for nbhd in neighborhoods:
        hits = [(e.word, e.hop) for e in nbhd.entries if e.word in token_set]
        words[nbhd.label] = hits
        weight_sums[nbhd.label] = float(sum(alpha**hop for _, hop in hits))
    return OverlapSets(node_id=node.id, words=words, weight_sums=weight_sums)


def save_overlaps(overlaps: Sequence[OverlapSets], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for item in overlaps:
            record = {
                "node": item.node_id,
                "per_class": {
                    label: {
                        "words": [[word, hop] for word, hop in item.words[label]],
                        "weight_sum": item.weight_sums[label],
                    }
                    for label in item.words
                },
            }
            handle.write(json.dumps(record) + "\n")


def load_overlaps(path: str | Path) -> list[OverlapSets]:
    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            words = {
                label: [(word, int(hop)) for word, hop in entry["words"]]
                for label, entry in record["per_class"].items()
            }
            sums = {
                label: float(entry["weight_sum"])
                for label, entry in record["per_class"].items()
            }
            out.append(OverlapSets(record["node"], words, sums))
    return out
