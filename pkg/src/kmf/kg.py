"""Knowledge-graph topic neighborhoods and class semantic descriptions.

An offline common-sense KG snapshot (TSV triples) replaces any live concept
API.  For each class label we grow a radius-limited neighborhood over the
undirected view of the graph, score candidates by cosine similarity to the
label embedding, apply a per-hop soft cut that keeps the top share of each
ring, and pool the surviving concepts into one description vector per class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .corpus import EmbeddingTable, normalize_concept

__all__ = [
    "KnowledgeGraph",
    "load_kg",
    "TopicEntry",
    "TopicNeighborhood",
    "build_topic_neighborhood",
    "CsdVector",
    "build_csd",
    "save_neighborhoods",
    "load_neighborhoods",
]


class KnowledgeGraph:
    """Directed labeled multigraph of normalized concepts.

    Edge direction is recorded but traversal uses the undirected view:
    vicinity relations (synonym, related-to, ...) are effectively symmetric.
    """

    def __init__(self, edges: Sequence[tuple[str, str, str]]):
        self.edges: list[tuple[str, str, str]] = []
        self.entities: set[str] = set()
        self._adjacency: dict[str, set[str]] = {}
        seen: set[tuple[str, str, str]] = set()
        for head, relation, tail in edges:
            head = normalize_concept(head)
            tail = normalize_concept(tail)
            edge = (head, relation, tail)
            if edge in seen:
                continue
            seen.add(edge)
            self.edges.append(edge)
            self.entities.add(head)
            self.entities.add(tail)
            self._adjacency.setdefault(head, set()).add(tail)
            self._adjacency.setdefault(tail, set()).add(head)

    def neighbors(self, concept: str) -> set[str]:
        return self._adjacency.get(concept, set())

    def __contains__(self, concept: str) -> bool:
        return concept in self.entities


def load_kg(path: str | Path) -> KnowledgeGraph:
    """Load a TSV snapshot of ``head<TAB>relation<TAB>tail`` triples.

    Duplicate lines collapse to one edge; an empty file is a valid empty
    graph; any line without exactly three columns is an error that names
    the line number.
    """
    triples: list[tuple[str, str, str]] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(
                    f"{path}:{lineno}: expected head<TAB>relation<TAB>tail, "
                    f"got {len(parts)} columns"
                )
            triples.append((parts[0], parts[1], parts[2]))
    return KnowledgeGraph(triples)


class TopicEntry(NamedTuple):
    word: str
    hop: int
    score: float


@dataclass
class TopicNeighborhood:
    """Scored, hop-annotated concept set around one class label."""

    label: str
    entries: list[TopicEntry]
    radius: int
    keep_percent: float
    skipped_missing: int = 0  # concepts dropped for lacking an embedding

    def words(self) -> set[str]:
        return {entry.word for entry in self.entries}

    def __len__(self) -> int:
        return len(self.entries)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def _expand_component(
    kg: KnowledgeGraph,
    source: str,
    radius: int,
    keep_percent: float,
    table: EmbeddingTable,
) -> tuple[dict[str, tuple[int, float]], int]:
    """Grow one component's neighborhood: per-ring scoring and soft cut.

    Each ring keeps its top ``keep_percent`` share ranked by cosine score
    (ties broken lexicographically).  Expansion continues from kept entries
    only, and a concept already seen (kept or cut) is never reconsidered.
    """
    found: dict[str, tuple[int, float]] = {source: (0, 1.0)}
    source_vec = table.get(source)
    if source_vec is None:
        # ring concepts cannot be scored against an unembedded component
        return found, 0
    seen: set[str] = {source}
    frontier: list[str] = [source]
    skipped = 0
    for hop in range(1, radius + 1):
        ring: list[str] = []
        for concept in frontier:
            for neighbor in sorted(kg.neighbors(concept)):
                if neighbor in seen:
                    continue
                seen.add(neighbor)
                ring.append(neighbor)
        if not ring:
            break
        scored: list[tuple[float, str]] = []
        for concept in ring:
            vec = table.get(concept)
            if vec is None:
                skipped += 1
                continue
            scored.append((_cosine(source_vec, vec), concept))
        scored.sort(key=lambda item: (-item[0], item[1]))
        keep = int(len(scored) * keep_percent / 100.0)
        kept = scored[:keep]
        for score, concept in kept:
            found[concept] = (hop, score)
        frontier = [concept for _, concept in kept]
    return found, skipped


def build_topic_neighborhood(
    kg: KnowledgeGraph,
    label: str,
    radius: int,
    keep_percent: float,
    table: EmbeddingTable,
) -> TopicNeighborhood:
    """Build the filtered concept neighborhood for one class label.

    The normalized label links as a single phrase when present in the graph;
    otherwise each of its word components links separately and the component
    neighborhoods are merged, keeping the minimal hop and the maximum score
    for concepts reached from several components.  The label's own concepts
    sit at hop 0 and survive any cut.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if not 0.0 < keep_percent <= 100.0:
        raise ValueError("keep_percent must lie in (0, 100]")
    phrase = normalize_concept(label)
    if phrase in kg:
        components = [phrase]
    else:
        components = [part for part in phrase.split("_") if part in kg.entities]
    if not components:
        raise ValueError(f"unlinkable label: {label!r}")

    merged: dict[str, tuple[int, float]] = {}
    skipped = 0
    for component in components:
        found, missing = _expand_component(kg, component, radius, keep_percent, table)
        skipped += missing
        for concept, (hop, score) in found.items():
            if concept in merged:
                old_hop, old_score = merged[concept]
                merged[concept] = (min(old_hop, hop), max(old_score, score))
            else:
                merged[concept] = (hop, score)

    entries = [
        TopicEntry(word, hop, score)
        for word, (hop, score) in sorted(
            merged.items(), key=lambda item: (item[1][0], item[0])
        )
    ]
    return TopicNeighborhood(
        label=label,
        entries=entries,
        radius=radius,
        keep_percent=keep_percent,
        skipped_missing=skipped,
    )


@dataclass
class CsdVector:
    """Pooled semantic description of one class."""

    label: str
    vector: np.ndarray


def build_csd(
    neighborhood: TopicNeighborhood,
    alpha: float,
    table: EmbeddingTable,
) -> CsdVector:
    """Pool a topic neighborhood into one vector.

    Every entry contributes its embedding weighted by ``alpha ** hop``; the
    sum is divided by the neighborhood size.  Entries must all be present in
    the embedding table.
    """
    if not neighborhood.entries:
        raise ValueError(f"empty topic neighborhood for {neighborhood.label!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    total = np.zeros(table.dimension, dtype=np.float64)
    for entry in neighborhood.entries:
        vec = table.get(entry.word)
        if vec is None:
            raise KeyError(
                f"concept {entry.word!r} of class {neighborhood.label!r} "
                "is missing from the embedding table"
            )
        total += (alpha**entry.hop) * vec
    vector = total / len(neighborhood.entries)
    if not np.all(np.isfinite(vector)):
        raise ValueError(f"non-finite description vector for {neighborhood.label!r}")
    return CsdVector(label=neighborhood.label, vector=vector)


def save_neighborhoods(
    neighborhoods: Sequence[TopicNeighborhood], path: str | Path
) -> None:
    """Write neighborhoods as JSON lines, one object per label."""
    with open(path, "w", encoding="utf-8") as handle:
        for nbhd in neighborhoods:
            record = {
                "label": nbhd.label,
                "entries": [
                    {"word": e.word, "hop": e.hop, "score": e.score}
                    for e in nbhd.entries
                ],
            }
            handle.write(json.dumps(record) + "\n")


def load_neighborhoods(path: str | Path) -> list[TopicNeighborhood]:
    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            entries = [
                TopicEntry(e["word"], int(e["hop"]), float(e["score"]))
                for e in record["entries"]
            ]
            radius = max((e.hop for e in entries), default=0)
            out.append(
                TopicNeighborhood(
                    label=record["label"],
                    entries=entries,
                    radius=radius,
                    keep_percent=100.0,
                )
            )
    return out
