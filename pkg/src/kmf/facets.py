"""Per-node topic facets, their composition, and topic-mask augmentation.

Each node carries one embedding row per class, pooled from the words it
shares with that class's topic neighborhood.  Rows are blended into a single
vector with temperature-softmax coefficients over the overlap sizes, and an
augmented view is produced by Bernoulli-masking whole facet rows with
adaptive per-class probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import EmbeddingTable, OverlapSets

__all__ = [
    "FacetTensor",
    "CompositionalEmbedding",
    "TopicMask",
    "facet_embedding",
    "build_facet_tensor",
    "compose",
    "compose_matrix",
    "ratio_compose_matrix",
    "mask_probabilities",
    "sample_mask",
]


@dataclass
class FacetTensor:
    """Per-class facet rows of one node, with overlap statistics.

    Row ``c`` is the zero vector exactly when the node shares no words with
    class ``c``'s topic neighborhood.
    """

    node_id: str
    rows: np.ndarray  # (num_classes, dim)
    sizes: np.ndarray  # (num_classes,) overlap cardinalities
    weight_sums: np.ndarray  # (num_classes,) attenuation weight sums


@dataclass
class CompositionalEmbedding:
    node_id: str
    vector: np.ndarray  # (dim,)
    coefficients: np.ndarray  # (num_classes,) softmax weights, sum to 1


@dataclass
class TopicMask:
    node_id: str
    kept: np.ndarray  # (num_classes,) 0/1; 1 keeps the facet
    probabilities: np.ndarray  # (num_classes,) removal probabilities


def facet_embedding(
    entries: Sequence[tuple[str, int]],
    alpha: float,
    table: EmbeddingTable,
) -> np.ndarray:
    """Pool one overlap set into a facet row.

    Each (word, hop) contributes its embedding weighted by ``alpha ** hop``;
    the sum is divided by the overlap size.  An empty overlap yields the
    zero vector.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not entries:
        return np.zeros(table.dimension, dtype=np.float64)
    total = np.zeros(table.dimension, dtype=np.float64)
    for word, hop in entries:
        total += (alpha**hop) * table[word]
    return total / len(entries)


def build_facet_tensor(
    overlap: OverlapSets,
    class_order: Sequence[str],
    alpha: float,
    table: EmbeddingTable,
) -> FacetTensor:
    rows = np.zeros((len(class_order), table.dimension), dtype=np.float64)
    sizes = np.zeros(len(class_order), dtype=np.float64)
    weight_sums = np.zeros(len(class_order), dtype=np.float64)
    for c, label in enumerate(class_order):
        entries = overlap.words.get(label, [])
        rows[c] = facet_embedding(entries, alpha, table)
        sizes[c] = len(entries)
        weight_sums[c] = float(sum(alpha**hop for _, hop in entries))
    return FacetTensor(overlap.node_id, rows, sizes, weight_sums)


def compose_matrix(
    rows: np.ndarray,
    sizes: np.ndarray,
    tau: float,
    kept: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Blend facet rows for a batch of nodes.

    ``rows`` is (n, num_classes, dim) and ``sizes`` is (n, num_classes).
    Coefficients are a max-subtracted softmax of ``sizes / tau`` per node;
    all-zero sizes therefore give uniform coefficients.  When ``kept`` is
    given, masked classes enter the softmax with size zero and contribute a
    zeroed row.  Returns (vectors (n, dim), coefficients (n, num_classes)).
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if kept is None:
        kept = np.ones_like(sizes)
    masked_sizes = sizes * kept
    z = masked_sizes / tau
    z = z - np.max(z, axis=1, keepdims=True)
    e = np.exp(z)
    coefficients = e / np.sum(e, axis=1, keepdims=True)
    vectors = np.einsum("nc,ncd->nd", coefficients * kept, rows)
    return vectors, coefficients


def compose(
    facets: FacetTensor,
    tau: float,
    mask: TopicMask | None = None,
) -> CompositionalEmbedding:
    """Blend one node's facet rows into its compositional embedding."""
    kept = None if mask is None else mask.kept[None, :]
    vectors, coefficients = compose_matrix(
        facets.rows[None, :, :], facets.sizes[None, :], tau, kept
    )
    return CompositionalEmbedding(facets.node_id, vectors[0], coefficients[0])


def ratio_compose_matrix(
    rows: np.ndarray,
    overlaps: Sequence[OverlapSets],
    class_order: Sequence[str],
    kept: np.ndarray | None = None,
) -> np.ndarray:
    """Blend facet rows with raw size-ratio coefficients instead of softmax.

    The coefficient of class ``c`` is ``|overlap_c| / |union of overlaps|``,
    the union running over unmasked classes only.  Nodes with an empty union
    get the zero vector.
    """
    n, num_classes, dim = rows.shape
    vectors = np.zeros((n, dim), dtype=np.float64)
    for i, overlap in enumerate(overlaps):
        keep_row = kept[i] if kept is not None else np.ones(num_classes)
        active = [label for c, label in enumerate(class_order) if keep_row[c] > 0]
        union = overlap.union_size(active)
        if union == 0:
            continue
        for c, label in enumerate(class_order):
            if keep_row[c] <= 0:
                continue
            share = overlap.size(label) / union
            if share:
                vectors[i] += share * rows[i, c]
    return vectors


def mask_probabilities(
    weight_sums: np.ndarray,
    overall: float,
    cutoff: float,
) -> np.ndarray:
    """Adaptive per-class removal probabilities for one node.

    Classes with larger attenuation weight sums matter more and are masked
    less: the probability scales with the gap between ``log`` weight and the
    per-node maximum, normalized by the max-to-mean gap, then truncated at
    ``cutoff``.  Classes with empty overlap get probability zero (masking a
    zero row is a no-op), and so does every class when all weights are equal.
    """
    if overall < 0.0:
        raise ValueError("overall mask probability must be >= 0")
    if not cutoff < 1.0:
        raise ValueError("cutoff probability must be < 1")
    weight_sums = np.asarray(weight_sums, dtype=np.float64)
    probs = np.zeros_like(weight_sums)
    positive = weight_sums > 0.0
    if not np.any(positive):
        return probs
    logs = np.log(weight_sums[positive])
    top = float(np.max(logs))
    mean = float(np.mean(logs))
    if top == mean:
        return probs
    ratio = (top - logs) / (top - mean)
    probs[positive] = np.minimum(ratio * overall, cutoff)
    return probs


def sample_mask(
    probabilities: np.ndarray,
    rng: np.random.Generator,
    node_id: str = "",
) -> TopicMask:
    """Draw one independent Bernoulli keep-decision per class."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    kept = (rng.random(probabilities.shape[0]) >= probabilities).astype(np.float64)
    return TopicMask(node_id=node_id, kept=kept, probabilities=probabilities)
