"""Planted-topic synthetic datasets for desk-scale verification.

Each class gets a disjoint keyword vocabulary linked to its label in a tiny
knowledge graph; word embeddings cluster around per-class centroids; node
text samples mostly from the node's own class vocabulary plus cross-class
noise; edges are dense within classes and sparse across them.  Fixed seeds
give byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import EmbeddingTable, GraphDataset, NodeRecord
from .kg import KnowledgeGraph, TopicNeighborhood, build_topic_neighborhood
from .seeds import substream

__all__ = ["SynthResult", "synth_generate", "toy_inputs"]


@dataclass
class SynthResult:
    out_dir: Path
    nodes_path: Path
    edges_path: Path
    kg_path: Path
    embeddings_path: Path
    labels_path: Path
    num_nodes: int
    num_edges: int
    classes: list[str]


def synth_generate(
    out_dir: str | Path,
    num_classes: int,
    nodes_per_class: int,
    vocab_per_class: int,
    noise_rate: float,
    intra_edge_prob: float,
    inter_edge_prob: float,
    dim: int,
    seed: int,
    tokens_per_node: int = 25,
    jitter: float = 0.15,
) -> SynthResult:
    """Generate nodes/edges/KG/embedding files for a planted-topic graph.

    Every token of a node comes from its own class vocabulary with
    probability ``1 - noise_rate``, otherwise from a uniformly chosen other
    class.  With ``noise_rate=0`` and ``inter_edge_prob=0`` each node's
    topic overlap is nonzero only for its own class.
    """
    if min(num_classes, nodes_per_class, vocab_per_class, dim) <= 0:
        raise ValueError("counts and dimension must be positive")
    if not 0.0 <= noise_rate < 1.0:
        raise ValueError("noise_rate must lie in [0, 1)")
    if num_classes < 2 and noise_rate > 0.0:
        raise ValueError("cross-class noise needs at least two classes")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = substream(seed, "synth")

    classes = [f"topic{c}" for c in range(num_classes)]
    vocab = {
        c: [f"w{c}_{i}" for i in range(vocab_per_class)] for c in range(num_classes)
    }

    centroids = rng.normal(0.0, 1.0, (num_classes, dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    label_vectors = centroids + jitter * rng.normal(0.0, 1.0, (num_classes, dim))
    word_vectors = {
        c: centroids[c] + jitter * rng.normal(0.0, 1.0, (vocab_per_class, dim))
        for c in range(num_classes)
    }

    num_nodes = num_classes * nodes_per_class
    node_classes = [i // nodes_per_class for i in range(num_nodes)]
    texts = []
    for node in range(num_nodes):
        own = node_classes[node]
        words = []
        for _ in range(tokens_per_node):
            if noise_rate > 0.0 and rng.random() < noise_rate:
                other = int(rng.integers(0, num_classes - 1))
                source = other if other < own else other + 1
            else:
                source = own
            words.append(vocab[source][int(rng.integers(0, vocab_per_class))])
        texts.append(" ".join(words))

    draws = rng.random((num_nodes, num_nodes))
    edges = []
    for i in range(num_nodes):
        for j in range(i + 1, num_nodes):
            prob = (
                intra_edge_prob
                if node_classes[i] == node_classes[j]
                else inter_edge_prob
            )
            if draws[i, j] < prob:
                edges.append((i, j))

    nodes_path = out / "nodes.tsv"
    with open(nodes_path, "w", encoding="utf-8") as handle:
        for node in range(num_nodes):
            handle.write(f"n{node}\t{classes[node_classes[node]]}\t{texts[node]}\n")

    edges_path = out / "edges.tsv"
    with open(edges_path, "w", encoding="utf-8") as handle:
        for i, j in edges:
            handle.write(f"n{i}\tn{j}\n")

    kg_path = out / "kg.tsv"
    with open(kg_path, "w", encoding="utf-8") as handle:
        for c in range(num_classes):
            for word in vocab[c]:
                handle.write(f"{classes[c]}\tRelatedTo\t{word}\n")

    embeddings_path = out / "emb.tsv"
    with open(embeddings_path, "w", encoding="utf-8") as handle:
        handle.write(f"{dim}\n")
        for c in range(num_classes):
            values = "\t".join(repr(float(v)) for v in label_vectors[c])
            handle.write(f"{classes[c]}\t{values}\n")
        for c in range(num_classes):
            for w, word in enumerate(vocab[c]):
                values = "\t".join(repr(float(v)) for v in word_vectors[c][w])
                handle.write(f"{word}\t{values}\n")

    labels_path = out / "labels.txt"
    labels_path.write_text("".join(f"{label}\n" for label in classes), encoding="utf-8")

    return SynthResult(
        out_dir=out,
        nodes_path=nodes_path,
        edges_path=edges_path,
        kg_path=kg_path,
        embeddings_path=embeddings_path,
        labels_path=labels_path,
        num_nodes=num_nodes,
        num_edges=len(edges),
        classes=classes,
    )


def toy_inputs(
    seed: int = 0,
    dim: int = 5,
    num_classes: int = 3,
    nodes_per_class: int = 2,
    vocab_per_class: int = 3,
    tokens_per_node: int = 4,
    noise_rate: float = 0.25,
) -> tuple[GraphDataset, list[TopicNeighborhood], EmbeddingTable]:
    """In-memory planted-topic fixture (6 nodes by default), no files involved.

    Nodes form a ring plus one chord, so every node has neighbors and the
    message-passing terms are all exercised.
    """
    rng = substream(seed, "toy")
    classes = [f"topic{c}" for c in range(num_classes)]
    vocab = {
        c: [f"w{c}_{i}" for i in range(vocab_per_class)] for c in range(num_classes)
    }
    centroids = rng.normal(0.0, 1.0, (num_classes, dim))
    vectors: dict[str, np.ndarray] = {}
    for c in range(num_classes):
        vectors[classes[c]] = centroids[c] + 0.1 * rng.normal(0.0, 1.0, dim)
        for word in vocab[c]:
            vectors[word] = centroids[c] + 0.1 * rng.normal(0.0, 1.0, dim)
    table = EmbeddingTable(dim, vectors)

    num_nodes = num_classes * nodes_per_class
    nodes = []
    for i in range(num_nodes):
        own = i // nodes_per_class
        tokens = []
        for _ in range(tokens_per_node):
            if num_classes > 1 and rng.random() < noise_rate:
                other = int(rng.integers(0, num_classes - 1))
                source = other if other < own else other + 1
            else:
                source = own
            tokens.append(vocab[source][int(rng.integers(0, vocab_per_class))])
        nodes.append(NodeRecord(f"n{i}", classes[own], tokens))

    edges = [(f"n{i}", f"n{(i + 1) % num_nodes}") for i in range(num_nodes)]
    edges.append(("n0", f"n{num_nodes // 2}"))
    dataset = GraphDataset(nodes=nodes, edges=edges, classes=list(classes))

    kg = KnowledgeGraph(
        [(classes[c], "RelatedTo", word) for c in range(num_classes) for word in vocab[c]]
    )
    neighborhoods = [
        build_topic_neighborhood(kg, label, 1, 100.0, table) for label in classes
    ]
    return dataset, neighborhoods, table
