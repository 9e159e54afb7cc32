"""Gated message passing over capped neighbor samples.

Each layer mixes a node's own transformed state with the mean of its
neighbors' transformed states through a learned gate in (0, 1], then applies
a sigmoid.  The gate is stored as an unconstrained pre-activation and passed
through a sigmoid, which keeps it inside its range by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .seeds import substream

__all__ = [
    "GnnParams",
    "init_params",
    "params_from_tensors",
    "AdjacencyIndex",
    "build_neighbor_lists",
    "sample_neighbors",
    "forward",
]


@dataclass
class GnnParams:
    """Trainable message-passing parameters: per-layer weights and gates."""

    weights: list[Tensor]  # each (dim, dim)
    gates: list[Tensor]  # each 0-d pre-activation; gate = sigmoid(value)
    dim: int

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def trainables(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for layer, (weight, gate) in enumerate(zip(self.weights, self.gates)):
            out[f"layer{layer}.weight"] = weight
            out[f"layer{layer}.gate"] = gate
        return out

    def gate_values(self) -> list[float]:
        return [float(1.0 / (1.0 + np.exp(-g.data))) for g in self.gates]


def init_params(num_layers: int, dim: int, seed: int) -> GnnParams:
    """Glorot-style uniform weights in +-sqrt(6 / (2 dim)); gates start at 0.5."""
    if num_layers < 0:
        raise ValueError("num_layers must be >= 0")
    if dim <= 0:
        raise ValueError("dim must be positive")
    rng = substream(seed, "init")
    bound = float(np.sqrt(6.0 / (2.0 * dim)))
    weights = []
    gates = []
    for layer in range(num_layers):
        weights.append(
            ad.parameter(rng.uniform(-bound, bound, (dim, dim)), name=f"layer{layer}.weight")
        )
        gates.append(ad.parameter(0.0, name=f"layer{layer}.gate"))
    return GnnParams(weights=weights, gates=gates, dim=dim)


def params_from_tensors(tensors: dict[str, Tensor], num_layers: int, dim: int) -> GnnParams:
    """Reassemble GnnParams from a named tensor dict (as ``trainables`` emits)."""
    weights = [tensors[f"layer{layer}.weight"] for layer in range(num_layers)]
    gates = [tensors[f"layer{layer}.gate"] for layer in range(num_layers)]
    return GnnParams(weights=weights, gates=gates, dim=dim)


@dataclass
class AdjacencyIndex:
    """Per-node neighbor index lists, optionally capped by sampling."""

    neighbors: list[np.ndarray]
    cap: int | None = None

    @property
    def num_nodes(self) -> int:
        return len(self.neighbors)

    def mean_matrix(self) -> np.ndarray:
        """Row-stochastic aggregation matrix; isolated nodes get a zero row."""
        n = len(self.neighbors)
        matrix = np.zeros((n, n), dtype=np.float64)
        for v, idx in enumerate(self.neighbors):
            if idx.size:
                matrix[v, idx] = 1.0 / idx.size
        return matrix


def build_neighbor_lists(
    num_nodes: int, edges: list[tuple[int, int]]
) -> list[np.ndarray]:
    """Undirected, deduplicated, sorted neighbor lists without self edges."""
    sets: list[set[int]] = [set() for _ in range(num_nodes)]
    for src, dst in edges:
        if src == dst:
            continue
        sets[src].add(dst)
        sets[dst].add(src)
    return [np.array(sorted(s), dtype=np.intp) for s in sets]


def sample_neighbors(
    neighbor_lists: list[np.ndarray],
    cap: int,
    rng: np.random.Generator,
) -> AdjacencyIndex:
    """Keep all neighbors up to ``cap``, else a uniform sample without replacement."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    sampled = []
    for idx in neighbor_lists:
        if idx.size <= cap:
            sampled.append(idx)
        else:
            chosen = rng.choice(idx, size=cap, replace=False)
            sampled.append(np.sort(chosen))
    return AdjacencyIndex(neighbors=sampled, cap=cap)


def forward(
    state: Tensor | np.ndarray,
    adjacency: AdjacencyIndex,
    params: GnnParams,
) -> Tensor:
    """Run gated message passing and return final node representations.

    Layer update per node: ``sigmoid(gate * W h_v + (1 - gate) * mean over
    sampled neighbors of W h_u)``, with the neighbor term treated as the zero
    vector for isolated nodes.  Zero layers return the input unchanged.
    """
    h = state if isinstance(state, Tensor) else ad.constant(state)
    if h.ndim != 2:
        raise ValueError(f"forward: expected a node matrix, got {h.shape}")
    if not params.weights:
        return h
    if h.shape[1] != params.dim:
        raise ValueError(
            f"forward: state dimension {h.shape[1]} does not match params dim {params.dim}"
        )
    if adjacency.num_nodes != h.shape[0]:
        raise ValueError("forward: adjacency size does not match node count")
    aggregate = ad.constant(adjacency.mean_matrix())
    one = ad.constant(1.0)
    for weight, gate_pre in zip(params.weights, params.gates):
        gate = ad.sigmoid(gate_pre)
        projected = ad.matmul(h, ad.transpose(weight))
        self_term = ad.scale(projected, gate)
        neighbor_term = ad.scale(ad.matmul(aggregate, projected), ad.sub(one, gate))
        h = ad.sigmoid(ad.add(self_term, neighbor_term))
    return h
