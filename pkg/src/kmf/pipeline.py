"""End-to-end orchestration: featurization, the training loop, and inference.

Training is full-batch and deterministic: all randomness (neighbor samples,
topic masks, negative draws) comes from named sub-streams of the config
seed, keyed by epoch and node index, so components can be disabled or
replayed without perturbing one another.  Only message-passing parameters
are trained; class descriptions stay fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from . import facets as facetmod
from . import gnn, losses
from .checkpoint import Checkpoint
from .config import TrainConfig
from .corpus import EmbeddingTable, GraphDataset, OverlapSets, compute_overlaps
from .kg import TopicNeighborhood, build_csd
from .optim import AdamState, adam_step
from .seeds import substream
from .split import ClassSplit, make_split

__all__ = [
    "FeaturizedGraph",
    "featurize",
    "TrainingDiverged",
    "train",
    "run_training",
    "predict",
    "evaluate_accuracy",
    "random_guess_predict",
    "export_embeddings",
    "full_forward",
    "objective_grad_check",
]


@dataclass
class FeaturizedGraph:
    """Everything derived from raw inputs that training and inference need."""

    node_ids: list[str]
    node_labels: list[str]
    class_order: list[str]
    descriptions: np.ndarray  # (C, d) class description matrix
    base: np.ndarray  # (n, d) unmasked compositional embeddings
    facet_rows: np.ndarray | None  # (n, C, d); None when facets are disabled
    sizes: np.ndarray  # (n, C) overlap cardinalities
    weight_sums: np.ndarray  # (n, C)
    mask_probs: np.ndarray  # (n, C) adaptive removal probabilities
    overlaps: list[OverlapSets]
    neighbor_lists: list[np.ndarray]
    dim: int

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    def row_of(self, node_id: str) -> int:
        return self.node_ids.index(node_id)


def label_embedding(label: str, table: EmbeddingTable) -> np.ndarray:
    """Embedding of the label phrase itself, used when KG descriptions are off.

    Falls back to the mean of the label's word components when the full
    phrase is not in the table.
    """
    from .corpus import normalize_concept

    phrase = normalize_concept(label)
    vec = table.get(phrase)
    if vec is not None:
        return vec.copy()
    parts = [table[p] for p in phrase.split("_") if p in table]
    if not parts:
        raise KeyError(f"label {label!r} has no embedding")
    return np.mean(parts, axis=0)


def featurize(
    dataset: GraphDataset,
    neighborhoods: Sequence[TopicNeighborhood],
    table: EmbeddingTable,
    config: TrainConfig,
) -> FeaturizedGraph:
    """Build class descriptions, overlaps, facets, and base embeddings.

    The class order of the model is the neighborhood order, everywhere:
    facet rows, description matrix, checkpoints.  Node labels outside that
    order (other than the empty unlabeled marker) are rejected.
    """
    config.validate()
    if not neighborhoods:
        raise ValueError("featurize: no topic neighborhoods")
    class_order = [nbhd.label for nbhd in neighborhoods]
    if len(set(class_order)) != len(class_order):
        raise ValueError("featurize: duplicate class labels in neighborhoods")
    known = set(class_order)
    for node in dataset.nodes:
        if node.label and node.label not in known:
            raise ValueError(
                f"node {node.id!r} has label {node.label!r} with no topic neighborhood"
            )
    if table.dimension != config.dim:
        raise ValueError(
            f"embedding dimension {table.dimension} does not match config dim {config.dim}"
        )

    alpha = config.attenuation if config.use_attenuation else 1.0

    if config.use_kg_csd:
        description_rows = [build_csd(n, alpha, table).vector for n in neighborhoods]
    else:
        description_rows = [label_embedding(n.label, table) for n in neighborhoods]
    descriptions = np.stack(description_rows)

    overlaps = [compute_overlaps(node, neighborhoods, alpha) for node in dataset.nodes]

    n = len(dataset.nodes)
    num_classes = len(class_order)
    sizes = np.zeros((n, num_classes), dtype=np.float64)
    weight_sums = np.zeros((n, num_classes), dtype=np.float64)
    for i, overlap in enumerate(overlaps):
        for c, label in enumerate(class_order):
            sizes[i, c] = overlap.size(label)
            weight_sums[i, c] = overlap.weight_sums.get(label, 0.0)

    facet_rows: np.ndarray | None = None
    if config.use_facets:
        facet_rows = np.zeros((n, num_classes, table.dimension), dtype=np.float64)
        for i, overlap in enumerate(overlaps):
            for c, label in enumerate(class_order):
                facet_rows[i, c] = facetmod.facet_embedding(
                    overlap.words.get(label, []), alpha, table
                )
        if config.use_temperature:
            base, _ = facetmod.compose_matrix(facet_rows, sizes, config.temperature)
        else:
            base = facetmod.ratio_compose_matrix(facet_rows, overlaps, class_order)
    else:
        # plain content embedding: mean over the node's distinct embedded words
        base = np.zeros((n, table.dimension), dtype=np.float64)
        for i, node in enumerate(dataset.nodes):
            vectors = [table[w] for w in sorted(set(node.tokens)) if w in table]
            if vectors:
                base[i] = np.mean(vectors, axis=0)

    mask_probs = np.zeros((n, num_classes), dtype=np.float64)
    for i in range(n):
        mask_probs[i] = facetmod.mask_probabilities(
            weight_sums[i], config.mask_strength, config.mask_cutoff
        )

    index = dataset.index
    edge_rows = [(index[src], index[dst]) for src, dst in dataset.edges]
    neighbor_lists = gnn.build_neighbor_lists(n, edge_rows)

    return FeaturizedGraph(
        node_ids=[node.id for node in dataset.nodes],
        node_labels=[node.label for node in dataset.nodes],
        class_order=class_order,
        descriptions=descriptions,
        base=base,
        facet_rows=facet_rows,
        sizes=sizes,
        weight_sums=weight_sums,
        mask_probs=mask_probs,
        overlaps=overlaps,
        neighbor_lists=neighbor_lists,
        dim=table.dimension,
    )


def masked_view(feat: FeaturizedGraph, config: TrainConfig, epoch: int) -> np.ndarray:
    """Compose the topic-masked node features for one epoch.

    Mask bits come from per-(seed, epoch, node) sub-streams, so sampling is
    order-independent and reproducible.  Without facet rows there is nothing
    to mask and the unmasked base is returned.
    """
    if feat.facet_rows is None:
        return feat.base
    n, num_classes = feat.sizes.shape
    kept = np.empty((n, num_classes), dtype=np.float64)
    for i in range(n):
        rng = substream(config.seed, "mask", epoch, i)
        kept[i] = facetmod.sample_mask(feat.mask_probs[i], rng, feat.node_ids[i]).kept
    if config.use_temperature:
        vectors, _ = facetmod.compose_matrix(
            feat.facet_rows, feat.sizes, config.temperature, kept
        )
        return vectors
    return facetmod.ratio_compose_matrix(
        feat.facet_rows, feat.overlaps, feat.class_order, kept
    )


def sample_negative_rows(
    train_rows: np.ndarray,
    config: TrainConfig,
    epoch: int,
) -> np.ndarray:
    """Draw each anchor's negatives uniformly from the other training nodes."""
    count = config.negatives
    t = train_rows.shape[0]
    if count == 0:
        return np.zeros((t, 0), dtype=np.intp)
    if count > t - 1:
        raise ValueError(
            f"negative count {count} exceeds the {t - 1} other training nodes"
        )
    out = np.empty((t, count), dtype=np.intp)
    for k in range(t):
        pool = np.delete(train_rows, k)
        rng = substream(config.seed, "negatives", epoch, int(train_rows[k]))
        out[k] = rng.choice(pool, size=count, replace=False)
    return out


@dataclass
class TrainContext:
    """Index structures fixed for a whole training run."""

    train_rows: np.ndarray  # row indices of training nodes
    label_cols: np.ndarray  # per training node, its class position
    train_classes: list[str]
    class_rows: dict[str, np.ndarray]  # train class -> node row indices
    seen_descriptions: np.ndarray  # (num_train_classes, d)


def build_context(feat: FeaturizedGraph, split: ClassSplit) -> TrainContext:
    row_index = {node_id: i for i, node_id in enumerate(feat.node_ids)}
    train_rows = np.array([row_index[v] for v in split.train_nodes], dtype=np.intp)
    class_pos = {label: i for i, label in enumerate(split.train_classes)}
    label_cols = np.array(
        [class_pos[feat.node_labels[r]] for r in train_rows], dtype=np.intp
    )
    class_rows = {
        label: train_rows[label_cols == class_pos[label]]
        for label in split.train_classes
    }
    order_pos = {label: i for i, label in enumerate(feat.class_order)}
    seen_cols = [order_pos[label] for label in split.train_classes]
    return TrainContext(
        train_rows=train_rows,
        label_cols=label_cols,
        train_classes=list(split.train_classes),
        class_rows=class_rows,
        seen_descriptions=feat.descriptions[seen_cols],
    )


@dataclass
class EpochInputs:
    """Per-epoch random draws, fixed before the loss is built."""

    adjacency: gnn.AdjacencyIndex
    masked_base: np.ndarray | None
    negative_rows: np.ndarray | None


def build_epoch_inputs(
    feat: FeaturizedGraph,
    ctx: TrainContext,
    config: TrainConfig,
    epoch: int,
) -> EpochInputs:
    adjacency = gnn.sample_neighbors(
        feat.neighbor_lists, config.neighbor_cap, substream(config.seed, "sampling", epoch)
    )
    use_contrastive = config.use_contrastive and config.contrastive_weight > 0.0
    masked = masked_view(feat, config, epoch) if use_contrastive else None
    negatives = (
        sample_negative_rows(ctx.train_rows, config, epoch) if use_contrastive else None
    )
    return EpochInputs(adjacency=adjacency, masked_base=masked, negative_rows=negatives)


def epoch_loss(
    params: gnn.GnnParams,
    feat: FeaturizedGraph,
    ctx: TrainContext,
    inputs: EpochInputs,
    config: TrainConfig,
) -> tuple[ad.Tensor, losses.LossBreakdown]:
    """Assemble the joint objective for one epoch on a fresh tape."""
    hg = gnn.forward(feat.base, inputs.adjacency, params)

    l_c = losses.classification_loss(
        hg, ctx.train_rows, ctx.label_cols, ctx.seen_descriptions
    )

    l_cl: ad.Tensor | None = None
    if inputs.masked_base is not None:
        hg_masked = gnn.forward(inputs.masked_base, inputs.adjacency, params)
        l_cl = losses.contrastive_loss(
            hg, hg_masked, ctx.train_rows, inputs.negative_rows
        )

    l_d: ad.Tensor | None = None
    l_r: ad.Tensor | None = None
    if config.use_geometric and config.geometric_weight > 0.0:
        protos = losses.prototypes(hg, ctx.class_rows)
        proto_list = [protos[label] for label in ctx.train_classes]
        description_list = list(ctx.seen_descriptions)
        l_d, l_r = losses.geometric_loss(
            proto_list,
            description_list,
            config.distance_margin,
            config.direction_margin,
            hinge=config.geometric_hinge,
        )

    total = losses.total_loss(
        l_c, l_cl, l_d, l_r, config.contrastive_weight, config.geometric_weight
    )
    breakdown = losses.LossBreakdown(
        classification=l_c.item(),
        contrastive=l_cl.item() if l_cl is not None else 0.0,
        distance=l_d.item() if l_d is not None else 0.0,
        direction=l_r.item() if l_r is not None else 0.0,
        contrastive_weight=config.contrastive_weight,
        geometric_weight=config.geometric_weight,
    )
    return total, breakdown


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training diverged: non-finite loss at epoch {epoch}")
        self.epoch = epoch


def full_forward(
    feat: FeaturizedGraph,
    weights: Sequence[np.ndarray],
    gates: Sequence[float],
) -> np.ndarray:
    """Inference forward pass over the full (unsampled) neighbor lists."""
    params = gnn.GnnParams(
        weights=[ad.constant(w) for w in weights],
        gates=[ad.constant(float(g)) for g in gates],
        dim=feat.dim,
    )
    adjacency = gnn.AdjacencyIndex(neighbors=feat.neighbor_lists, cap=None)
    return gnn.forward(feat.base, adjacency, params).data


def _zero_shot_accuracy(
    feat: FeaturizedGraph,
    weights: Sequence[np.ndarray],
    gates: Sequence[float],
    descriptions: np.ndarray,
    class_order: list[str],
    node_ids: Sequence[str],
    targets: Sequence[str],
    truth: Mapping[str, str],
) -> float:
    hg = full_forward(feat, weights, gates)
    order_pos = {label: i for i, label in enumerate(class_order)}
    cols = [order_pos[label] for label in targets]
    scores = hg @ descriptions[cols].T
    row_index = {node_id: i for i, node_id in enumerate(feat.node_ids)}
    correct = 0
    for node_id in node_ids:
        row = row_index[node_id]
        predicted = targets[int(np.argmax(scores[row]))]
        correct += predicted == truth[node_id]
    return correct / len(node_ids) if node_ids else 0.0


def train(
    feat: FeaturizedGraph,
    split: ClassSplit,
    config: TrainConfig,
    log_path: str | Path | None = None,
) -> tuple[Checkpoint, list[losses.LossBreakdown]]:
    """Optimize the joint objective on the training nodes.

    Model selection: mode II keeps the epoch with the best zero-shot accuracy
    on the validation classes; mode I keeps the final epoch (validation
    nodes, when present, are only reported).  Loss values are logged before
    the parameter update of their epoch; validation accuracy after it.
    """
    if not split.train_nodes:
        raise ValueError("train: empty training set")
    ctx = build_context(feat, split)
    params = gnn.init_params(config.layers, feat.dim, config.seed)
    state_opt = AdamState(lr=config.lr)
    trainables = params.trainables()

    truth = dict(zip(feat.node_ids, feat.node_labels))
    breakdowns: list[losses.LossBreakdown] = []
    records: list[dict] = []
    best_acc = -1.0
    best_weights: list[np.ndarray] | None = None
    best_gates: list[float] | None = None

    for epoch in range(config.epochs):
        inputs = build_epoch_inputs(feat, ctx, config, epoch)
        loss, breakdown = epoch_loss(params, feat, ctx, inputs, config)
        if not np.isfinite(breakdown.total):
            raise TrainingDiverged(epoch)
        ad.backward(loss)
        grads = {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in trainables.items()
        }
        adam_step(trainables, grads, state_opt)
        breakdowns.append(breakdown)
        record = breakdown.json_record(epoch)

        if split.val_nodes:
            val_targets = split.val_classes if split.mode == "II" else split.unseen
            val_acc = _zero_shot_accuracy(
                feat,
                [w.data for w in params.weights],
                [float(g.data) for g in params.gates],
                feat.descriptions,
                feat.class_order,
                split.val_nodes,
                val_targets,
                truth,
            )
            record["val_acc"] = val_acc
            if split.mode == "II" and val_acc > best_acc:
                best_acc = val_acc
                best_weights = [w.data.copy() for w in params.weights]
                best_gates = [float(g.data) for g in params.gates]
        records.append(record)

    if split.mode == "II" and best_weights is not None:
        final_weights, final_gates = best_weights, best_gates
    else:
        final_weights = [w.data.copy() for w in params.weights]
        final_gates = [float(g.data) for g in params.gates]

    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record) + "\n")

    ck = Checkpoint(
        config=config,
        classes=list(feat.class_order),
        descriptions=feat.descriptions.copy(),
        weights=final_weights,
        gates=final_gates,
    )
    return ck, breakdowns


def run_training(
    dataset: GraphDataset,
    neighborhoods: Sequence[TopicNeighborhood],
    table: EmbeddingTable,
    config: TrainConfig,
    split: ClassSplit | None = None,
    log_path: str | Path | None = None,
) -> tuple[Checkpoint, list[losses.LossBreakdown], ClassSplit, FeaturizedGraph]:
    """Featurize, split (unless given), and train in one call."""
    feat = featurize(dataset, neighborhoods, table, config)
    if split is None:
        split = make_split(
            feat.class_order,
            config.split_mode,
            config.split_ratios,
            config.seed,
            dataset.labels(),
            config.val_fraction,
        )
    ck, breakdowns = train(feat, split, config, log_path=log_path)
    return ck, breakdowns, split, feat


def predict(
    ck: Checkpoint,
    feat: FeaturizedGraph,
    target_classes: Sequence[str],
) -> dict[str, str]:
    """Label every node with its best-scoring target class.

    Scores are dot products between final representations and the stored
    class descriptions; ties break toward the earlier target class.
    """
    targets = list(target_classes)
    if not targets:
        raise ValueError("predict: empty target class set")
    position = {label: i for i, label in enumerate(ck.classes)}
    for label in targets:
        if label not in position:
            raise ValueError(f"predict: unknown class {label!r}")
    hg = full_forward(feat, ck.weights, ck.gates)
    scores = hg @ ck.descriptions[[position[t] for t in targets]].T
    winners = np.argmax(scores, axis=1)
    return {
        node_id: targets[int(winners[i])] for i, node_id in enumerate(feat.node_ids)
    }


def evaluate_accuracy(
    predictions: Mapping[str, str],
    truth: Mapping[str, str],
) -> float:
    """Fraction of ids labeled correctly; the id sets must match exactly."""
    if set(predictions) != set(truth):
        raise ValueError("evaluate_accuracy: prediction and truth ids differ")
    if not truth:
        raise ValueError("evaluate_accuracy: empty id set")
    hits = sum(1 for node_id, label in truth.items() if predictions[node_id] == label)
    return hits / len(truth)


def random_guess_predict(
    node_ids: Sequence[str],
    classes: Sequence[str],
    seed: int,
) -> dict[str, str]:
    """Uniform random baseline over the candidate classes."""
    if not classes:
        raise ValueError("random_guess_predict: empty class set")
    rng = substream(seed, "randguess")
    draws = rng.integers(0, len(classes), size=len(node_ids))
    return {node_id: classes[int(k)] for node_id, k in zip(node_ids, draws)}


def objective_grad_check(
    dataset: GraphDataset,
    neighborhoods: Sequence[TopicNeighborhood],
    table: EmbeddingTable,
    config: TrainConfig,
    split: ClassSplit | None = None,
    epoch: int = 0,
    eps: float = 1e-5,
    max_coords: int | None = None,
) -> float:
    """Finite-difference check of the full objective's analytic gradients.

    Freezes one epoch's random draws (masks, negatives, neighbor samples) and
    treats the loss as a pure function of the message-passing parameters.
    Returns the worst relative error over the checked coordinates.
    """
    feat = featurize(dataset, neighborhoods, table, config)
    if split is None:
        split = make_split(
            feat.class_order,
            config.split_mode,
            config.split_ratios,
            config.seed,
            {node.id: node.label for node in dataset.nodes},
            config.val_fraction,
        )
    ctx = build_context(feat, split)
    inputs = build_epoch_inputs(feat, ctx, config, epoch)
    init = gnn.init_params(config.layers, feat.dim, config.seed)
    base = {name: t.data.copy() for name, t in init.trainables().items()}

    def loss_fn(tensors: dict[str, ad.Tensor]) -> ad.Tensor:
        params = gnn.params_from_tensors(tensors, config.layers, feat.dim)
        return epoch_loss(params, feat, ctx, inputs, config)[0]

    return ad.grad_check(loss_fn, base, eps=eps, max_coords=max_coords, seed=config.seed)


def export_embeddings(
    ck: Checkpoint,
    feat: FeaturizedGraph,
    path: str | Path,
) -> int:
    """Dump final node representations as ``id<TAB>label<TAB>v1..vd`` rows."""
    hg = full_forward(feat, ck.weights, ck.gates)
    with open(path, "w", encoding="utf-8") as handle:
        for i, node_id in enumerate(feat.node_ids):
            values = "\t".join(repr(float(v)) for v in hg[i])
            handle.write(f"{node_id}\t{feat.node_labels[i]}\t{values}\n")
    return len(feat.node_ids)
