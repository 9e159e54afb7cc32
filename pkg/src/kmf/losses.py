"""Training objectives: contrastive, geometric, classification, and total loss.

All loss builders return scalar autodiff tensors so the whole objective sits
on one tape.  Class description vectors are fixed inputs: only the message
passing parameters receive gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "critic",
    "contrastive_pair_loss",
    "contrastive_loss",
    "prototypes",
    "geometric_loss",
    "score",
    "classification_loss",
    "total_loss",
    "LossBreakdown",
]


def critic(u: Tensor, v: Tensor) -> Tensor:
    """Agreement score of two vectors: sigmoid of their dot product."""
    return ad.sigmoid(ad.dot(u, v))


def _log_critic(u: Tensor, v: Tensor) -> Tensor:
    return ad.log(ad.sigmoid(ad.dot(u, v)))


def _log_one_minus_critic(u: Tensor, v: Tensor) -> Tensor:
    # log(1 - sigmoid(x)) == log(sigmoid(-x)), which never hits log(0) early
    return ad.log(ad.sigmoid(ad.neg(ad.dot(u, v))))


def contrastive_pair_loss(
    anchor: Tensor,
    positive: Tensor,
    negatives: Sequence[Tensor],
) -> Tensor:
    """One direction of the symmetric entropy loss for a positive pair.

    ``-(log critic(anchor, positive) + sum log(1 - critic(anchor, negative)))``
    over the supplied negatives; nonnegative, and zero only in the limit of
    infinite agreement.
    """
    loss = ad.neg(_log_critic(anchor, positive))
    for negative in negatives:
        loss = ad.sub(loss, _log_one_minus_critic(anchor, negative))
    return loss


def contrastive_loss(
    original: Tensor,
    augmented: Tensor,
    anchor_rows: np.ndarray,
    negative_rows: np.ndarray,
) -> Tensor:
    """Mean over anchors of both directions of the pair loss.

    ``original`` and ``augmented`` are full node matrices; ``anchor_rows``
    selects the training nodes and ``negative_rows`` is (num_anchors, Q) with
    row indices of each anchor's negatives.  Direction one contrasts against
    original-view negatives, direction two against augmented-view negatives;
    the positive term is shared because the critic is symmetric.
    """
    anchor_rows = np.asarray(anchor_rows, dtype=np.intp)
    negative_rows = np.asarray(negative_rows, dtype=np.intp)
    num_anchors = anchor_rows.shape[0]
    if num_anchors == 0:
        raise ValueError("contrastive_loss: no anchor nodes")

    view_a = ad.rows(original, anchor_rows)
    view_b = ad.rows(augmented, anchor_rows)
    positive = ad.sum_all(ad.log(ad.sigmoid(ad.rowwise_dot(view_a, view_b))))
    pieces = ad.scale(positive, 2.0)

    if negative_rows.size:
        q = negative_rows.shape[1]
        repeated = np.repeat(anchor_rows, q)
        flat = negative_rows.reshape(-1)
        for matrix in (original, augmented):
            anchors = ad.rows(matrix, repeated)
            others = ad.rows(matrix, flat)
            dots = ad.rowwise_dot(anchors, others)
            pieces = ad.add(pieces, ad.sum_all(ad.log(ad.sigmoid(ad.neg(dots)))))

    return ad.scale(ad.neg(pieces), 1.0 / num_anchors)


def prototypes(
    embeddings: Tensor,
    class_rows: Mapping[str, np.ndarray],
) -> dict[str, Tensor]:
    """Per-class centroids of the given node representation rows."""
    out: dict[str, Tensor] = {}
    for label, idx in class_rows.items():
        idx = np.asarray(idx, dtype=np.intp)
        if idx.size == 0:
            raise ValueError(f"class {label!r} has no training nodes")
        out[label] = ad.mean_axis0(ad.rows(embeddings, idx))
    return out


def geometric_loss(
    class_prototypes: Sequence[Tensor],
    descriptions: Sequence[np.ndarray],
    distance_margin: float,
    direction_margin: float,
    hinge: bool = False,
) -> tuple[Tensor, Tensor]:
    """Distance and relative-direction alignment over all class pairs.

    For every unordered pair, the prototype-space distance (or cosine) is
    compared with the description-space one; the loss is the mean of
    ``| |gap| - margin |``.  With ``hinge=True`` the term becomes
    ``max(|gap| - margin, 0)`` instead, penalizing only gaps above the margin.
    A zero-norm prototype or description makes the cosine term fail.
    """
    count = len(class_prototypes)
    if count < 2:
        raise ValueError("geometric_loss: need at least two classes")
    if len(descriptions) != count:
        raise ValueError("geometric_loss: prototypes and descriptions differ in length")
    for vec in descriptions:
        if float(np.linalg.norm(vec)) == 0.0:
            raise ValueError("geometric_loss: zero-norm class description")

    def margin_term(gap: Tensor, margin: float) -> Tensor:
        shifted = ad.sub(gap, ad.constant(margin))
        return ad.relu(shifted) if hinge else ad.absolute(shifted)

    distance_sum: Tensor | None = None
    direction_sum: Tensor | None = None
    pair_count = 0
    for i in range(count):
        for j in range(i + 1, count):
            pair_count += 1
            proto_gap = ad.euclidean_distance(class_prototypes[i], class_prototypes[j])
            desc_gap = float(np.linalg.norm(descriptions[i] - descriptions[j]))
            d_term = margin_term(
                ad.absolute(ad.sub(proto_gap, ad.constant(desc_gap))), distance_margin
            )
            proto_cos = ad.cosine_similarity(class_prototypes[i], class_prototypes[j])
            na = float(np.linalg.norm(descriptions[i]))
            nb = float(np.linalg.norm(descriptions[j]))
            desc_cos = float(np.dot(descriptions[i], descriptions[j]) / (na * nb))
            r_term = margin_term(
                ad.absolute(ad.sub(proto_cos, ad.constant(desc_cos))), direction_margin
            )
            distance_sum = d_term if distance_sum is None else ad.add(distance_sum, d_term)
            direction_sum = (
                r_term if direction_sum is None else ad.add(direction_sum, r_term)
            )
    inv = 1.0 / pair_count
    return ad.scale(distance_sum, inv), ad.scale(direction_sum, inv)


def score(embedding: Tensor, description: Tensor) -> Tensor:
    """Prediction score of a node for a class: plain dot product."""
    return ad.dot(embedding, description)


def classification_loss(
    embeddings: Tensor,
    node_rows: np.ndarray,
    label_columns: np.ndarray,
    seen_descriptions: np.ndarray,
) -> Tensor:
    """Cross entropy of softmaxed class scores over the seen classes.

    Scores are dot products against the seen-class description matrix.  The
    per-node log likelihood carries an extra ``1 / num_seen_classes`` factor
    on top of the node average.
    """
    node_rows = np.asarray(node_rows, dtype=np.intp)
    label_columns = np.asarray(label_columns, dtype=np.intp)
    if node_rows.size == 0:
        raise ValueError("classification_loss: no training nodes")
    num_seen = seen_descriptions.shape[0]
    chosen = ad.rows(embeddings, node_rows)
    scores = ad.matmul(chosen, ad.constant(seen_descriptions.T.copy()))
    predicted = ad.softmax_t(scores, 1.0)
    picked = ad.take_pairs(predicted, np.arange(node_rows.size), label_columns)
    return ad.scale(ad.neg(ad.mean_all(ad.log(picked))), 1.0 / num_seen)


@dataclass
class LossBreakdown:
    """Scalar loss terms of one step, plus the trade-off weights."""

    classification: float
    contrastive: float
    distance: float
    direction: float
    contrastive_weight: float
    geometric_weight: float

    @property
    def total(self) -> float:
        return (
            self.classification
            + self.contrastive_weight * self.contrastive
            + self.geometric_weight * (self.distance + self.direction)
        )

    def json_record(self, epoch: int) -> dict:
        return {
            "epoch": epoch,
            "L_c": self.classification,
            "L_cl": self.contrastive,
            "L_d": self.distance,
            "L_r": self.direction,
            "L": self.total,
        }


def total_loss(
    classification: Tensor,
    contrastive: Tensor | None,
    distance: Tensor | None,
    direction: Tensor | None,
    contrastive_weight: float,
    geometric_weight: float,
) -> Tensor:
    """Weighted sum of the loss terms; disabled terms pass as None."""
    if contrastive_weight < 0 or geometric_weight < 0:
        raise ValueError("trade-off weights must be >= 0")
    out = classification
    if contrastive is not None:
        out = ad.add(out, ad.scale(contrastive, contrastive_weight))
    if distance is not None and direction is not None:
        out = ad.add(out, ad.scale(ad.add(distance, direction), geometric_weight))
    return out
