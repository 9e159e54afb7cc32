"""Zero-shot cross-domain recommendation evaluation.

Edges touching a target class form the test set; every true pair is ranked
against randomly drawn fake pairs using dot products of the learned node
representations.  No fine-tuning happens here: the representations come
straight from a trained checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .pipeline import FeaturizedGraph, full_forward
from .seeds import substream

__all__ = ["RecsysMetrics", "rank_metrics", "recsys_evaluate"]


@dataclass
class RecsysMetrics:
    auc: float
    hit_ratio: float
    mrr: float
    num_test_edges: int


def rank_metrics(
    true_scores: np.ndarray,
    fake_scores: np.ndarray,
    k: int,
) -> RecsysMetrics:
    """Ranking quality of true pairs against their per-edge fakes.

    ``true_scores`` is (m,) and ``fake_scores`` is (m, fakes).  AUC averages
    ``[true > fake]`` over all (true, fake) pairs with ties counted 0.5.  The
    rank of a true pair is one plus the number of strictly higher fakes; hit
    ratio is the share of ranks <= k and MRR averages 1/rank for those ranks
    (0 otherwise).
    """
    true_scores = np.asarray(true_scores, dtype=np.float64)
    fake_scores = np.asarray(fake_scores, dtype=np.float64)
    if true_scores.ndim != 1 or fake_scores.ndim != 2:
        raise ValueError("rank_metrics: expected (m,) true and (m, fakes) fake scores")
    if true_scores.shape[0] != fake_scores.shape[0]:
        raise ValueError("rank_metrics: score row counts differ")
    wins = (true_scores[:, None] > fake_scores).astype(np.float64)
    ties = (true_scores[:, None] == fake_scores).astype(np.float64)
    auc = float(np.mean(wins + 0.5 * ties))
    ranks = 1 + np.sum(fake_scores > true_scores[:, None], axis=1)
    hits = ranks <= k
    hit_ratio = float(np.mean(hits))
    mrr = float(np.mean(np.where(hits, 1.0 / ranks, 0.0)))
    return RecsysMetrics(
        auc=auc,
        hit_ratio=hit_ratio,
        mrr=mrr,
        num_test_edges=int(true_scores.shape[0]),
    )


def recsys_evaluate(
    ck: Checkpoint,
    feat: FeaturizedGraph,
    edges: list[tuple[str, str]],
    target_class: str,
    neg_train: int = 5,
    neg_test: int = 100,
    k: int = 10,
    seed: int = 0,
    neg_pool: str = "all",
) -> RecsysMetrics:
    """Rank true links of the target class against sampled fakes.

    An edge is a test edge when either endpoint carries the target label; the
    rest would form the training pairs of a fine-tuned recommender and are
    untouched here (``neg_train`` is accepted for interface compatibility).
    For every test edge the destination is replaced by ``neg_test`` distinct
    nodes drawn from ``neg_pool``: ``all`` nodes, or only ``target-class``
    nodes, excluding the edge's own endpoints.  Pair score is the dot product
    of final representations.
    """
    del neg_train  # reserved: representations are not fine-tuned on links
    row_index = {node_id: i for i, node_id in enumerate(feat.node_ids)}
    labels = feat.node_labels
    test_edges = [
        (row_index[src], row_index[dst])
        for src, dst in edges
        if labels[row_index[src]] == target_class
        or labels[row_index[dst]] == target_class
    ]
    if not test_edges:
        raise ValueError(f"class {target_class!r} has no edges")

    hg = full_forward(feat, ck.weights, ck.gates)
    if neg_pool == "all":
        base_pool = np.arange(len(feat.node_ids))
    elif neg_pool == "target-class":
        base_pool = np.array(
            [i for i, label in enumerate(labels) if label == target_class]
        )
    else:
        raise ValueError(f"unknown neg_pool {neg_pool!r}")

    rng = substream(seed, "recsys")
    true_scores = np.empty(len(test_edges), dtype=np.float64)
    fake_scores = np.empty((len(test_edges), neg_test), dtype=np.float64)
    for e, (src, dst) in enumerate(test_edges):
        pool = base_pool[(base_pool != src) & (base_pool != dst)]
        if pool.shape[0] < neg_test:
            raise ValueError(
                f"negative pool of {pool.shape[0]} nodes cannot supply "
                f"{neg_test} fakes"
            )
        fakes = rng.choice(pool, size=neg_test, replace=False)
        true_scores[e] = hg[src] @ hg[dst]
        fake_scores[e] = hg[fakes] @ hg[src]
    return rank_metrics(true_scores, fake_scores, k)
