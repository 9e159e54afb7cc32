"""Seen/unseen class splits and the induced node partition.

Mode I uses every seen class for training and every unseen-class node for
testing; an optional node-level validation fraction can be carved out of the
unseen nodes for datasets with too few classes to hold out.  Mode II holds
out part of the seen classes as zero-shot validation classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .seeds import substream

__all__ = ["ClassSplit", "make_split"]


@dataclass
class ClassSplit:
    mode: str
    seen: list[str]  # train classes plus (mode II) validation classes
    unseen: list[str]
    train_classes: list[str]
    val_classes: list[str]
    train_nodes: list[str]
    val_nodes: list[str]
    test_nodes: list[str]


def make_split(
    classes: Sequence[str],
    mode: str,
    ratios: tuple[int, int, int],
    seed: int,
    node_labels: Mapping[str, str],
    val_fraction: float = 0.0,
) -> ClassSplit:
    """Randomly partition classes, then assign nodes by class membership.

    ``ratios`` is (train, val, test) class counts and must sum to the number
    of classes.  Unlabeled nodes (empty label) stay in the graph but join no
    partition.  With mode I and ``val_fraction > 0``, that fraction of the
    unseen-class nodes moves from test to validation.
    """
    n_train, n_val, n_test = ratios
    if mode not in ("I", "II"):
        raise ValueError(f"unknown split mode {mode!r}")
    if mode == "I" and n_val != 0:
        raise ValueError("mode I does not hold out validation classes")
    if n_train + n_val + n_test != len(classes):
        raise ValueError(
            f"split sizes {ratios} do not cover the {len(classes)} classes"
        )
    if n_train < 1 or n_test < 1:
        raise ValueError("split needs at least one train and one test class")

    order = substream(seed, "split").permutation(len(classes))
    shuffled = [classes[i] for i in order]
    train_classes = shuffled[:n_train]
    val_classes = shuffled[n_train : n_train + n_val]
    unseen = shuffled[n_train + n_val :]
    seen = train_classes + val_classes

    train_set = set(train_classes)
    val_set = set(val_classes)
    unseen_set = set(unseen)
    train_nodes = [v for v, label in node_labels.items() if label in train_set]
    val_nodes = [v for v, label in node_labels.items() if label in val_set]
    test_nodes = [v for v, label in node_labels.items() if label in unseen_set]

    if mode == "I" and val_fraction > 0.0:
        rng = substream(seed, "split_val")
        count = int(len(test_nodes) * val_fraction)
        chosen = set(rng.choice(len(test_nodes), size=count, replace=False))
        val_nodes = [v for i, v in enumerate(test_nodes) if i in chosen]
        test_nodes = [v for i, v in enumerate(test_nodes) if i not in chosen]

    return ClassSplit(
        mode=mode,
        seen=seen,
        unseen=unseen,
        train_classes=train_classes,
        val_classes=val_classes,
        train_nodes=train_nodes,
        val_nodes=val_nodes,
        test_nodes=test_nodes,
    )
