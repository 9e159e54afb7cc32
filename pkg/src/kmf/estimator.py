"""Scikit-learn style estimator wrapping the zero-shot pipeline.

The estimator carries every training hyperparameter as a constructor
argument (so ``get_params``/``set_params``/``clone`` work as usual) and
consumes a :class:`GraphBundle` of raw inputs in place of the conventional
feature matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .config import TrainConfig
from .corpus import EmbeddingTable, GraphDataset
from .kg import TopicNeighborhood
from .pipeline import (
    evaluate_accuracy,
    featurize,
    predict,
    run_training,
)
from .split import ClassSplit

__all__ = ["GraphBundle", "check_bundle", "KmfZeroShotClassifier"]


@dataclass
class GraphBundle:
    """Raw inputs of one run: dataset, topic neighborhoods, embeddings."""

    dataset: GraphDataset
    neighborhoods: list[TopicNeighborhood]
    table: EmbeddingTable


def check_bundle(bundle: GraphBundle) -> GraphBundle:
    """Validate cross-references between the bundle's parts."""
    if not isinstance(bundle, GraphBundle):
        raise TypeError("expected a GraphBundle")
    if not bundle.dataset.nodes:
        raise ValueError("bundle: dataset has no nodes")
    if not bundle.neighborhoods:
        raise ValueError("bundle: no topic neighborhoods")
    labels = {nbhd.label for nbhd in bundle.neighborhoods}
    if len(labels) != len(bundle.neighborhoods):
        raise ValueError("bundle: duplicate neighborhood labels")
    for node in bundle.dataset.nodes:
        if node.label and node.label not in labels:
            raise ValueError(
                f"bundle: node {node.id!r} labeled {node.label!r} has no neighborhood"
            )
    return bundle


class KmfZeroShotClassifier(BaseEstimator):
    """Zero-shot node classifier over knowledge-aware multi-faceted features.

    ``fit`` trains the gated message-passing network on seen-class nodes;
    ``predict`` scores nodes against the description vectors of classes that
    were never trained on.  Parameters mirror :class:`TrainConfig`.
    """

    def __init__(
        self,
        radius: int = 2,
        keep_percent: float = 25.0,
        attenuation: float = 0.8,
        temperature: float = 10.0,
        dim: int = 1024,
        layers: int = 2,
        neighbor_cap: int = 10,
        negatives: int = 5,
        mask_strength: float = 0.3,
        mask_cutoff: float = 0.5,
        distance_margin: float = 0.3,
        direction_margin: float = 0.3,
        geometric_hinge: bool = False,
        contrastive_weight: float = 0.3,
        geometric_weight: float = 0.3,
        lr: float = 0.001,
        epochs: int = 100,
        seed: int = 0,
        min_count: int = 20,
        split_mode: str = "I",
        split_train: int = 3,
        split_val: int = 0,
        split_test: int = 4,
        val_fraction: float = 0.0,
        use_kg_csd: bool = True,
        use_facets: bool = True,
        use_contrastive: bool = True,
        use_geometric: bool = True,
        use_attenuation: bool = True,
        use_temperature: bool = True,
    ):
        self.radius = radius
        self.keep_percent = keep_percent
        self.attenuation = attenuation
        self.temperature = temperature
        self.dim = dim
        self.layers = layers
        self.neighbor_cap = neighbor_cap
        self.negatives = negatives
        self.mask_strength = mask_strength
        self.mask_cutoff = mask_cutoff
        self.distance_margin = distance_margin
        self.direction_margin = direction_margin
        self.geometric_hinge = geometric_hinge
        self.contrastive_weight = contrastive_weight
        self.geometric_weight = geometric_weight
        self.lr = lr
        self.epochs = epochs
        self.seed = seed
        self.min_count = min_count
        self.split_mode = split_mode
        self.split_train = split_train
        self.split_val = split_val
        self.split_test = split_test
        self.val_fraction = val_fraction
        self.use_kg_csd = use_kg_csd
        self.use_facets = use_facets
        self.use_contrastive = use_contrastive
        self.use_geometric = use_geometric
        self.use_attenuation = use_attenuation
        self.use_temperature = use_temperature

    def build_config(self) -> TrainConfig:
        return TrainConfig(**self.get_params()).validate()

    def fit(self, bundle: GraphBundle, split: ClassSplit | None = None):
        """Train on the bundle; returns self."""
        check_bundle(bundle)
        ck, breakdowns, used_split, feat = run_training(
            bundle.dataset,
            bundle.neighborhoods,
            bundle.table,
            self.build_config(),
            split=split,
        )
        self.checkpoint_ = ck
        self.split_ = used_split
        self.featurized_ = feat
        self.classes_ = list(ck.classes)
        self.loss_history_ = breakdowns
        return self

    def _require_fitted(self):
        if not hasattr(self, "checkpoint_"):
            raise NotFittedError("fit must be called before this method")

    def _featurized_for(self, bundle: GraphBundle | None):
        if bundle is None:
            return self.featurized_
        check_bundle(bundle)
        return featurize(
            bundle.dataset,
            bundle.neighborhoods,
            bundle.table,
            self.checkpoint_.config,
        )

    def predict(
        self,
        bundle: GraphBundle | None = None,
        classes: Sequence[str] | None = None,
    ) -> dict[str, str]:
        """Zero-shot labels over the unseen classes (or an explicit class set)."""
        self._require_fitted()
        feat = self._featurized_for(bundle)
        targets = list(classes) if classes is not None else list(self.split_.unseen)
        return predict(self.checkpoint_, feat, targets)

    def transform(self, bundle: GraphBundle | None = None) -> tuple[list[str], np.ndarray]:
        """Final node representations as (node_ids, matrix)."""
        from .pipeline import full_forward

        self._require_fitted()
        feat = self._featurized_for(bundle)
        return list(feat.node_ids), full_forward(
            feat, self.checkpoint_.weights, self.checkpoint_.gates
        )

    def score(self, bundle: GraphBundle | None = None) -> float:
        """Zero-shot accuracy on the held-out test nodes of the fitted split."""
        self._require_fitted()
        feat = self._featurized_for(bundle)
        labels = dict(zip(feat.node_ids, feat.node_labels))
        predictions = predict(self.checkpoint_, feat, list(self.split_.unseen))
        test_ids = [v for v in self.split_.test_nodes if v in labels]
        return evaluate_accuracy(
            {v: predictions[v] for v in test_ids},
            {v: labels[v] for v in test_ids},
        )
