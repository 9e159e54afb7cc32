"""Knowledge-aware multi-faceted zero-shot node classification."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig, load_config, parse_config_text
from .corpus import (
    EmbeddingTable,
    GraphDataset,
    NodeRecord,
    OverlapSets,
    compute_overlaps,
    load_dataset,
    load_embedding_table,
    normalize_concept,
    tokenize,
)
from .estimator import GraphBundle, KmfZeroShotClassifier, check_bundle
from .facets import (
    CompositionalEmbedding,
    FacetTensor,
    TopicMask,
    compose,
    facet_embedding,
    mask_probabilities,
    sample_mask,
)
from .kg import (
    CsdVector,
    KnowledgeGraph,
    TopicNeighborhood,
    build_csd,
    build_topic_neighborhood,
    load_kg,
    load_neighborhoods,
    save_neighborhoods,
)
from .pipeline import (
    FeaturizedGraph,
    TrainingDiverged,
    evaluate_accuracy,
    export_embeddings,
    featurize,
    objective_grad_check,
    predict,
    random_guess_predict,
    run_training,
    train,
)
from .recsys import RecsysMetrics, rank_metrics, recsys_evaluate
from .split import ClassSplit, make_split
from .synth import synth_generate, toy_inputs

__version__ = "0.1.0"
