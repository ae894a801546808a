"""Trainable models: taggers, intent classifiers, the joint model, and
the hybrid/hierarchical pipelines built from them."""

from .base import EmbeddingResources, Hyper
from .hybrid import (
    KEYWORDS_AND_SLOTS,
    KEYWORDS_ONLY,
    FreqTable,
    build_freq_table,
    hybrid_map,
    hybrid_scores,
)
from .intent import IntentModel, classify, intent_distribution, train_seq2one
from .joint import (
    JointModel,
    decode_intent,
    fused_targets,
    joint_predict,
    joint_predict_full,
    train_joint,
)
from .pipelines import (
    HierarchicalPipeline,
    HierPrediction,
    HybridPipeline,
    hierarchical_predict,
    hierarchical_reduce,
    hybrid_predict,
    train_hierarchical,
    train_hybrid,
)
from .taggers import TaggerModel, tag, tag_scores, train_tagger

__all__ = [
    "EmbeddingResources", "Hyper",
    "FreqTable", "build_freq_table", "hybrid_map", "hybrid_scores",
    "KEYWORDS_ONLY", "KEYWORDS_AND_SLOTS",
    "IntentModel", "classify", "intent_distribution", "train_seq2one",
    "JointModel", "decode_intent", "fused_targets", "joint_predict",
    "joint_predict_full", "train_joint",
    "HierarchicalPipeline", "HierPrediction", "HybridPipeline",
    "hierarchical_predict", "hierarchical_reduce", "hybrid_predict",
    "train_hierarchical", "train_hybrid",
    "TaggerModel", "tag", "tag_scores", "train_tagger",
]
