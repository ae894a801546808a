"""Two-stage predictors: tag first, then map or classify the evidence.

The hybrid pipeline maps extracted keywords (and optionally slot types)
through term-frequency scores; the hierarchical pipelines feed the
reduced surface-token sequence into a second-stage classifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..corpus import KW_INTENT, NO_SLOT, Utterance, require_tokens
from ..errors import ConfigError, ContractError
from ..rng import SeedStream
from .base import EmbeddingResources, Hyper, check_corpus
from .hybrid import (
    KEYWORDS_AND_SLOTS,
    KEYWORDS_ONLY,
    FreqTable,
    build_freq_table,
    hybrid_map,
    hybrid_scores,
)
from .intent import IntentModel, classify, train_seq2one
from .joint import JointModel, fused_targets, joint_predict_full, train_joint
from .taggers import TaggerModel, tag, train_tagger


def _kept_indices(slot_tags: Sequence[str], keyword_tags: Sequence[str]) -> list[int]:
    return [i for i, (s, k) in enumerate(zip(slot_tags, keyword_tags))
            if k == KW_INTENT or s != NO_SLOT]


def hierarchical_reduce(tokens: Sequence[str], slot_tags: Sequence[str],
                        keyword_tags: Sequence[str]) -> list[str]:
    """Keep, in order, tokens tagged as keywords or carrying a slot; fall
    back to the full sequence when nothing survives."""
    if not (len(tokens) == len(slot_tags) == len(keyword_tags)):
        raise ContractError(
            f"hierarchical_reduce: lengths differ "
            f"({len(tokens)}/{len(slot_tags)}/{len(keyword_tags)})")
    kept = _kept_indices(slot_tags, keyword_tags)
    if not kept:
        return list(tokens)
    return [tokens[i] for i in kept]


@dataclass
class HierarchicalPipeline:
    slot_tagger: TaggerModel
    keyword_tagger: TaggerModel
    stage2: IntentModel | JointModel

    @property
    def stage2_kind(self) -> str:
        if isinstance(self.stage2, JointModel):
            return "joint"
        return "separate2" if self.stage2.use_attention else "separate1"


@dataclass
class HierPrediction:
    intent: str
    confidence: float
    slot_tags: list[str]
    keyword_tags: list[str]


def _stage1_reduction(pipeline_slots: TaggerModel, pipeline_keywords: TaggerModel,
                      u: Utterance) -> tuple[list[str], list[int]]:
    slot_tags, _ = tag(pipeline_slots, u.tokens)
    keyword_tags, _ = tag(pipeline_keywords, u.tokens)
    kept = _kept_indices(slot_tags, keyword_tags)
    if not kept:
        kept = list(range(len(u.tokens)))
    return [u.tokens[i] for i in kept], kept


def train_hierarchical(corpus: Sequence[Utterance], stage2: str,
                       resources: EmbeddingResources, hyper: Hyper,
                       seed: int = 0) -> HierarchicalPipeline:
    """Train both taggers, reduce the training utterances with their own
    predictions, then train the second stage on the reduced sequences.
    Token targets for the joint second stage come from the gold tags of
    the kept positions."""
    if stage2 not in ("separate1", "separate2", "joint"):
        raise ConfigError(f"unknown hierarchical stage-2 kind {stage2!r}")
    check_corpus(corpus)
    stream = SeedStream(seed, ("hier", stage2))
    slot_tagger = train_tagger(corpus, "slot", resources, hyper,
                               seed=stream.split("slot").derived_seed())
    keyword_tagger = train_tagger(corpus, "keyword", resources, hyper,
                                  seed=stream.split("keyword").derived_seed())

    reduced_tokens: list[list[str]] = []
    kept_positions: list[list[int]] = []
    for u in corpus:
        tokens, kept = _stage1_reduction(slot_tagger, keyword_tagger, u)
        reduced_tokens.append(tokens)
        kept_positions.append(kept)

    stage2_seed = stream.split("stage2").derived_seed()
    if stage2 == "joint":
        reduced_inputs = []
        for u, tokens, kept in zip(corpus, reduced_tokens, kept_positions):
            gold = fused_targets(u)
            reduced_inputs.append((tokens, [gold[i] for i in kept]))
        model: IntentModel | JointModel = train_joint(
            corpus, resources, hyper, seed=stage2_seed, reduced_inputs=reduced_inputs)
    else:
        reduced_corpus = [
            Utterance(u.id, tokens, [NO_SLOT] * len(tokens),
                      ["NonIntent"] * len(tokens), u.intent)
            for u, tokens in zip(corpus, reduced_tokens)
        ]
        model = train_seq2one(reduced_corpus, use_attention=stage2 == "separate2",
                              resources=resources, hyper=hyper, seed=stage2_seed)
    return HierarchicalPipeline(slot_tagger, keyword_tagger, model)


def hierarchical_predict(pipeline: HierarchicalPipeline, tokens: Sequence[str]
                         ) -> HierPrediction:
    """Stage-1 tags on the full utterance, stage-2 intent on the reduction."""
    require_tokens(list(tokens))
    slot_tags, _ = tag(pipeline.slot_tagger, tokens)
    keyword_tags, _ = tag(pipeline.keyword_tagger, tokens)
    reduced = hierarchical_reduce(tokens, slot_tags, keyword_tags)
    if isinstance(pipeline.stage2, JointModel):
        intent, confidence, _ = joint_predict_full(pipeline.stage2, reduced)
    else:
        intent, confidence, _ = classify(pipeline.stage2, reduced)
    return HierPrediction(intent, confidence, slot_tags, keyword_tags)


@dataclass
class HybridPipeline:
    keyword_tagger: TaggerModel
    slot_tagger: TaggerModel | None
    table: FreqTable
    mode: str

    @property
    def kind(self) -> str:
        return "hybrid2" if self.mode == KEYWORDS_AND_SLOTS else "hybrid1"


def train_hybrid(corpus: Sequence[Utterance], mode: str,
                 resources: EmbeddingResources, hyper: Hyper,
                 seed: int = 0) -> HybridPipeline:
    """Keyword tagger (plus a slot tagger for the two-evidence mode) and a
    frequency table built from the training annotations."""
    if mode not in (KEYWORDS_ONLY, KEYWORDS_AND_SLOTS):
        raise ConfigError(f"unknown hybrid mode {mode!r}")
    check_corpus(corpus)
    stream = SeedStream(seed, ("hybrid", mode))
    keyword_tagger = train_tagger(corpus, "keyword", resources, hyper,
                                  seed=stream.split("keyword").derived_seed())
    slot_tagger = None
    if mode == KEYWORDS_AND_SLOTS:
        slot_tagger = train_tagger(corpus, "slot", resources, hyper,
                                   seed=stream.split("slot").derived_seed())
    return HybridPipeline(keyword_tagger, slot_tagger, build_freq_table(corpus), mode)


def hybrid_predict(pipeline: HybridPipeline, tokens: Sequence[str]
                   ) -> HierPrediction:
    require_tokens(list(tokens))
    keyword_tags, _ = tag(pipeline.keyword_tagger, tokens)
    keywords = [t for t, k in zip(tokens, keyword_tags) if k == KW_INTENT]
    slot_tags: list[str] = []
    slots: list[str] = []
    if pipeline.slot_tagger is not None:
        slot_tags, _ = tag(pipeline.slot_tagger, tokens)
        slots = [s for s in slot_tags if s != NO_SLOT]
    intent = hybrid_map(pipeline.table, keywords, slots, pipeline.mode)
    scores = hybrid_scores(pipeline.table, keywords, slots, pipeline.mode)
    total = sum(scores.values())
    confidence = scores[intent] / total if total > 0 else 1.0
    return HierPrediction(intent, confidence, slot_tags or [NO_SLOT] * len(tokens),
                          keyword_tags)
